#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hbmtherm/errors.hpp"

namespace hbmtherm {

// Compressed-sparse-row matrix. Only what the thermal solver needs: build
// from triplets once, then matvec.
struct CsrMatrix {
    int n = 0;
    std::vector<int> row_ptr;
    std::vector<int> col;
    std::vector<double> val;

    std::size_t nnz() const { return val.size(); }

    double at(int i, int j) const {
        for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k) {
            if (col[k] == j) return val[k];
        }
        return 0.0;
    }

    void multiply(std::span<const double> x, std::span<double> y) const {
        for (int i = 0; i < n; ++i) {
            double acc = 0.0;
            for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k) {
                acc += val[k] * x[static_cast<std::size_t>(col[k])];
            }
            y[static_cast<std::size_t>(i)] = acc;
        }
    }

    std::vector<double> diagonal() const {
        std::vector<double> d(static_cast<std::size_t>(n), 0.0);
        for (int i = 0; i < n; ++i) d[static_cast<std::size_t>(i)] = at(i, i);
        return d;
    }
};

// Assembles a CSR matrix from an adjacency-style description: per row, a
// sorted list of (column, value). Used by the network builder.
class CsrBuilder {
  public:
    explicit CsrBuilder(int n) : rows_(static_cast<std::size_t>(n)), n_(n) {}

    void add(int i, int j, double v) {
        for (auto& [c, x] : rows_[static_cast<std::size_t>(i)]) {
            if (c == j) {
                x += v;
                return;
            }
        }
        rows_[static_cast<std::size_t>(i)].push_back({j, v});
    }

    CsrMatrix build() const {
        CsrMatrix m;
        m.n = n_;
        m.row_ptr.assign(static_cast<std::size_t>(n_) + 1, 0);
        std::size_t total = 0;
        for (int i = 0; i < n_; ++i) {
            total += rows_[static_cast<std::size_t>(i)].size();
            m.row_ptr[static_cast<std::size_t>(i) + 1] = static_cast<int>(total);
        }
        m.col.reserve(total);
        m.val.reserve(total);
        for (int i = 0; i < n_; ++i) {
            auto entries = rows_[static_cast<std::size_t>(i)];
            std::sort(entries.begin(), entries.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
            for (const auto& [c, x] : entries) {
                m.col.push_back(c);
                m.val.push_back(x);
            }
        }
        return m;
    }

  private:
    std::vector<std::vector<std::pair<int, double>>> rows_;
    int n_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

struct CgResult {
    int iterations = 0;
    double relative_residual = 0.0; ///< ||b - A x|| / ||b|| at exit
    bool converged = false;
};

// Jacobi-preconditioned conjugate gradients for symmetric positive-definite
// systems. x carries the initial guess on entry and the solution on exit.
// Stops once ||r|| <= tol * ||b||, at the iteration cap, or when the
// residual stagnates near its floating-point floor; a zero right-hand side
// yields x = 0. The caller decides whether the achieved residual is good
// enough.
inline CgResult pcg_solve(const CsrMatrix& A, std::span<const double> b,
                          std::span<double> x, double tol, int max_iterations) {
    const std::size_t n = static_cast<std::size_t>(A.n);
    const double bnorm = norm2(b);
    CgResult res;
    if (bnorm == 0.0) {
        std::fill(x.begin(), x.end(), 0.0);
        res.converged = true;
        return res;
    }

    std::vector<double> inv_diag(n);
    {
        auto d = A.diagonal();
        for (std::size_t i = 0; i < n; ++i) {
            if (d[i] <= 0.0) {
                throw NumericalError("cg: nonpositive diagonal entry at row " +
                                     std::to_string(i));
            }
            inv_diag[i] = 1.0 / d[i];
        }
    }

    std::vector<double> r(n), z(n), p(n), q(n);
    A.multiply(x, r);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
    double rnorm = norm2(r);
    if (rnorm <= tol * bnorm) {
        res.converged = true;
        res.relative_residual = rnorm / bnorm;
        return res;
    }
    for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    p = z;
    double rz = dot(r, z);

    double best = rnorm;
    int stalled = 0;
    for (int it = 1; it <= max_iterations; ++it) {
        A.multiply(p, q);
        const double pq = dot(p, q);
        if (pq <= 0.0) {
            throw NumericalError("cg: matrix is not positive definite (p'Ap = " +
                                 std::to_string(pq) + ")");
        }
        const double alpha = rz / pq;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        rnorm = norm2(r);
        res.iterations = it;
        if (rnorm <= tol * bnorm) {
            res.converged = true;
            res.relative_residual = rnorm / bnorm;
            return res;
        }
        if (rnorm < 0.999 * best) {
            best = rnorm;
            stalled = 0;
        } else if (++stalled >= 20) {
            break;
        }
        for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
        const double rz_new = dot(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    res.relative_residual = rnorm / bnorm;
    return res;
}

} // namespace hbmtherm
