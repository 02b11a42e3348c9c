#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "hbmtherm/errors.hpp"
#include "hbmtherm/linalg.hpp"
#include "hbmtherm/network.hpp"
#include "hbmtherm/power.hpp"

// Transient and steady-state solvers for C dTheta/dt + G Theta = P.
//
// Time stepping is backward Euler:
//   (C/dt + G) theta_{k+1} = (C/dt) theta_k + p_k
// which is unconditionally stable and, because C/dt + G is an M-matrix,
// keeps nonnegative inputs from producing negative temperature rises and
// decays monotonically under zero power. The operator is constant over a
// run, so its Jacobi preconditioner is set up once and every solve warm
// starts from the previous step.

namespace hbmtherm {

struct SolverConfig {
    double dt = 1e-4;               ///< s
    double linear_tolerance = 1e-10; ///< relative residual bound
    int max_iterations = 10000;

    void validate() const {
        if (!(dt > 0.0)) throw DomainError("solver: dt must be > 0");
        if (!(linear_tolerance > 0.0 && linear_tolerance < 1.0)) {
            throw DomainError("solver: linear_tolerance must be in (0, 1)");
        }
        if (max_iterations < 1) throw DomainError("solver: max_iterations must be >= 1");
    }
};

// Per-step per-bank temperature rise over ambient. Row k is the state at
// start_time + k*dt; row 0 is the initial condition, so a trace produced
// from an M-step power input has M+1 rows.
struct TemperatureTrace {
    double dt = 1e-4;
    int steps = 0;   ///< number of recorded rows
    int n_banks = 0;
    double start_time = 0.0;
    std::vector<double> values;

    double at(int step, BankId bank) const {
        return values[static_cast<std::size_t>(step) * n_banks + bank];
    }
    std::span<const double> row(int step) const {
        return {values.data() + static_cast<std::size_t>(step) * n_banks,
                static_cast<std::size_t>(n_banks)};
    }
    std::span<double> mutable_row(int step) {
        return {values.data() + static_cast<std::size_t>(step) * n_banks,
                static_cast<std::size_t>(n_banks)};
    }
    double time_of(int step) const { return start_time + step * dt; }

    static TemperatureTrace zeros(double dt, int rows, int n_banks) {
        TemperatureTrace t;
        t.dt = dt;
        t.steps = rows;
        t.n_banks = n_banks;
        t.values.assign(static_cast<std::size_t>(rows) * n_banks, 0.0);
        return t;
    }
};

inline std::vector<double> steady_state(const ThermalNetwork& net,
                                        std::span<const double> p,
                                        const SolverConfig& cfg = {}) {
    cfg.validate();
    if (static_cast<int>(p.size()) != net.n) {
        throw DomainError("steady_state: power vector length " + std::to_string(p.size()) +
                          " != bank count " + std::to_string(net.n));
    }
    if (!net.has_sink()) {
        throw ModelError("steady_state: network has no ambient sink, G is singular");
    }
    std::vector<double> theta(static_cast<std::size_t>(net.n), 0.0);
    const CgResult r = pcg_solve(net.conductance, p, theta, cfg.linear_tolerance,
                                 cfg.max_iterations);
    if (r.relative_residual > cfg.linear_tolerance && !r.converged) {
        throw NumericalError("steady_state: cg stalled at relative residual " +
                             std::to_string(r.relative_residual));
    }
    return theta;
}

// Holds the backward-Euler operator for one (network, dt) pair. Reused
// across all steps of a run and across repeated evaluations in the attack
// planner.
class TransientStepper {
  public:
    TransientStepper(const ThermalNetwork& net, const SolverConfig& cfg)
        : net_(&net), cfg_(cfg) {
        cfg.validate();
        op_ = net.conductance;
        const double cdt = 1.0 / cfg.dt;
        for (int i = 0; i < op_.n; ++i) {
            for (int k = op_.row_ptr[i]; k < op_.row_ptr[i + 1]; ++k) {
                if (op_.col[k] == i) {
                    op_.val[static_cast<std::size_t>(k)] +=
                        net.capacitance[static_cast<std::size_t>(i)] * cdt;
                }
            }
        }
        rhs_.resize(static_cast<std::size_t>(net.n));
    }

    // theta is the current state on entry and the next state on exit. The
    // solve aims below the configured bound so that residual noise stays
    // negligible even when it accumulates over thousands of steps; the
    // contract enforced here is still <= linear_tolerance.
    void advance(std::span<double> theta, std::span<const double> p) {
        const std::size_t n = static_cast<std::size_t>(net_->n);
        const double cdt = 1.0 / cfg_.dt;
        for (std::size_t i = 0; i < n; ++i) {
            rhs_[i] = net_->capacitance[i] * cdt * theta[i] + p[i];
        }
        const CgResult r = pcg_solve(op_, rhs_, theta, 0.05 * cfg_.linear_tolerance,
                                     cfg_.max_iterations);
        if (r.relative_residual > cfg_.linear_tolerance) {
            throw NumericalError("step: cg stalled at relative residual " +
                                 std::to_string(r.relative_residual));
        }
        max_rel_residual_ = std::max(max_rel_residual_, r.relative_residual);
    }

    double max_rel_residual() const { return max_rel_residual_; }
    const ThermalNetwork& network() const { return *net_; }
    const SolverConfig& config() const { return cfg_; }

  private:
    const ThermalNetwork* net_;
    SolverConfig cfg_;
    CsrMatrix op_;
    std::vector<double> rhs_;
    double max_rel_residual_ = 0.0;
};

inline std::vector<double> step(const ThermalNetwork& net, std::span<const double> theta_n,
                                std::span<const double> p_n, double dt) {
    if (static_cast<int>(theta_n.size()) != net.n || static_cast<int>(p_n.size()) != net.n) {
        throw DomainError("step: state/power length does not match bank count");
    }
    SolverConfig cfg;
    cfg.dt = dt;
    TransientStepper stepper(net, cfg);
    std::vector<double> theta(theta_n.begin(), theta_n.end());
    stepper.advance(theta, p_n);
    return theta;
}

inline TemperatureTrace simulate(const ThermalNetwork& net, const PowerTrace& power,
                                 std::span<const double> theta0, const SolverConfig& cfg,
                                 double* max_rel_residual = nullptr) {
    cfg.validate();
    if (power.n_banks != net.n) {
        throw DomainError("simulate: power trace has " + std::to_string(power.n_banks) +
                          " banks, network has " + std::to_string(net.n));
    }
    if (power.dt != cfg.dt) {
        throw DomainError("simulate: power trace dt differs from solver dt");
    }
    if (static_cast<int>(theta0.size()) != net.n) {
        throw DomainError("simulate: initial state length does not match bank count");
    }

    TemperatureTrace trace = TemperatureTrace::zeros(cfg.dt, power.steps + 1, net.n);
    std::copy(theta0.begin(), theta0.end(), trace.mutable_row(0).begin());

    TransientStepper stepper(net, cfg);
    std::vector<double> theta(theta0.begin(), theta0.end());
    for (int k = 0; k < power.steps; ++k) {
        stepper.advance(theta, power.row(k));
        auto out = trace.mutable_row(k + 1);
        for (int i = 0; i < net.n; ++i) {
            if (!std::isfinite(theta[static_cast<std::size_t>(i)])) {
                throw NumericalError("simulate: non-finite temperature at step " +
                                     std::to_string(k + 1));
            }
            out[static_cast<std::size_t>(i)] = theta[static_cast<std::size_t>(i)];
        }
    }
    if (max_rel_residual != nullptr) *max_rel_residual = stepper.max_rel_residual();
    return trace;
}

// Brute-force reference: dense explicit Euler at dt/refinement, subsampled
// back to the power grid. Kept deliberately independent of the CSR/CG path
// so it can serve as ground truth. Desk scale only.
inline TemperatureTrace reference_simulate(const ThermalNetwork& net, const PowerTrace& power,
                                           std::span<const double> theta0, int refinement) {
    if (net.n > 64) {
        throw DomainError("reference_simulate: oracle supports at most 64 banks");
    }
    if (refinement < 100) {
        throw DomainError("reference_simulate: refinement must be >= 100");
    }
    if (power.n_banks != net.n || static_cast<int>(theta0.size()) != net.n) {
        throw DomainError("reference_simulate: shape mismatch");
    }

    const int n = net.n;
    std::vector<double> dense(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) {
        for (int k = net.conductance.row_ptr[i]; k < net.conductance.row_ptr[i + 1]; ++k) {
            dense[static_cast<std::size_t>(i) * n + net.conductance.col[k]] =
                net.conductance.val[static_cast<std::size_t>(k)];
        }
    }

    // Gershgorin bound on lambda_max(G); conservative for the stability check.
    double lambda_max = 0.0;
    for (int i = 0; i < n; ++i) {
        double row_abs = 0.0;
        for (int j = 0; j < n; ++j) row_abs += std::abs(dense[static_cast<std::size_t>(i) * n + j]);
        lambda_max = std::max(lambda_max, row_abs);
    }
    const double c_min = *std::min_element(net.capacitance.begin(), net.capacitance.end());
    const double dt_fine = power.dt / refinement;
    if (lambda_max > 0.0 && dt_fine > 2.0 * c_min / lambda_max) {
        throw NumericalError(
            "reference_simulate: explicit step " + std::to_string(dt_fine) +
            " s exceeds the stability bound " + std::to_string(2.0 * c_min / lambda_max) +
            " s; increase refinement");
    }

    TemperatureTrace trace = TemperatureTrace::zeros(power.dt, power.steps + 1, n);
    std::vector<double> theta(theta0.begin(), theta0.end());
    std::copy(theta.begin(), theta.end(), trace.mutable_row(0).begin());

    std::vector<double> flow(static_cast<std::size_t>(n));
    for (int k = 0; k < power.steps; ++k) {
        const auto p = power.row(k);
        for (int f = 0; f < refinement; ++f) {
            for (int i = 0; i < n; ++i) {
                const double* grow = dense.data() + static_cast<std::size_t>(i) * n;
                double acc = 0.0;
                for (int j = 0; j < n; ++j) acc += grow[j] * theta[static_cast<std::size_t>(j)];
                flow[static_cast<std::size_t>(i)] = p[static_cast<std::size_t>(i)] - acc;
            }
            for (int i = 0; i < n; ++i) {
                theta[static_cast<std::size_t>(i)] +=
                    dt_fine * flow[static_cast<std::size_t>(i)] / net.capacitance[static_cast<std::size_t>(i)];
            }
        }
        std::copy(theta.begin(), theta.end(), trace.mutable_row(k + 1).begin());
    }
    return trace;
}

} // namespace hbmtherm
