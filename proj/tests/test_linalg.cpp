#include "catch2/catch_amalgamated.hpp"

#include <vector>

#include "hbmtherm/linalg.hpp"

using namespace hbmtherm;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("builder accumulates duplicate entries and sorts columns") {
    CsrBuilder b(3);
    b.add(0, 2, 4.0);
    b.add(0, 0, 1.0);
    b.add(0, 0, 2.0);
    b.add(1, 1, 5.0);
    b.add(2, 0, -1.0);
    b.add(2, 2, 6.0);
    const CsrMatrix m = b.build();
    CHECK(m.at(0, 0) == 3.0);
    CHECK(m.at(0, 2) == 4.0);
    CHECK(m.at(0, 1) == 0.0);
    CHECK(m.at(1, 1) == 5.0);
    CHECK(m.at(2, 0) == -1.0);
    for (int i = 0; i < m.n; ++i) {
        for (int k = m.row_ptr[i] + 1; k < m.row_ptr[i + 1]; ++k) {
            CHECK(m.col[static_cast<std::size_t>(k) - 1] < m.col[static_cast<std::size_t>(k)]);
        }
    }
}

TEST_CASE("sparse multiply matches a hand-computed product") {
    CsrBuilder b(2);
    b.add(0, 0, 2.0);
    b.add(0, 1, -1.0);
    b.add(1, 0, -1.0);
    b.add(1, 1, 2.0);
    const CsrMatrix m = b.build();
    const std::vector<double> x{3.0, 5.0};
    std::vector<double> y(2);
    m.multiply(x, y);
    CHECK(y[0] == 1.0);
    CHECK(y[1] == 7.0);
    CHECK(m.diagonal() == std::vector<double>{2.0, 2.0});
}

TEST_CASE("cg solves a small SPD system to tight residual") {
    CsrBuilder b(2);
    b.add(0, 0, 2.0);
    b.add(0, 1, -1.0);
    b.add(1, 0, -1.0);
    b.add(1, 1, 2.0);
    const CsrMatrix m = b.build();
    const std::vector<double> rhs{1.0, 0.0};
    std::vector<double> x(2, 0.0);
    const CgResult r = pcg_solve(m, rhs, x, 1e-14, 100);
    CHECK(r.converged);
    CHECK(r.relative_residual <= 1e-14);
    CHECK_THAT(x[0], WithinRel(2.0 / 3.0, 1e-12));
    CHECK_THAT(x[1], WithinRel(1.0 / 3.0, 1e-12));
}

TEST_CASE("cg with zero right-hand side returns zero immediately") {
    CsrBuilder b(2);
    b.add(0, 0, 1.0);
    b.add(1, 1, 1.0);
    const CsrMatrix m = b.build();
    const std::vector<double> rhs{0.0, 0.0};
    std::vector<double> x{7.0, -3.0};
    const CgResult r = pcg_solve(m, rhs, x, 1e-12, 100);
    CHECK(r.converged);
    CHECK(r.iterations == 0);
    CHECK(x == std::vector<double>{0.0, 0.0});
}

TEST_CASE("cg accepts an exact warm start without iterating") {
    CsrBuilder b(2);
    b.add(0, 0, 4.0);
    b.add(1, 1, 9.0);
    const CsrMatrix m = b.build();
    const std::vector<double> rhs{8.0, 18.0};
    std::vector<double> x{2.0, 2.0};
    const CgResult r = pcg_solve(m, rhs, x, 1e-12, 100);
    CHECK(r.converged);
    CHECK(r.iterations == 0);
    CHECK_THAT(x[0], WithinAbs(2.0, 1e-14));
}

TEST_CASE("cg rejects a nonpositive diagonal") {
    CsrBuilder b(2);
    b.add(0, 0, -1.0);
    b.add(1, 1, 1.0);
    const CsrMatrix m = b.build();
    const std::vector<double> rhs{1.0, 1.0};
    std::vector<double> x(2, 0.0);
    CHECK_THROWS_AS(pcg_solve(m, rhs, x, 1e-12, 100), NumericalError);
}

TEST_CASE("cg converges on a larger diagonally dominant system") {
    const int n = 40;
    CsrBuilder b(n);
    for (int i = 0; i < n; ++i) {
        b.add(i, i, 4.0);
        if (i > 0) b.add(i, i - 1, -1.0);
        if (i + 1 < n) b.add(i, i + 1, -1.0);
    }
    const CsrMatrix m = b.build();
    std::vector<double> expected(n);
    for (int i = 0; i < n; ++i) expected[static_cast<std::size_t>(i)] = 0.1 * i - 1.5;
    std::vector<double> rhs(n);
    m.multiply(expected, rhs);
    std::vector<double> x(n, 0.0);
    const CgResult r = pcg_solve(m, rhs, x, 1e-13, 1000);
    CHECK(r.converged);
    for (int i = 0; i < n; ++i) {
        CHECK_THAT(x[static_cast<std::size_t>(i)], WithinAbs(expected[static_cast<std::size_t>(i)], 1e-11));
    }
}
