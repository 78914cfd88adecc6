#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "semrelay/convex_solver.hpp"
#include "semrelay/rng.hpp"

using namespace semrelay::convex;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

ConvexProgram box_program(Index n, double lo, double hi) {
    ConvexProgram p;
    p.n_vars = n;
    p.lower = Vector::Constant(n, lo);
    p.upper = Vector::Constant(n, hi);
    return p;
}

SmoothFunction quadratic(const Matrix& q, const Vector& c) {
    return {[q, c](const Vector& x, Vector& g) {
                g = q * x + c;
                return 0.5 * x.dot(q * x) + c.dot(x);
            },
            all_coordinates(q.rows()), "quadratic"};
}

SmoothFunction affine(const Vector& a, double b, std::string name) {
    return {[a, b](const Vector& x, Vector& g) {
                g = a;
                return a.dot(x) - b;
            },
            {}, std::move(name)};
}

// Minus the sum of alpha log2(1 + c / alpha); its maximizer on the simplex is alpha ~ c.
SmoothFunction negative_rate_sum(const Vector& c) {
    return {[c](const Vector& a, Vector& g) {
                double f = 0.0;
                for (Index i = 0; i < a.size(); ++i) {
                    f -= a[i] * std::log2(1.0 + c[i] / a[i]);
                    g[i] = -(std::log2(1.0 + c[i] / a[i]) - c[i] / ((a[i] + c[i]) * std::numbers::ln2));
                }
                return f;
            },
            all_coordinates(c.size()), "rate"};
}

double golden_max(const std::function<double(double)>& f, double lo, double hi) {
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    for (int i = 0; i < 200; ++i) {
        const double x1 = b - r * (b - a), x2 = a + r * (b - a);
        (f(x1) < f(x2) ? a : b) = (f(x1) < f(x2) ? x1 : x2);
    }
    return 0.5 * (a + b);
}

// Exact QP minimum on a box with one affine inequality, by enumerating which
// bounds and which inequality are active and solving each reduced KKT system.
double qp_by_enumeration(const Matrix& q, const Vector& c, const Vector& lo, const Vector& hi, const Vector& a,
                         double b) {
    const Index n = q.rows();
    int combos = 1;
    for (Index i = 0; i < n; ++i) combos *= 3;
    double best = std::numeric_limits<double>::infinity();
    for (int code = 0; code < combos; ++code) {
        for (int ineq_active = 0; ineq_active < 2; ++ineq_active) {
            Vector x = Vector::Zero(n);
            std::vector<Index> free_idx;
            int k = code;
            for (Index i = 0; i < n; ++i, k /= 3) {
                if (k % 3 == 0) free_idx.push_back(i);
                else x[i] = k % 3 == 1 ? lo[i] : hi[i];
            }
            const Index nf = static_cast<Index>(free_idx.size());
            const Index rows = nf + ineq_active;
            if (rows == 0) {
                if (a.dot(x) > b + 1e-9) continue;
            } else {
                Matrix kkt = Matrix::Zero(rows, rows);
                Vector rhs = Vector::Zero(rows);
                const Vector grad_fixed = q * x + c;
                for (Index r = 0; r < nf; ++r) {
                    for (Index s = 0; s < nf; ++s) kkt(r, s) = q(free_idx[r], free_idx[s]);
                    rhs[r] = -grad_fixed[free_idx[r]];
                }
                if (ineq_active) {
                    for (Index r = 0; r < nf; ++r) kkt(r, nf) = kkt(nf, r) = a[free_idx[r]];
                    rhs[nf] = b - a.dot(x);
                }
                Eigen::FullPivLU<Matrix> lu(kkt);
                if (!lu.isInvertible()) continue;
                const Vector sol = lu.solve(rhs);
                for (Index r = 0; r < nf; ++r) x[free_idx[r]] = sol[r];
            }
            bool ok = a.dot(x) <= b + 1e-9;
            for (Index i = 0; i < n; ++i) ok = ok && x[i] >= lo[i] - 1e-9 && x[i] <= hi[i] + 1e-9;
            if (ok) best = std::min(best, 0.5 * x.dot(q * x) + c.dot(x));
        }
    }
    return best;
}

// Exact NNLS by trying every support.
double nnls_by_enumeration(const Matrix& a, const Vector& b) {
    const Index n = a.cols();
    double best = b.squaredNorm();
    for (int mask = 1; mask < (1 << n); ++mask) {
        std::vector<Index> idx;
        for (Index j = 0; j < n; ++j) {
            if (mask & (1 << j)) idx.push_back(j);
        }
        Matrix sub(a.rows(), static_cast<Index>(idx.size()));
        for (std::size_t k = 0; k < idx.size(); ++k) sub.col(static_cast<Index>(k)) = a.col(idx[k]);
        const Vector z = sub.colPivHouseholderQr().solve(b);
        if ((z.array() < 0.0).any()) continue;
        best = std::min(best, (sub * z - b).squaredNorm());
    }
    return best;
}

}  // namespace

TEST_CASE("minimize x^2 on [-1, 1]") {
    auto p = box_program(1, -1.0, 1.0);
    p.objective = {[](const Vector& x, Vector& g) { g[0] = 2 * x[0]; return x[0] * x[0]; }, {0}, "x^2"};
    const auto s = solve(p, Vector::Constant(1, 0.7));
    REQUIRE(s.kind == SolveKind::optimal);
    CHECK(std::abs(s.x[0]) < 1e-6);
}

TEST_CASE("minus sum of logs on the simplex is minimized at the centroid") {
    auto p = box_program(3, 0.0, 1.0);
    p.objective = {[](const Vector& x, Vector& g) {
                       double f = 0.0;
                       for (Index i = 0; i < 3; ++i) {
                           f -= std::log(x[i]);
                           g[i] = -1.0 / x[i];
                       }
                       return f;
                   },
                   all_coordinates(3), "-sum log"};
    p.eq_matrix = Matrix::Ones(1, 3);
    p.eq_rhs = Vector::Ones(1);
    const auto s = solve(p, Vector::Constant(3, 0.2));
    REQUIRE(s.kind == SolveKind::optimal);
    for (Index i = 0; i < 3; ++i) CHECK_THAT(s.x[i], WithinAbs(1.0 / 3.0, 1e-7));
    CHECK_THAT(s.x.sum(), WithinAbs(1.0, 1e-12));
}

TEST_CASE("two-user bandwidth split matches golden-section search") {
    const Vector c = (Vector(2) << 0.7, 2.5).finished();
    auto p = box_program(2, 0.0, 1.0);
    p.objective = negative_rate_sum(c);
    p.eq_matrix = Matrix::Ones(1, 2);
    p.eq_rhs = Vector::Ones(1);
    const auto s = solve(p, Vector::Constant(2, 0.5));
    REQUIRE(s.kind == SolveKind::optimal);
    const double a1 = golden_max(
        [&](double a) { return a * std::log2(1.0 + c[0] / a) + (1 - a) * std::log2(1.0 + c[1] / (1 - a)); }, 1e-12,
        1.0 - 1e-12);
    CHECK_THAT(s.x[0], WithinAbs(a1, 1e-6));
    CHECK_THAT(s.x[0], WithinAbs(c[0] / c.sum(), 1e-6));
}

TEST_CASE("three-user bandwidth split is proportional to the gains") {
    const Vector c = (Vector(3) << 0.1, 1.0, 4.0).finished();
    auto p = box_program(3, 0.0, 1.0);
    p.objective = negative_rate_sum(c);
    p.eq_matrix = Matrix::Ones(1, 3);
    p.eq_rhs = Vector::Ones(1);
    const auto s = solve(p, Vector::Constant(3, 1.0 / 3.0));
    REQUIRE(s.kind == SolveKind::optimal);
    for (Index i = 0; i < 3; ++i) CHECK_THAT(s.x[i], WithinAbs(c[i] / c.sum(), 1e-6));
}

TEST_CASE("empty feasible set is reported as infeasible with the constraint name") {
    auto p = box_program(1, 0.0, 1.0);
    p.objective = {[](const Vector& x, Vector& g) { g[0] = 1.0; return x[0]; }, {}, "x"};
    p.inequalities.push_back(affine(Vector::Ones(1), -1.0, "x <= -1"));
    CHECK_FALSE(phase1_start(p).has_value());
    const auto s = solve(p, Vector::Constant(1, 0.5));
    CHECK(s.kind == SolveKind::infeasible);
    CHECK_THAT(s.message, ContainsSubstring("x <= -1"));
}

TEST_CASE("phase 1 starts from the box midpoint and keeps a strictly feasible start") {
    auto p = box_program(2, -1.0, 3.0);
    p.objective = quadratic(Matrix::Identity(2, 2), Vector::Zero(2));
    const auto mid = phase1_start(p);
    REQUIRE(mid.has_value());
    CHECK((*mid)[0] == 1.0);
    CHECK((*mid)[1] == 1.0);

    p.inequalities.push_back(affine(Vector::Ones(2), 1.0, "x0 + x1 <= 1"));
    const Vector x0 = (Vector(2) << 0.123, -0.456).finished();
    const auto kept = phase1_start(p, &x0);
    REQUIRE(kept.has_value());
    CHECK(*kept == x0);

    const auto found = phase1_start(p);
    REQUIRE(found.has_value());
    CHECK((*found).sum() < 1.0);
}

TEST_CASE("random QPs match active-set enumeration") {
    auto rng = semrelay::SplitMix64::stream(2024, 0);
    for (int trial = 0; trial < 200; ++trial) {
        const Index n = 3;
        Matrix m(n, n);
        Vector c(n), lo(n), hi(n), a(n);
        for (Index i = 0; i < n; ++i) {
            for (Index j = 0; j < n; ++j) m(i, j) = rng.uniform() - 0.5;
            c[i] = 4.0 * (rng.uniform() - 0.5);
            lo[i] = -1.0 - rng.uniform();
            hi[i] = 1.0 + rng.uniform();
            a[i] = rng.uniform() - 0.5;
        }
        const Matrix q = m.transpose() * m + 0.1 * Matrix::Identity(n, n);
        const double b = 0.2 + 0.5 * rng.uniform();
        ConvexProgram p;
        p.n_vars = n;
        p.lower = lo;
        p.upper = hi;
        p.objective = quadratic(q, c);
        p.inequalities.push_back(affine(a, b, "cut"));
        const auto s = solve(p, Vector::Zero(n));
        INFO("trial " << trial);
        REQUIRE(s.kind == SolveKind::optimal);
        CHECK(s.kkt_residual <= 1e-7);
        const double exact = qp_by_enumeration(q, c, lo, hi, a, b);
        CHECK_THAT(s.objective_value, WithinAbs(exact, 1e-7 * std::max(1.0, std::abs(exact))));
        for (std::size_t k = 1; k < s.stage_objectives.size(); ++k) {
            CHECK(s.stage_objectives[k] <= s.stage_objectives[k - 1] + 1e-12 * std::max(1.0, std::abs(exact)));
        }
        Vector g = Vector::Zero(n);
        CHECK(s.objective_value == p.objective.eval(s.x, g));
    }
}

TEST_CASE("solves are deterministic") {
    auto p = box_program(2, 0.0, 1.0);
    p.objective = negative_rate_sum((Vector(2) << 0.3, 0.9).finished());
    p.eq_matrix = Matrix::Ones(1, 2);
    p.eq_rhs = Vector::Ones(1);
    const auto a = solve(p, Vector::Constant(2, 0.5));
    const auto b = solve(p, Vector::Constant(2, 0.5));
    CHECK(a.x == b.x);
    CHECK(a.newton_steps == b.newton_steps);
    CHECK(a.stage_objectives == b.stage_objectives);
}

TEST_CASE("NaN objective values give a numeric failure") {
    auto p = box_program(2, 0.0, 1.0);
    p.objective = {[](const Vector&, Vector& g) {
                       g.setConstant(std::numeric_limits<double>::quiet_NaN());
                       return std::numeric_limits<double>::quiet_NaN();
                   },
                   all_coordinates(2), "nan"};
    CHECK(solve(p, Vector::Constant(2, 0.5)).kind == SolveKind::numeric_failure);
}

TEST_CASE("invalid programs are rejected") {
    auto p = box_program(2, 0.0, 1.0);
    CHECK_THROWS_AS(solve(p, Vector::Zero(2)), std::invalid_argument);
    p.objective = quadratic(Matrix::Identity(2, 2), Vector::Zero(2));
    p.upper[1] = 0.0;
    CHECK_THROWS_AS(solve(p, Vector::Zero(2)), std::invalid_argument);
}

TEST_CASE("non-negative least squares matches support enumeration") {
    auto rng = semrelay::SplitMix64::stream(99, 0);
    for (int trial = 0; trial < 200; ++trial) {
        Matrix a(6, 4);
        Vector b(6);
        for (Index i = 0; i < 6; ++i) {
            for (Index j = 0; j < 4; ++j) a(i, j) = rng.uniform() - 0.5;
            b[i] = rng.uniform() - 0.5;
        }
        const Vector x = detail::nnls(a, b);
        CHECK((x.array() >= 0.0).all());
        CHECK_THAT((a * x - b).squaredNorm(), WithinAbs(nnls_by_enumeration(a, b), 1e-12));
    }
}
