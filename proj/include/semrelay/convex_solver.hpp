#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

// Log-barrier interior-point solver for small dense smooth convex programs:
//
//   minimize f(x)  s.t.  g_i(x) <= 0,  lower <= x <= upper,  A x = b
//
// Callers supply values and analytic gradients. Hessians are estimated by
// central differences of those gradients, restricted to the coordinates each
// function declares as curved. Newton systems are dense.

namespace semrelay::convex {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// A smooth function with analytic gradient. eval writes the gradient into a
/// zero-initialized vector of size n and returns the value.
struct SmoothFunction {
    std::function<double(const Vector& x, Vector& grad)> eval;
    /// Coordinates along which the function has curvature. Empty means affine.
    std::vector<Index> curved;
    std::string name;
};

inline std::vector<Index> all_coordinates(Index n) {
    std::vector<Index> idx(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    return idx;
}

struct ConvexProgram {
    Index n_vars = 0;
    SmoothFunction objective;
    std::vector<SmoothFunction> inequalities;
    Vector lower;  // -inf allowed
    Vector upper;  // +inf allowed
    Matrix eq_matrix;  // rows x n_vars, may be empty
    Vector eq_rhs;

    void validate() const {
        if (n_vars <= 0) throw std::invalid_argument("ConvexProgram: n_vars must be positive");
        if (!objective.eval) throw std::invalid_argument("ConvexProgram: objective missing");
        if (lower.size() != n_vars || upper.size() != n_vars) {
            throw std::invalid_argument("ConvexProgram: box dimension mismatch");
        }
        for (Index j = 0; j < n_vars; ++j) {
            if (!(lower[j] < upper[j])) throw std::invalid_argument("ConvexProgram: empty box");
        }
        if (eq_matrix.rows() > 0 && (eq_matrix.cols() != n_vars || eq_rhs.size() != eq_matrix.rows())) {
            throw std::invalid_argument("ConvexProgram: equality dimension mismatch");
        }
    }
};

struct Tolerances {
    double feas = 1e-8;
    double kkt = 1e-7;
    double gap = 1e-9;           // terminate once (barrier terms) / t falls below this
    double phase1_margin = 1e-9;
    double newton = 1e-11;       // centering stops when lambda^2 / 2 <= newton
    double t0 = 1.0;
    double t_growth = 20.0;
    int max_newton_per_stage = 80;
    int max_newton_total = 1200;
};

enum class SolveKind { optimal, infeasible, max_iter, numeric_failure };

inline const char* to_string(SolveKind k) {
    switch (k) {
        case SolveKind::optimal: return "optimal";
        case SolveKind::infeasible: return "infeasible";
        case SolveKind::max_iter: return "max_iter";
        case SolveKind::numeric_failure: return "numeric_failure";
    }
    return "?";
}

struct SolveStatus {
    SolveKind kind = SolveKind::numeric_failure;
    Vector x;
    double objective_value = std::numeric_limits<double>::quiet_NaN();
    double kkt_residual = std::numeric_limits<double>::infinity();
    int newton_steps = 0;
    /// Objective at the end of each barrier stage (centering).
    std::vector<double> stage_objectives;
    std::string message;
};

namespace detail {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Lawson-Hanson non-negative least squares: argmin |A x - b|_2, x >= 0.
inline Vector nnls(const Matrix& a, const Vector& b, int max_iter = 0) {
    const Index n = a.cols();
    if (max_iter <= 0) max_iter = 3 * static_cast<int>(n) + 10;
    Vector x = Vector::Zero(n);
    std::vector<bool> passive(static_cast<std::size_t>(n), false);
    const double tol = 1e-12 * std::max(1.0, a.lpNorm<Eigen::Infinity>() * b.lpNorm<Eigen::Infinity>());
    auto solve_passive = [&](Vector& z) {
        std::vector<Index> idx;
        for (Index j = 0; j < n; ++j) {
            if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
        }
        z = Vector::Zero(n);
        if (idx.empty()) return;
        Matrix sub(a.rows(), static_cast<Index>(idx.size()));
        for (std::size_t k = 0; k < idx.size(); ++k) sub.col(static_cast<Index>(k)) = a.col(idx[k]);
        const Vector zs = sub.colPivHouseholderQr().solve(b);
        for (std::size_t k = 0; k < idx.size(); ++k) z[idx[k]] = zs[static_cast<Index>(k)];
    };
    for (int outer = 0; outer < max_iter; ++outer) {
        const Vector w = a.transpose() * (b - a * x);
        Index best = -1;
        double best_w = tol;
        for (Index j = 0; j < n; ++j) {
            if (!passive[static_cast<std::size_t>(j)] && w[j] > best_w) {
                best_w = w[j];
                best = j;
            }
        }
        if (best < 0) break;
        passive[static_cast<std::size_t>(best)] = true;
        Vector z;
        for (int inner = 0; inner < max_iter; ++inner) {
            solve_passive(z);
            double step = 1.0;
            bool clipped = false;
            for (Index j = 0; j < n; ++j) {
                if (passive[static_cast<std::size_t>(j)] && z[j] <= 0.0) {
                    const double denom = x[j] - z[j];
                    if (denom > 0.0) step = std::min(step, x[j] / denom);
                    clipped = true;
                }
            }
            if (!clipped) break;
            x += step * (z - x);
            for (Index j = 0; j < n; ++j) {
                if (passive[static_cast<std::size_t>(j)] && x[j] <= tol) {
                    passive[static_cast<std::size_t>(j)] = false;
                    x[j] = 0.0;
                }
            }
        }
        x = z.cwiseMax(0.0);
    }
    return x;
}

/// Barrier state for one program at one point.
class Barrier {
public:
    Barrier(const ConvexProgram& p) : p_(p), n_(p.n_vars) {
        for (Index j = 0; j < n_; ++j) {
            if (std::isfinite(p.lower[j])) ++n_bounds_;
            if (std::isfinite(p.upper[j])) ++n_bounds_;
        }
    }

    Index barrier_terms() const { return static_cast<Index>(p_.inequalities.size()) + n_bounds_; }

    bool in_box(const Vector& x) const {
        for (Index j = 0; j < n_; ++j) {
            if (!(x[j] > p_.lower[j] && x[j] < p_.upper[j])) return false;
        }
        return true;
    }

    /// Barrier objective t f(x) + phi(x); +inf outside the domain.
    double value(const Vector& x, double t) const {
        if (!in_box(x)) return kInf;
        Vector g(n_);
        g.setZero();
        const double f = p_.objective.eval(x, g);
        if (!std::isfinite(f)) return kInf;
        double v = t * f;
        for (const auto& c : p_.inequalities) {
            g.setZero();
            const double gi = c.eval(x, g);
            if (!(gi < 0.0)) return kInf;
            v -= std::log(-gi);
        }
        for (Index j = 0; j < n_; ++j) {
            if (std::isfinite(p_.lower[j])) v -= std::log(x[j] - p_.lower[j]);
            if (std::isfinite(p_.upper[j])) v -= std::log(p_.upper[j] - x[j]);
        }
        return v;
    }

    /// Gradient and Hessian of the barrier objective at an interior point.
    bool derivatives(const Vector& x, double t, Vector& grad, Matrix& hess) const {
        grad.setZero(n_);
        hess.setZero(n_, n_);
        Vector g(n_);
        g.setZero();
        p_.objective.eval(x, g);
        if (!g.allFinite()) return false;
        grad += t * g;
        add_curvature(p_.objective, x, t, hess);
        for (const auto& c : p_.inequalities) {
            g.setZero();
            const double gi = c.eval(x, g);
            if (!(gi < 0.0) || !g.allFinite()) return false;
            const double inv = -1.0 / gi;
            grad += inv * g;
            hess.noalias() += (inv * inv) * g * g.transpose();
            add_curvature(c, x, inv, hess);
        }
        for (Index j = 0; j < n_; ++j) {
            if (std::isfinite(p_.lower[j])) {
                const double d = x[j] - p_.lower[j];
                grad[j] -= 1.0 / d;
                hess(j, j) += 1.0 / (d * d);
            }
            if (std::isfinite(p_.upper[j])) {
                const double d = p_.upper[j] - x[j];
                grad[j] += 1.0 / d;
                hess(j, j) += 1.0 / (d * d);
            }
        }
        return hess.allFinite();
    }

    /// KKT residual at x for a barrier run that ended at parameter t.
    /// Multipliers of near-active constraints (central-path estimate at least
    /// 1/sqrt(t)) are refit by non-negative least squares on the stationarity
    /// equation, as 1 / (t * slack) loses most of its digits once slacks are
    /// tiny. Returns
    /// max(stationarity / (1 + |grad f|_inf), max_i mu_i |g_i|, max_i g_i+).
    double kkt_residual(const Vector& x, double t) const {
        Vector grad_f = Vector::Zero(n_);
        p_.objective.eval(x, grad_f);
        const double scale = 1.0 + grad_f.lpNorm<Eigen::Infinity>();
        const double threshold = 1.0 / std::sqrt(t);

        std::vector<Vector> cols;
        std::vector<double> slacks;  // -g >= 0
        double infeas = 0.0;
        Vector g(n_);
        for (const auto& c : p_.inequalities) {
            g.setZero();
            const double gi = c.eval(x, g);
            infeas = std::max(infeas, gi);
            if (1.0 / (t * std::max(-gi, 1e-300)) >= threshold) {
                cols.push_back(g);
                slacks.push_back(-gi);
            }
        }
        for (Index j = 0; j < n_; ++j) {
            const std::pair<double, double> sides[] = {{p_.lower[j], -1.0}, {p_.upper[j], 1.0}};
            for (const auto& [bound, sign] : sides) {
                if (!std::isfinite(bound)) continue;
                const double slack = sign * (bound - x[j]);
                infeas = std::max(infeas, -slack);
                if (1.0 / (t * std::max(slack, 1e-300)) >= threshold) {
                    Vector e = Vector::Zero(n_);
                    e[j] = sign;
                    cols.push_back(std::move(e));
                    slacks.push_back(slack);
                }
            }
        }

        Vector r = grad_f;
        double complementarity = 0.0;
        if (!cols.empty()) {
            Matrix jac(n_, static_cast<Index>(cols.size()));
            for (std::size_t i = 0; i < cols.size(); ++i) jac.col(static_cast<Index>(i)) = cols[i];
            Matrix lhs = jac;
            Vector rhs = -grad_f;
            if (p_.eq_matrix.rows() > 0) {
                // Equality multipliers are free: fit in the complement of range(A^T).
                const Matrix& a = p_.eq_matrix;
                const Matrix proj = Matrix::Identity(n_, n_) - a.transpose() * (a * a.transpose()).ldlt().solve(a);
                lhs = proj * jac;
                rhs = proj * rhs;
            }
            const Vector mu = nnls(lhs, rhs);
            for (Index i = 0; i < mu.size(); ++i) {
                complementarity = std::max(complementarity, mu[i] * slacks[static_cast<std::size_t>(i)]);
            }
            r += jac * mu;
        }
        if (p_.eq_matrix.rows() > 0) {
            const Matrix& a = p_.eq_matrix;
            r -= a.transpose() * (a * a.transpose()).ldlt().solve(a * r);
        }
        return std::max({r.lpNorm<Eigen::Infinity>() / scale, complementarity, infeas});
    }

private:
    /// hess += weight * (central-difference Hessian of f on its curved block).
    void add_curvature(const SmoothFunction& f, const Vector& x, double weight, Matrix& hess) const {
        if (f.curved.empty()) return;
        const std::size_t k = f.curved.size();
        Matrix block(static_cast<Index>(k), static_cast<Index>(k));
        Vector xp = x;
        Vector gp(n_), gm(n_);
        const double base = std::cbrt(std::numeric_limits<double>::epsilon());
        for (std::size_t cj = 0; cj < k; ++cj) {
            const Index j = f.curved[cj];
            const double dist = std::min(x[j] - p_.lower[j], p_.upper[j] - x[j]);
            const double h = base * std::max(std::abs(x[j]), std::min(1.0, dist));
            xp[j] = x[j] + h;
            gp.setZero();
            f.eval(xp, gp);
            xp[j] = x[j] - h;
            gm.setZero();
            f.eval(xp, gm);
            xp[j] = x[j];
            for (std::size_t ci = 0; ci < k; ++ci) {
                const Index i = f.curved[ci];
                block(static_cast<Index>(ci), static_cast<Index>(cj)) = (gp[i] - gm[i]) / (2.0 * h);
            }
        }
        for (std::size_t ci = 0; ci < k; ++ci) {
            for (std::size_t cj = 0; cj < k; ++cj) {
                const double sym = 0.5 * (block(static_cast<Index>(ci), static_cast<Index>(cj)) +
                                          block(static_cast<Index>(cj), static_cast<Index>(ci)));
                hess(f.curved[ci], f.curved[cj]) += weight * sym;
            }
        }
    }

    const ConvexProgram& p_;
    Index n_;
    Index n_bounds_ = 0;
};

/// Solves hess * dx = -grad, regularizing the diagonal if the Cholesky factor fails.
inline bool regularized_solve(const Matrix& hess, const Vector& grad, Vector& dx) {
    Matrix h = hess;
    const double diag_scale = std::max(1.0, h.diagonal().cwiseAbs().maxCoeff());
    for (int attempt = 0; attempt < 8; ++attempt) {
        Eigen::LLT<Matrix> llt(h);
        if (llt.info() == Eigen::Success) {
            dx = llt.solve(-grad);
            if (dx.allFinite()) return true;
        }
        const double reg = diag_scale * std::pow(10.0, -14.0 + 2.0 * attempt);
        h = hess;
        h.diagonal().array() += reg;
    }
    return false;
}

/// Newton direction for the (possibly equality-constrained) barrier problem.
/// Equalities are eliminated through an orthonormal null-space basis of eq;
/// a joint KKT factorization loses the equality rows once barrier curvature
/// grows many orders beyond their unit scale.
inline bool newton_direction(const Matrix& hess, const Vector& grad, const Matrix& eq, Vector& dx) {
    if (eq.rows() == 0) return regularized_solve(hess, grad, dx);
    const Index n = hess.rows();
    const Index m = eq.rows();
    if (m >= n) {
        dx = Vector::Zero(n);
        return true;
    }
    const Eigen::HouseholderQR<Matrix> qr(eq.transpose());
    const Matrix q = qr.householderQ() * Matrix::Identity(n, n);
    const Matrix z = q.rightCols(n - m);
    Vector dz;
    if (!regularized_solve(z.transpose() * hess * z, z.transpose() * grad, dz)) return false;
    dx = z * dz;
    return dx.allFinite();
}

struct EngineResult {
    Vector x;
    double t = 1.0;
    int newton_steps = 0;
    bool converged = false;   // reached the gap tolerance
    bool stopped = false;     // stop predicate fired
    bool numeric_failure = false;
    std::vector<double> stage_objectives;
};

/// Barrier path-following from a strictly feasible x0. stop(x) is checked
/// after every Newton step and ends the run early when it returns true.
template <class Stop>
EngineResult path_follow(const ConvexProgram& p, Vector x0, const Tolerances& tol, Stop&& stop) {
    Barrier barrier(p);
    EngineResult out;
    out.x = std::move(x0);
    const double m = static_cast<double>(std::max<Index>(1, barrier.barrier_terms()));
    double t = tol.t0;
    Vector grad, dx, gtmp(p.n_vars);
    Matrix hess;
    while (true) {
        for (int it = 0; it < tol.max_newton_per_stage; ++it) {
            if (out.newton_steps >= tol.max_newton_total) {
                out.t = t;
                return out;
            }
            if (!barrier.derivatives(out.x, t, grad, hess) || !newton_direction(hess, grad, p.eq_matrix, dx)) {
                out.numeric_failure = true;
                out.t = t;
                return out;
            }
            const double slope = grad.dot(dx);
            const double lambda_sq = -slope;
            if (lambda_sq / 2.0 <= tol.newton || !(lambda_sq > 0.0)) break;

            // Largest step that keeps the box strictly interior.
            double step = 1.0;
            for (Index j = 0; j < p.n_vars; ++j) {
                if (dx[j] < 0.0 && std::isfinite(p.lower[j])) {
                    step = std::min(step, 0.99 * (out.x[j] - p.lower[j]) / -dx[j]);
                } else if (dx[j] > 0.0 && std::isfinite(p.upper[j])) {
                    step = std::min(step, 0.99 * (p.upper[j] - out.x[j]) / dx[j]);
                }
            }
            const double f0 = barrier.value(out.x, t);
            const double slack = 1e-13 * std::abs(f0);
            Vector trial;
            bool accepted = false;
            while (step > 1e-18) {
                trial = out.x + step * dx;
                const double f1 = barrier.value(trial, t);
                if (f1 <= f0 + 0.01 * step * slope + slack) {
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            ++out.newton_steps;
            if (!accepted) break;  // no further progress at this t
            out.x = std::move(trial);
            if (stop(out.x)) {
                out.stopped = true;
                out.t = t;
                return out;
            }
        }
        gtmp.setZero();
        out.stage_objectives.push_back(p.objective.eval(out.x, gtmp));
        if (m / t <= tol.gap) {
            out.converged = true;
            out.t = t;
            return out;
        }
        t *= tol.t_growth;
    }
}

inline Vector project_affine(const ConvexProgram& p, Vector x) {
    if (p.eq_matrix.rows() == 0) return x;
    const Matrix& a = p.eq_matrix;
    const Vector r = a * x - p.eq_rhs;
    return x - a.transpose() * (a * a.transpose()).ldlt().solve(r);
}

/// Moves each coordinate strictly inside the box by a small relative margin.
inline Vector push_into_box(const ConvexProgram& p, Vector x) {
    for (Index j = 0; j < p.n_vars; ++j) {
        const double lo = p.lower[j], hi = p.upper[j];
        const double width = hi - lo;
        const double margin = std::min(0.25 * width, 1e-6 * std::max(1e-3, std::abs(x[j])));
        if (!std::isfinite(x[j])) {
            x[j] = std::isfinite(lo) && std::isfinite(hi) ? 0.5 * (lo + hi) : (std::isfinite(lo) ? lo + 1.0 : (std::isfinite(hi) ? hi - 1.0 : 0.0));
        }
        if (x[j] <= lo + margin) x[j] = lo + margin;
        if (x[j] >= hi - margin) x[j] = hi - margin;
    }
    return x;
}

inline Vector box_midpoint(const ConvexProgram& p) {
    Vector x(p.n_vars);
    for (Index j = 0; j < p.n_vars; ++j) {
        const double lo = p.lower[j], hi = p.upper[j];
        if (std::isfinite(lo) && std::isfinite(hi)) x[j] = 0.5 * (lo + hi);
        else if (std::isfinite(lo)) x[j] = lo + 1.0;
        else if (std::isfinite(hi)) x[j] = hi - 1.0;
        else x[j] = 0.0;
    }
    return x;
}

inline double max_violation(const ConvexProgram& p, const Vector& x) {
    double worst = -kInf;
    Vector g(p.n_vars);
    for (const auto& c : p.inequalities) {
        g.setZero();
        const double v = c.eval(x, g);
        worst = std::max(worst, std::isfinite(v) ? v : kInf);
    }
    return worst;
}

}  // namespace detail

/// Strictly feasible point for p, or nullopt when phase 1 certifies that no
/// point satisfies every inequality with margin tol.phase1_margin. A supplied
/// x0 that already qualifies is returned unchanged.
inline std::optional<Vector> phase1_start(const ConvexProgram& p, const Vector* x0 = nullptr,
                                          const Tolerances& tol = {}) {
    p.validate();
    Vector x = x0 ? *x0 : detail::box_midpoint(p);
    if (x.size() != p.n_vars) throw std::invalid_argument("phase1_start: x0 dimension mismatch");
    const bool on_affine = p.eq_matrix.rows() == 0 || (p.eq_matrix * x - p.eq_rhs).lpNorm<Eigen::Infinity>() <= 1e-12;
    detail::Barrier plain(p);
    if (on_affine && plain.in_box(x) && detail::max_violation(p, x) < -tol.phase1_margin) return x;

    x = detail::push_into_box(p, detail::project_affine(p, x));
    if (!detail::Barrier(p).in_box(x)) x = detail::push_into_box(p, detail::box_midpoint(p));
    const double worst = detail::max_violation(p, x);
    if (worst == detail::kInf) return std::nullopt;
    if (worst < -tol.phase1_margin) return x;

    // minimize s  s.t.  g_i(x) <= s,  s >= -1
    const Index n = p.n_vars;
    ConvexProgram aux;
    aux.n_vars = n + 1;
    aux.objective.eval = [n](const Vector& z, Vector& g) {
        g[n] = 1.0;
        return z[n];
    };
    for (const auto& c : p.inequalities) {
        SmoothFunction shifted;
        shifted.name = c.name;
        shifted.curved = c.curved;
        shifted.eval = [&c, n](const Vector& z, Vector& g) {
            Vector gx = Vector::Zero(n);
            const double v = c.eval(z.head(n), gx);
            g.head(n) = gx;
            g[n] = -1.0;
            return v - z[n];
        };
        aux.inequalities.push_back(std::move(shifted));
    }
    aux.lower.resize(n + 1);
    aux.upper.resize(n + 1);
    aux.lower.head(n) = p.lower;
    aux.upper.head(n) = p.upper;
    aux.lower[n] = -1.0;
    aux.upper[n] = detail::kInf;
    if (p.eq_matrix.rows() > 0) {
        aux.eq_matrix = Matrix::Zero(p.eq_matrix.rows(), n + 1);
        aux.eq_matrix.leftCols(n) = p.eq_matrix;
        aux.eq_rhs = p.eq_rhs;
    }
    Vector z(n + 1);
    z.head(n) = x;
    z[n] = std::max(worst, 0.0) + 1.0;
    const double margin = tol.phase1_margin;
    auto result = detail::path_follow(aux, z, tol, [&](const Vector& zz) {
        return zz[n] < -margin && detail::max_violation(p, zz.head(n)) < -margin;
    });
    if (result.stopped) return Vector(result.x.head(n));
    return std::nullopt;
}

/// Minimizes p from x0. x0 need not be strictly feasible; a phase-1 search
/// runs when it is not.
inline SolveStatus solve(const ConvexProgram& p, const Vector& x0, const Tolerances& tol = {}) {
    p.validate();
    SolveStatus status;
    const auto start = phase1_start(p, &x0, tol);
    if (!start) {
        status.kind = SolveKind::infeasible;
        status.x = x0;
        status.message = "no strictly feasible point";
        // Name the constraint that is most violated at the supplied start.
        double worst = -detail::kInf;
        Vector g(p.n_vars);
        for (const auto& c : p.inequalities) {
            g.setZero();
            const double v = c.eval(x0, g);
            if (v > worst) {
                worst = v;
                status.message = "no strictly feasible point; most violated: " + c.name;
            }
        }
        return status;
    }
    auto run = detail::path_follow(p, *start, tol, [](const Vector&) { return false; });
    status.x = run.x;
    status.newton_steps = run.newton_steps;
    status.stage_objectives = std::move(run.stage_objectives);
    Vector g = Vector::Zero(p.n_vars);
    status.objective_value = p.objective.eval(status.x, g);
    if (run.numeric_failure || !status.x.allFinite() || !std::isfinite(status.objective_value)) {
        status.kind = SolveKind::numeric_failure;
        status.message = "non-finite values in Newton system";
        return status;
    }
    detail::Barrier barrier(p);
    status.kkt_residual = barrier.kkt_residual(status.x, run.t);
    const bool feasible = detail::max_violation(p, status.x) <= tol.feas;
    if (run.converged && feasible && status.kkt_residual <= tol.kkt) {
        status.kind = SolveKind::optimal;
    } else {
        status.kind = SolveKind::max_iter;
        status.message = run.converged ? "KKT tolerance not met" : "Newton budget exhausted";
    }
    return status;
}

}  // namespace semrelay::convex
