#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "semrelay/allocator.hpp"

namespace semrelay {

enum class BaselineKind { equal_bandwidth_power_opt, equal_power_bandwidth_opt, df_relay_joint };

/// How "equal system bandwidth" is split for the power-only baseline.
enum class EqualSplit {
    all_links,      // alpha_br = 1 / (N + 1), every user 1 / (N + 1)
    half_backhaul,  // alpha_br = 1 / 2, users share the other half equally
};

inline double equal_split_backhaul(EqualSplit split, std::size_t n_users) {
    return split == EqualSplit::all_links ? 1.0 / static_cast<double>(n_users + 1) : 0.5;
}

/// Bandwidth above which the fixed backhaul fraction can no longer reach the
/// similarity threshold: h_br P_b / (alpha_br N0 10^(gamma_bar / 10)).
inline double equal_bandwidth_threshold_hz(const SystemConfig& cfg, const ChannelState& ch, const SemanticModel& m,
                                           EqualSplit split) {
    const double alpha_br = equal_split_backhaul(split, cfg.n_users());
    return ch.h_br_sq * cfg.bs_power_w / (alpha_br * cfg.noise_psd_w_hz * db_to_linear(min_snr_threshold(m)));
}

namespace detail {

inline double elapsed_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Repeats one block until the relative improvement drops below tau.
template <class Step>
void iterate_block(SolveReport& rep, IterateState st, const BcdOptions& opt, Step&& step) {
    rep.objective_trace.push_back(st.objective);
    rep.converged = false;
    for (int r = 1; r <= opt.max_iter; ++r) {
        const double prev = st.objective;
        try {
            st = step(st).state;
        } catch (const SubproblemError& e) {
            if (e.kind() == convex::SolveKind::numeric_failure) throw;
        }
        rep.objective_trace.push_back(st.objective);
        rep.iterations = r;
        const double rel = prev > 0.0 ? (st.objective - prev) / prev : (st.objective > 0.0 ? 1.0 : 0.0);
        if (rel < opt.tau) {
            rep.converged = true;
            break;
        }
    }
    rep.status = rep.converged ? "converged" : "max_iter";
    rep.final = std::move(st);
}

}  // namespace detail

/// Power-only baseline: bandwidth split fixed by `split`, relay powers
/// optimized by repeated power-block solves. When the fixed backhaul cannot
/// reach the similarity threshold the scheme carries nothing: rate 0 and
/// status "infeasible".
inline SolveReport solve_equal_bandwidth(const SystemConfig& cfg, const ChannelState& ch, const SemanticModel& m,
                                         EqualSplit split = EqualSplit::half_backhaul, const BcdOptions& opt = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t n = cfg.n_users();
    SolveReport rep;
    Allocation a;
    a.alpha_br = equal_split_backhaul(split, n);
    a.alpha_ru.assign(n, (1.0 - a.alpha_br) / static_cast<double>(n));
    a.p_r.assign(n, 0.0);

    if (snr_br_db(a.alpha_br, cfg, ch) < min_snr_threshold(m)) {
        rep.final = tight_state(a, cfg, ch, m);
        rep.allocation = a;
        rep.objective = 0.0;
        rep.objective_trace = {0.0};
        rep.feasible = false;
        rep.converged = false;
        rep.status = "infeasible";
        rep.wallclock_s = detail::elapsed_since(t0);
        return rep;
    }

    a.p_r.assign(n, cfg.relay_budget_w / static_cast<double>(n));
    const double backhaul = bit_equivalent_rate(a.alpha_br, cfg.bandwidth_hz, snr_br_db(a.alpha_br, cfg, ch), m);
    const double target = (1.0 - 1e-3) * backhaul;
    if (sum_user_rate(a, cfg, ch) > target) {
        const std::vector<double> full = a.p_r;
        double lo = 0.0, hi = 1.0;
        for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
            const double mid = 0.5 * (lo + hi);
            for (std::size_t k = 0; k < n; ++k) a.p_r[k] = mid * full[k];
            (sum_user_rate(a, cfg, ch) > target ? hi : lo) = mid;
        }
        for (std::size_t k = 0; k < n; ++k) a.p_r[k] = lo * full[k];
    }
    detail::iterate_block(rep, tight_state(a, cfg, ch, m), opt, [&](const IterateState& s) {
        return solve_power_subproblem(s, cfg, ch, m, opt.solver);
    });
    finalize_report(rep, cfg, ch, [&](const Allocation& x) { return check_feasibility(x, cfg, ch, m).feasible(); });
    rep.wallclock_s = detail::elapsed_since(t0);
    return rep;
}

/// Bandwidth-only baseline: relay power split equally, bandwidths optimized by
/// repeated bandwidth-block solves from default_init.
inline SolveReport solve_equal_power(const SystemConfig& cfg, const ChannelState& ch, const SemanticModel& m,
                                     const BcdOptions& opt = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    SolveReport rep;
    Allocation a = default_init(cfg, ch, m);
    a.p_r.assign(cfg.n_users(), cfg.relay_budget_w / static_cast<double>(cfg.n_users()));
    detail::iterate_block(rep, tight_state(a, cfg, ch, m), opt, [&](const IterateState& s) {
        return solve_bandwidth_subproblem(s, cfg, ch, m, opt.solver);
    });
    finalize_report(rep, cfg, ch, [&](const Allocation& x) { return check_feasibility(x, cfg, ch, m).feasible(); });
    rep.wallclock_s = detail::elapsed_since(t0);
    return rep;
}

/// Shannon rate of the backhaul for a conventional decode-and-forward relay.
inline double df_backhaul_rate(double alpha_br, const SystemConfig& cfg, const ChannelState& ch) {
    if (alpha_br <= 0.0) return 0.0;
    const double w = alpha_br * cfg.bandwidth_hz;
    return w * std::log1p(ch.h_br_sq * cfg.bs_power_w / (w * cfg.noise_psd_w_hz)) / std::numbers::ln2;
}

/// Slacks for the decode-and-forward relay: causality against the Shannon
/// backhaul, no similarity requirement.
inline FeasibilityVerdict check_df_feasibility(const Allocation& a, const SystemConfig& cfg, const ChannelState& ch) {
    return detail::feasibility_with_backhaul(a, cfg, ch, df_backhaul_rate(a.alpha_br, cfg, ch),
                                             std::numeric_limits<double>::infinity());
}

/// Conventional decode-and-forward relay with joint power and bandwidth
/// allocation, solved as one convex program over
///   x = (alpha_br, alpha_1..N, P_1..N / budget, u_1..N / B):
///   maximize sum w_n u_n
///   s.t. u_n <= alpha_n log2(1 + q_n x_n / alpha_n)      (jointly concave)
///        sum u_n <= alpha_br log2(1 + c_br / alpha_br)
///        alpha_br + sum alpha_n <= 1,  sum x_n <= 1
/// Users whose link could carry more than they are forwarded get their power
/// trimmed afterwards so every reported rate is exactly what is delivered.
inline SolveReport solve_df_relay(const SystemConfig& cfg, const ChannelState& ch,
                                  const convex::Tolerances& tol = {}) {
    using convex::Index;
    using convex::Vector;
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t n_users = cfg.n_users();
    const auto nu = static_cast<Index>(n_users);
    const Index n = 3 * nu + 1;
    const double b = cfg.bandwidth_hz;
    const double budget = cfg.relay_budget_w;
    auto ia = [](std::size_t k) { return static_cast<Index>(k) + 1; };
    auto ip = [nu](std::size_t k) { return nu + 1 + static_cast<Index>(k); };
    auto iu = [nu](std::size_t k) { return 2 * nu + 1 + static_cast<Index>(k); };

    std::vector<double> q(n_users);
    for (std::size_t k = 0; k < n_users; ++k) q[k] = ch.h_ru_sq[k] * budget / (b * cfg.noise_psd_w_hz);
    const double c_br = ch.h_br_sq * cfg.bs_power_w / (b * cfg.noise_psd_w_hz);

    convex::ConvexProgram p;
    p.n_vars = n;
    p.objective.name = "weighted_rate";
    p.objective.eval = [&](const Vector& x, Vector& g) {
        double f = 0.0;
        for (std::size_t k = 0; k < n_users; ++k) {
            f -= cfg.weights[k] * x[iu(k)];
            g[iu(k)] = -cfg.weights[k];
        }
        return f;
    };
    for (std::size_t k = 0; k < n_users; ++k) {
        p.inequalities.push_back({[&, k](const Vector& x, Vector& g) {
                                      const double a = x[ia(k)], pw = x[ip(k)];
                                      const double snr = q[k] * pw / a;
                                      const double l = std::log1p(snr) / std::numbers::ln2;
                                      g[ia(k)] = -(l - q[k] * pw / ((a + q[k] * pw) * std::numbers::ln2));
                                      g[ip(k)] = -a * q[k] / ((a + q[k] * pw) * std::numbers::ln2);
                                      g[iu(k)] = 1.0;
                                      return x[iu(k)] - a * l;
                                  },
                                  {ia(k), ip(k)},
                                  "user_rate_" + std::to_string(k)});
    }
    p.inequalities.push_back({[&](const Vector& x, Vector& g) {
                                  double v = 0.0;
                                  for (std::size_t k = 0; k < n_users; ++k) {
                                      v += x[iu(k)];
                                      g[iu(k)] = 1.0;
                                  }
                                  const double a = x[0];
                                  const double l = std::log1p(c_br / a) / std::numbers::ln2;
                                  g[0] = -(l - c_br / ((a + c_br) * std::numbers::ln2));
                                  return v - a * l;
                              },
                              {0},
                              "causality"});
    p.inequalities.push_back({[nu](const Vector& x, Vector& g) {
                                  for (Index i = 0; i <= nu; ++i) g[i] = 1.0;
                                  return x.head(nu + 1).sum() - 1.0;
                              },
                              {},
                              "bandwidth"});
    p.inequalities.push_back({[nu](const Vector& x, Vector& g) {
                                  for (Index i = nu + 1; i <= 2 * nu; ++i) g[i] = 1.0;
                                  return x.segment(nu + 1, nu).sum() - 1.0;
                              },
                              {},
                              "power_budget"});
    p.lower = Vector::Zero(n);
    p.upper = Vector::Constant(n, std::numeric_limits<double>::infinity());
    for (Index i = 0; i <= nu; ++i) {
        p.lower[i] = kAlphaMin;
        p.upper[i] = 1.0;
    }
    for (Index i = nu + 1; i <= 2 * nu; ++i) p.upper[i] = 1.0;

    Vector x0(n);
    x0[0] = 0.5;
    for (std::size_t k = 0; k < n_users; ++k) {
        x0[ia(k)] = 0.45 / static_cast<double>(n_users);
        x0[ip(k)] = 0.9 / static_cast<double>(n_users);
        x0[iu(k)] = 1e-6;
    }

    SolveReport rep;
    const auto sol = convex::solve(p, x0, tol);
    if (sol.kind == convex::SolveKind::infeasible || sol.kind == convex::SolveKind::numeric_failure) {
        throw SubproblemError(sol.kind, std::string("df relay: ") + convex::to_string(sol.kind) + " (" + sol.message + ")");
    }
    Allocation a;
    a.alpha_br = sol.x[0];
    a.alpha_ru.resize(n_users);
    a.p_r.resize(n_users);
    std::vector<double> delivered(n_users);
    for (std::size_t k = 0; k < n_users; ++k) {
        a.alpha_ru[k] = sol.x[ia(k)];
        a.p_r[k] = sol.x[ip(k)] * budget;
        delivered[k] = std::max(0.0, sol.x[iu(k)] * b);
        // Trim power so the link carries exactly what the relay forwards.
        if (user_bit_rate(a.alpha_ru[k], a.p_r[k], ch.h_ru_sq[k], cfg) > delivered[k]) {
            double lo = 0.0, hi = a.p_r[k];
            for (int it = 0; it < 200 && hi - lo > 1e-18 * budget; ++it) {
                const double mid = 0.5 * (lo + hi);
                (user_bit_rate(a.alpha_ru[k], mid, ch.h_ru_sq[k], cfg) > delivered[k] ? hi : lo) = mid;
            }
            a.p_r[k] = lo;
        }
    }
    rep.final = IterateState{a, delivered, backhaul_snr_db(a.alpha_br, cfg, ch),
                             std::numeric_limits<double>::quiet_NaN(), evaluate_objective(a, cfg, ch)};
    rep.objective_trace = {rep.final.objective};
    rep.iterations = 1;
    rep.converged = sol.kind == convex::SolveKind::optimal;
    rep.status = rep.converged ? "converged" : convex::to_string(sol.kind);
    rep.kkt_residual = sol.kkt_residual;
    finalize_report(rep, cfg, ch, [&](const Allocation& x) { return check_df_feasibility(x, cfg, ch).feasible(); });
    rep.wallclock_s = detail::elapsed_since(t0);
    return rep;
}

}  // namespace semrelay
