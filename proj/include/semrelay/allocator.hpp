#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "semrelay/channel.hpp"
#include "semrelay/convex_solver.hpp"
#include "semrelay/sca_bounds.hpp"
#include "semrelay/semantic_model.hpp"
#include "semrelay/system_config.hpp"

namespace semrelay {

/// Floor on bandwidth fractions inside the solver box.
inline constexpr double kAlphaMin = 1e-8;
/// Fractions at or below this are snapped to exactly zero in reported results.
inline constexpr double kAlphaSnap = 1e-6;
/// Feasibility tolerance on normalized constraint slacks.
inline constexpr double kTolFeas = 1e-6;
/// Tolerance used when accepting a subproblem iterate.
inline constexpr double kTolAccept = 1e-9;

struct Allocation {
    double alpha_br = 0.0;
    std::vector<double> alpha_ru;
    std::vector<double> p_r;  // W

    std::size_t n_users() const { return alpha_ru.size(); }
};

struct IterateState {
    Allocation allocation;
    std::vector<double> u_ru;   // bits/s
    double gamma_br_db = 0.0;
    double s = 0.0;             // similarity auxiliary
    double objective = 0.0;     // bits/s
};

struct SolveReport {
    IterateState final;             // last accepted iterate as the subproblems produced it
    Allocation allocation;          // reported allocation, after the alpha snap pass
    double objective = 0.0;         // weighted sum rate of `allocation`, bits/s
    std::vector<double> objective_trace;
    int iterations = 0;
    bool converged = false;
    bool feasible = true;
    double wallclock_s = 0.0;
    std::string status = "converged";
    double kkt_residual = std::numeric_limits<double>::quiet_NaN();  // single-program solves only
    // Relaxation gaps of the final iterate: max |u_n - R_n| over users that keep
    // bandwidth in `allocation`, relative to the weighted sum rate, and
    // |gamma_br - psi(alpha_br)| in dB.
    double tightness_gap = 0.0;
    double gamma_gap_db = 0.0;
};

/// Slacks of the original problem's constraints, normalized: rates by B,
/// powers by the relay budget. Non-negative means satisfied.
struct FeasibilityVerdict {
    double causality = 0.0;            // (R_br - sum R_ru) / B, R_br at the exact backhaul SNR
    double similarity = 0.0;           // similarity(gamma_br) - eps_bar
    double bandwidth = 0.0;            // 1 - alpha_br - sum alpha_ru
    double bandwidth_nonneg = 0.0;     // min fraction
    double power_budget = 0.0;         // 1 - sum P / budget
    double power_nonneg = 0.0;         // min P / budget
    double gamma_br_db = 0.0;          // exact backhaul SNR, +inf when alpha_br = 0

    double worst() const {
        return std::min({causality, similarity, bandwidth, bandwidth_nonneg, power_budget, power_nonneg});
    }
    bool feasible(double tol = kTolFeas) const { return worst() >= -tol; }
    std::string worst_name() const {
        const std::pair<double, const char*> items[] = {
            {causality, "causality"},       {similarity, "similarity"},     {bandwidth, "bandwidth"},
            {bandwidth_nonneg, "bandwidth_nonneg"}, {power_budget, "power_budget"}, {power_nonneg, "power_nonneg"}};
        return std::min_element(std::begin(items), std::end(items))->second;
    }
};

/// Raised when a subproblem cannot be solved. kind is the solver verdict.
class SubproblemError : public std::runtime_error {
public:
    SubproblemError(convex::SolveKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    convex::SolveKind kind() const { return kind_; }

private:
    convex::SolveKind kind_;
};

struct SubproblemResult {
    IterateState state;
    bool accepted = false;  // false: the solve did not improve on the input, which is returned
    convex::SolveKind solver_kind = convex::SolveKind::optimal;
    int newton_steps = 0;
};

struct BcdOptions {
    double tau = 1e-6;
    int max_iter = 100;
    bool bandwidth_first = false;
    int sca_rounds = 1;  // convex solves per block per outer iteration
    bool power_tie_break = true;  // run rebalance_power after each power block
    int extrapolation_doublings = 8;  // 0 disables detail::extrapolate between iterations
    convex::Tolerances solver{};
};

inline double sum_user_rate(const Allocation& a, const SystemConfig& cfg, const ChannelState& ch) {
    double r = 0.0;
    for (std::size_t n = 0; n < a.n_users(); ++n) r += user_bit_rate(a.alpha_ru[n], a.p_r[n], ch.h_ru_sq[n], cfg);
    return r;
}

/// Weighted sum of user bit rates, bits/s.
inline double evaluate_objective(const Allocation& a, const SystemConfig& cfg, const ChannelState& ch) {
    double r = 0.0;
    for (std::size_t n = 0; n < a.n_users(); ++n) {
        r += cfg.weights[n] * user_bit_rate(a.alpha_ru[n], a.p_r[n], ch.h_ru_sq[n], cfg);
    }
    return r;
}

/// Backhaul SNR in dB, +inf when no bandwidth is assigned (limit alpha_br -> 0+).
inline double backhaul_snr_db(double alpha_br, const SystemConfig& cfg, const ChannelState& ch) {
    if (alpha_br <= 0.0) return std::numeric_limits<double>::infinity();
    return snr_br_db(alpha_br, cfg, ch);
}

namespace detail {

/// Shared slack computation; backhaul_bps is the rate the relay receives and
/// similarity_slack is +inf for schemes without a similarity requirement.
inline FeasibilityVerdict feasibility_with_backhaul(const Allocation& a, const SystemConfig& cfg,
                                                    const ChannelState& ch, double backhaul_bps,
                                                    double similarity_slack) {
    FeasibilityVerdict v;
    const double b = cfg.bandwidth_hz;
    v.gamma_br_db = backhaul_snr_db(a.alpha_br, cfg, ch);
    v.causality = (backhaul_bps - sum_user_rate(a, cfg, ch)) / b;
    v.similarity = similarity_slack;
    double alpha_sum = a.alpha_br, alpha_min = a.alpha_br;
    for (double x : a.alpha_ru) {
        alpha_sum += x;
        alpha_min = std::min(alpha_min, x);
    }
    v.bandwidth = 1.0 - alpha_sum;
    v.bandwidth_nonneg = alpha_min;
    const double budget = cfg.relay_budget_w > 0.0 ? cfg.relay_budget_w : 1.0;
    double p_sum = 0.0, p_min = std::numeric_limits<double>::infinity();
    for (double p : a.p_r) {
        p_sum += p;
        p_min = std::min(p_min, p);
    }
    v.power_budget = (cfg.relay_budget_w - p_sum) / budget;
    v.power_nonneg = a.p_r.empty() ? 0.0 : p_min / budget;
    return v;
}

}  // namespace detail

/// Per-constraint slacks of the semantic-relay problem at an allocation, with
/// the backhaul SNR and similarity evaluated exactly (no surrogates).
inline FeasibilityVerdict check_feasibility(const Allocation& a, const SystemConfig& cfg, const ChannelState& ch,
                                            const SemanticModel& m) {
    const double gamma = backhaul_snr_db(a.alpha_br, cfg, ch);
    const double backhaul = bit_equivalent_rate(a.alpha_br, cfg.bandwidth_hz, gamma, m);
    return detail::feasibility_with_backhaul(a, cfg, ch, backhaul, similarity(gamma, m) - m.eps_bar);
}

/// Iterate with every relaxed quantity made tight: gamma from the exact SNR,
/// S = similarity(gamma), u = the users' exact rates.
inline IterateState tight_state(const Allocation& a, const SystemConfig& cfg, const ChannelState& ch,
                                const SemanticModel& m) {
    IterateState st;
    st.allocation = a;
    st.gamma_br_db = backhaul_snr_db(a.alpha_br, cfg, ch);
    st.s = similarity(st.gamma_br_db, m);
    st.u_ru.resize(a.n_users());
    for (std::size_t n = 0; n < a.n_users(); ++n) {
        st.u_ru[n] = user_bit_rate(a.alpha_ru[n], a.p_r[n], ch.h_ru_sq[n], cfg);
    }
    st.objective = evaluate_objective(a, cfg, ch);
    return st;
}

/// Shrinks every user's bandwidth fraction by a common factor until the users'
/// sum rate is at most target_bps. No-op if it already is.
inline void scale_user_bandwidth_to(Allocation& a, double target_bps, const SystemConfig& cfg,
                                    const ChannelState& ch) {
    if (sum_user_rate(a, cfg, ch) <= target_bps) return;
    const std::vector<double> full = a.alpha_ru;
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        for (std::size_t k = 0; k < full.size(); ++k) a.alpha_ru[k] = mid * full[k];
        (sum_user_rate(a, cfg, ch) > target_bps ? hi : lo) = mid;
    }
    for (std::size_t k = 0; k < full.size(); ++k) a.alpha_ru[k] = lo * full[k];
}

/// Initial point: backhaul sized for gamma_bar + 3 dB (clamped to
/// (kAlphaMin, 0.5]), the rest split evenly among users and the relay budget
/// split evenly. If the users would then outrun the backhaul, their bandwidth
/// fractions are scaled down uniformly (the freed bandwidth stays unassigned)
/// until the sum rate is within 0.1% below the backhaul rate.
inline Allocation default_init(const SystemConfig& cfg, const ChannelState& ch, const SemanticModel& m) {
    const std::size_t n = cfg.n_users();
    Allocation a;
    const double target_db = min_snr_threshold(m) + 3.0;
    const double alpha = ch.h_br_sq * cfg.bs_power_w /
                         (cfg.bandwidth_hz * cfg.noise_psd_w_hz * db_to_linear(target_db));
    a.alpha_br = std::clamp(alpha, 2.0 * kAlphaMin, 0.5);
    a.alpha_ru.assign(n, (1.0 - a.alpha_br) / static_cast<double>(n));
    a.p_r.assign(n, cfg.relay_budget_w / static_cast<double>(n));

    const double backhaul = bit_equivalent_rate(a.alpha_br, cfg.bandwidth_hz, snr_br_db(a.alpha_br, cfg, ch), m);
    scale_user_bandwidth_to(a, (1.0 - 1e-3) * backhaul, cfg, ch);
    return a;
}

namespace detail {

inline bool accept_candidate(const IterateState& candidate, const IterateState& current, const SystemConfig& cfg,
                             const ChannelState& ch, const SemanticModel& m) {
    if (!std::isfinite(candidate.objective)) return false;
    if (!check_feasibility(candidate.allocation, cfg, ch, m).feasible(kTolAccept)) return false;
    return candidate.objective >= current.objective;
}

inline void throw_on_failure(const convex::SolveStatus& s, const char* which) {
    if (s.kind == convex::SolveKind::infeasible || s.kind == convex::SolveKind::numeric_failure) {
        throw SubproblemError(s.kind, std::string(which) + ": " + convex::to_string(s.kind) + " (" + s.message + ")");
    }
}

}  // namespace detail

/// Convexified power block. Bandwidths are held fixed; the backhaul rate is
/// replaced by its tangent lower bound around state.gamma_br_db and each user
/// rate in the causality sum by its tangent upper bound around the current
/// power. The slacks u are eliminated: the aggregated constraint
/// sum_n phi_n(P_n) <= R_br_lb is equivalent. The backhaul SNR variable sits
/// at its upper limit snr_br_db(alpha_br), which maximizes R_br_lb.
inline SubproblemResult solve_power_subproblem(const IterateState& state, const SystemConfig& cfg,
                                               const ChannelState& ch, const SemanticModel& m,
                                               const convex::Tolerances& tol = {}) {
    using convex::Index;
    using convex::Vector;
    SubproblemResult out{state, false, convex::SolveKind::optimal, 0};
    const Allocation& a = state.allocation;
    const double budget = cfg.relay_budget_w;
    if (a.alpha_br <= 0.0 || budget <= 0.0) return out;

    std::vector<std::size_t> active;
    for (std::size_t n = 0; n < a.n_users(); ++n) {
        if (a.alpha_ru[n] > 0.0) active.push_back(n);
    }
    if (active.empty()) return out;

    const double b = cfg.bandwidth_hz;
    const double gamma = snr_br_db(a.alpha_br, cfg, ch);
    const double rbr_lb = rbr_lower_bound(state.gamma_br_db, a.alpha_br, cfg, m)(m.logistic_exponent(gamma));

    const auto k = static_cast<Index>(active.size());
    std::vector<double> q(active.size()), alpha(active.size()), w(active.size()), e3(active.size()),
        e4(active.size()), p_tilde(active.size());
    double causal_const = -rbr_lb / b;
    for (std::size_t i = 0; i < active.size(); ++i) {
        const std::size_t n = active[i];
        alpha[i] = a.alpha_ru[n];
        q[i] = ch.h_ru_sq[n] * budget / (b * cfg.noise_psd_w_hz);
        w[i] = cfg.weights[n];
        p_tilde[i] = a.p_r[n] / budget;
        const auto phi = phi_upper_bound(a.p_r[n], a.alpha_ru[n], ch.h_ru_sq[n], cfg);
        e3[i] = phi.constant / b;
        e4[i] = phi.slope[0] * budget / b;
        causal_const += e3[i] - e4[i] * p_tilde[i];
    }

    convex::ConvexProgram p;
    p.n_vars = k;
    p.objective.name = "weighted_rate";
    p.objective.curved = convex::all_coordinates(k);
    p.objective.eval = [&](const Vector& x, Vector& g) {
        double f = 0.0;
        for (Index i = 0; i < k; ++i) {
            const auto s = static_cast<std::size_t>(i);
            const double snr = q[s] * x[i] / alpha[s];
            f -= w[s] * alpha[s] * std::log1p(snr) / std::numbers::ln2;
            g[i] = -w[s] * alpha[s] * q[s] / ((alpha[s] + q[s] * x[i]) * std::numbers::ln2);
        }
        return f;
    };
    p.inequalities.push_back({[&](const Vector& x, Vector& g) {
                                  double v = causal_const;
                                  for (Index i = 0; i < k; ++i) {
                                      v += e4[static_cast<std::size_t>(i)] * x[i];
                                      g[i] = e4[static_cast<std::size_t>(i)];
                                  }
                                  return v;
                              },
                              {},
                              "causality"});
    p.inequalities.push_back({[k](const Vector& x, Vector& g) {
                                  g.setOnes();
                                  return x.sum() - 1.0;
                              },
                              {},
                              "power_budget"});
    p.lower = Vector::Zero(k);
    p.upper = Vector::Ones(k);

    Vector x0(k);
    for (Index i = 0; i < k; ++i) x0[i] = p_tilde[static_cast<std::size_t>(i)];
    const auto sol = convex::solve(p, x0, tol);
    out.solver_kind = sol.kind;
    out.newton_steps = sol.newton_steps;
    detail::throw_on_failure(sol, "power subproblem");

    IterateState cand = state;
    Allocation& ca = cand.allocation;
    std::fill(ca.p_r.begin(), ca.p_r.end(), 0.0);
    std::fill(cand.u_ru.begin(), cand.u_ru.end(), 0.0);
    cand.u_ru.resize(a.n_users(), 0.0);
    for (std::size_t i = 0; i < active.size(); ++i) {
        const double xi = sol.x[static_cast<Index>(i)];
        ca.p_r[active[i]] = xi * budget;
        cand.u_ru[active[i]] = (e3[i] + e4[i] * (xi - p_tilde[i])) * b;
    }
    cand.gamma_br_db = gamma;
    cand.s = similarity(gamma, m);
    cand.objective = evaluate_objective(ca, cfg, ch);
    if (detail::accept_candidate(cand, state, cfg, ch, m)) {
        out.state = std::move(cand);
        out.accepted = true;
    }
    return out;
}

/// Tie-break for the power block: with bandwidths fixed, finds the least
/// total relay power that still reaches the current weighted sum rate. With
/// equal weights and binding causality every point of sum R = R_br is
/// optimal for the power block; this picks the power-efficient one, which
/// leaves budget for the next block to use. Returned state has the same or a
/// higher objective.
inline SubproblemResult rebalance_power(const IterateState& state, const SystemConfig& cfg, const ChannelState& ch,
                                        const SemanticModel& m, const convex::Tolerances& tol = {}) {
    using convex::Index;
    using convex::Vector;
    SubproblemResult out{state, false, convex::SolveKind::optimal, 0};
    const Allocation& a = state.allocation;
    const double budget = cfg.relay_budget_w;
    if (a.alpha_br <= 0.0 || budget <= 0.0 || !(state.objective > 0.0)) return out;

    std::vector<std::size_t> active;
    for (std::size_t n = 0; n < a.n_users(); ++n) {
        if (a.alpha_ru[n] > 0.0 && cfg.weights[n] > 0.0) active.push_back(n);
    }
    if (active.empty()) return out;

    const double b = cfg.bandwidth_hz;
    const auto k = static_cast<Index>(active.size());
    std::vector<double> q(active.size()), alpha(active.size()), w(active.size());
    for (std::size_t i = 0; i < active.size(); ++i) {
        const std::size_t n = active[i];
        alpha[i] = a.alpha_ru[n];
        q[i] = ch.h_ru_sq[n] * budget / (b * cfg.noise_psd_w_hz);
        w[i] = cfg.weights[n];
    }
    // Rate floor excludes users outside the active set (they carry no rate).
    const double target = state.objective / b;

    convex::ConvexProgram p;
    p.n_vars = k;
    p.objective.name = "total_power";
    p.objective.eval = [k](const Vector& x, Vector& g) {
        g.setOnes();
        (void)k;
        return x.sum();
    };
    p.inequalities.push_back({[&](const Vector& x, Vector& g) {
                                  double v = target;
                                  for (Index i = 0; i < k; ++i) {
                                      const auto s = static_cast<std::size_t>(i);
                                      v -= w[s] * alpha[s] * std::log1p(q[s] * x[i] / alpha[s]) / std::numbers::ln2;
                                      g[i] = -w[s] * alpha[s] * q[s] / ((alpha[s] + q[s] * x[i]) * std::numbers::ln2);
                                  }
                                  return v;
                              },
                              convex::all_coordinates(k),
                              "rate_floor"});
    p.inequalities.push_back({[](const Vector& x, Vector& g) {
                                  g.setOnes();
                                  return x.sum() - 1.0;
                              },
                              {},
                              "power_budget"});
    p.lower = Vector::Zero(k);
    p.upper = Vector::Ones(k);

    Vector x0(k);
    for (Index i = 0; i < k; ++i) x0[i] = a.p_r[active[static_cast<std::size_t>(i)]] / budget;
    const auto sol = convex::solve(p, x0, tol);
    out.solver_kind = sol.kind;
    out.newton_steps = sol.newton_steps;
    // No strictly feasible point means the current powers are already the
    // only way to reach this rate.
    if (sol.kind == convex::SolveKind::infeasible) return out;
    detail::throw_on_failure(sol, "power rebalance");

    Allocation ca = a;
    for (std::size_t i = 0; i < active.size(); ++i) ca.p_r[active[i]] = sol.x[static_cast<Index>(i)] * budget;
    IterateState cand = tight_state(ca, cfg, ch, m);
    if (detail::accept_candidate(cand, state, cfg, ch, m)) {
        out.state = std::move(cand);
        out.accepted = true;
    }
    return out;
}

/// Convexified bandwidth block over (alpha_br, alpha_ru, gamma, S) with powers
/// held fixed. Causality uses the difference-of-squares split of alpha_br * S
/// with the square (alpha_br + S)^2 linearized, the SNR cap is the tangent of
/// the convex snr_br_db, and S is capped by the tangent of the similarity in
/// t = exp(-(c1 gamma + c2)). The slacks u are eliminated as in the power block.
inline SubproblemResult solve_bandwidth_subproblem(const IterateState& state, const SystemConfig& cfg,
                                                   const ChannelState& ch, const SemanticModel& m,
                                                   const convex::Tolerances& tol = {}) {
    using convex::Index;
    using convex::Vector;
    SubproblemResult out{state, false, convex::SolveKind::optimal, 0};
    const Allocation& a = state.allocation;
    const std::size_t n_users = a.n_users();
    const auto nu = static_cast<Index>(n_users);
    const Index i_gamma = nu + 1, i_s = nu + 2, n = nu + 3;
    const double b = cfg.bandwidth_hz;
    const double gamma_bar = min_snr_threshold(m);

    const double alpha_br_t = std::max(a.alpha_br, kAlphaMin * 2.0);
    const double s_t = state.s;
    const double gamma_t = std::isfinite(state.gamma_br_db) ? state.gamma_br_db : snr_br_db(alpha_br_t, cfg, ch);
    const auto psi = psi_lower_bound(alpha_br_t, cfg, ch);
    const auto sub = s_upper_bound(gamma_t, m);
    const auto delta = delta_lower_bound(alpha_br_t, s_t);
    const double e9 = psi.constant, e10 = -psi.slope[0];
    const double e5 = sub.constant, e6 = -sub.slope[0], t_t = sub.expansion_point[0];
    const double rate_scale = m.bits_per_word / (4.0 * m.symbols_per_word);

    std::vector<double> c(n_users), w(n_users), e7(n_users), e8(n_users), alpha_t(n_users);
    double causal_const = 0.0;
    for (std::size_t k = 0; k < n_users; ++k) {
        alpha_t[k] = std::max(a.alpha_ru[k], kAlphaMin * 2.0);
        c[k] = ch.h_ru_sq[k] * a.p_r[k] / (b * cfg.noise_psd_w_hz);
        w[k] = cfg.weights[k];
        if (a.p_r[k] > 0.0) {
            const auto r = rru_alpha_upper_bound(alpha_t[k], a.p_r[k], ch.h_ru_sq[k], cfg);
            e7[k] = r.constant / b;
            e8[k] = r.slope[0] / b;
        }
        causal_const += e7[k] - e8[k] * alpha_t[k];
    }

    convex::ConvexProgram p;
    p.n_vars = n;
    p.objective.name = "weighted_rate";
    for (std::size_t k = 0; k < n_users; ++k) {
        if (c[k] > 0.0) p.objective.curved.push_back(static_cast<Index>(k) + 1);
    }
    p.objective.eval = [&](const Vector& x, Vector& g) {
        double f = 0.0;
        for (std::size_t k = 0; k < n_users; ++k) {
            if (c[k] <= 0.0) continue;
            const Index i = static_cast<Index>(k) + 1;
            const double ratio = c[k] / x[i];
            const double l = std::log1p(ratio) / std::numbers::ln2;
            f -= w[k] * x[i] * l;
            g[i] = -w[k] * (l - c[k] / ((x[i] + c[k]) * std::numbers::ln2));
        }
        return f;
    };
    // sum_n u_n <= (B mu / 4K) (delta_lb(alpha_br, S) - (alpha_br - S)^2), normalized by B
    p.inequalities.push_back({[&](const Vector& x, Vector& g) {
                                  double v = causal_const;
                                  for (std::size_t k = 0; k < n_users; ++k) {
                                      const Index i = static_cast<Index>(k) + 1;
                                      v += e8[k] * x[i];
                                      g[i] = e8[k];
                                  }
                                  const double ab = x[0], s = x[i_s];
                                  const double diff = ab - s;
                                  const double pt[2] = {ab, s};
                                  v -= rate_scale * (delta(pt) - diff * diff);
                                  g[0] = -rate_scale * (delta.slope[0] - 2.0 * diff);
                                  g[i_s] = -rate_scale * (delta.slope[1] + 2.0 * diff);
                                  return v;
                              },
                              {0, i_s},
                              "causality"});
    // gamma <= E9 - E10 (alpha_br - alpha~)
    p.inequalities.push_back({[&](const Vector& x, Vector& g) {
                                  g[i_gamma] = 1.0;
                                  g[0] = e10;
                                  return x[i_gamma] - e9 + e10 * (x[0] - alpha_br_t);
                              },
                              {},
                              "snr_cap"});
    p.inequalities.push_back({[&](const Vector& x, Vector& g) {
                                  for (Index i = 0; i <= nu; ++i) g[i] = 1.0;
                                  return x.head(nu + 1).sum() - 1.0;
                              },
                              {},
                              "bandwidth"});
    // S <= E5 - E6 (t(gamma) - t~)
    p.inequalities.push_back({[&](const Vector& x, Vector& g) {
                                  const double t = m.logistic_exponent(x[i_gamma]);
                                  g[i_s] = 1.0;
                                  g[i_gamma] = -e6 * m.c1 * t;
                                  return x[i_s] - e5 + e6 * (t - t_t);
                              },
                              {i_gamma},
                              "similarity_cap"});
    p.lower = Vector::Constant(n, kAlphaMin);
    p.upper = Vector::Ones(n);
    p.lower[i_gamma] = gamma_bar;
    p.upper[i_gamma] = std::numeric_limits<double>::infinity();
    p.lower[i_s] = 0.0;
    p.upper[i_s] = 1.0;

    Vector x0(n);
    x0[0] = alpha_br_t;
    for (std::size_t k = 0; k < n_users; ++k) x0[static_cast<Index>(k) + 1] = alpha_t[k];
    x0[i_gamma] = std::max(gamma_t, gamma_bar);
    x0[i_s] = std::clamp(s_t, 0.0, 1.0);
    const auto sol = convex::solve(p, x0, tol);
    out.solver_kind = sol.kind;
    out.newton_steps = sol.newton_steps;
    detail::throw_on_failure(sol, "bandwidth subproblem");

    IterateState cand = state;
    Allocation& ca = cand.allocation;
    ca.alpha_br = sol.x[0];
    cand.u_ru.assign(n_users, 0.0);
    for (std::size_t k = 0; k < n_users; ++k) {
        const double xk = sol.x[static_cast<Index>(k) + 1];
        ca.alpha_ru[k] = xk;
        cand.u_ru[k] = (e7[k] + e8[k] * (xk - alpha_t[k])) * b;
    }
    cand.gamma_br_db = sol.x[i_gamma];
    cand.s = sol.x[i_s];
    cand.objective = evaluate_objective(ca, cfg, ch);
    if (detail::accept_candidate(cand, state, cfg, ch, m)) {
        out.state = std::move(cand);
        out.accepted = true;
    }
    return out;
}

namespace detail {

/// Snaps bandwidth fractions at or below kAlphaSnap to exactly zero unless the
/// snapped allocation fails `feasible`.
inline Allocation snap_small_fractions(const Allocation& a, const std::function<bool(const Allocation&)>& feasible) {
    Allocation snapped = a;
    bool changed = false;
    for (auto& x : snapped.alpha_ru) {
        if (x > 0.0 && x <= kAlphaSnap) {
            x = 0.0;
            changed = true;
        }
    }
    if (!changed || !feasible(snapped)) return a;
    return snapped;
}

template <class Step>
SubproblemResult run_block(const IterateState& st, int rounds, double tau, Step&& step) {
    SubproblemResult r = step(st);
    for (int i = 1; i < rounds; ++i) {
        const double before = r.state.objective;
        SubproblemResult next = step(r.state);
        const bool improved = next.state.objective > before * (1.0 + tau);
        r.state = std::move(next.state);
        r.accepted = r.accepted || next.accepted;
        r.newton_steps += next.newton_steps;
        if (!improved) break;
    }
    return r;
}

}  // namespace detail

namespace detail {

/// Safeguarded extrapolation along the last BCD displacement: tries
/// x + s (x - x_prev) for s = 1, 2, 4, ... (powers of users whose bandwidth
/// hits zero are dropped, user powers are shrunk uniformly if the users would
/// outrun the backhaul) and keeps the best exactly feasible improvement.
inline IterateState extrapolate(const Allocation& prev, const IterateState& cur, const SystemConfig& cfg,
                                const ChannelState& ch, const SemanticModel& m, int max_doublings) {
    const Allocation& a = cur.allocation;
    const std::size_t n = a.n_users();
    const double gamma_bar = min_snr_threshold(m);
    IterateState best = cur;
    double s = 1.0;
    for (int k = 0; k < max_doublings; ++k, s *= 2.0) {
        Allocation c = a;
        c.alpha_br = a.alpha_br + s * (a.alpha_br - prev.alpha_br);
        if (!(c.alpha_br > 0.0) || snr_br_db(c.alpha_br, cfg, ch) < gamma_bar) break;
        double used = c.alpha_br, power = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            c.alpha_ru[i] = std::max(0.0, a.alpha_ru[i] + s * (a.alpha_ru[i] - prev.alpha_ru[i]));
            c.p_r[i] = c.alpha_ru[i] > 0.0 ? std::max(0.0, a.p_r[i] + s * (a.p_r[i] - prev.p_r[i])) : 0.0;
            used += c.alpha_ru[i];
            power += c.p_r[i];
        }
        if (used > 1.0 || power > cfg.relay_budget_w) break;
        const double backhaul = bit_equivalent_rate(c.alpha_br, cfg.bandwidth_hz, snr_br_db(c.alpha_br, cfg, ch), m);
        if (sum_user_rate(c, cfg, ch) > backhaul) {
            const std::vector<double> full = c.p_r;
            const double target = backhaul * (1.0 - 1e-10);
            double lo = 0.0, hi = 1.0;
            for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
                const double mid = 0.5 * (lo + hi);
                for (std::size_t i = 0; i < n; ++i) c.p_r[i] = mid * full[i];
                (sum_user_rate(c, cfg, ch) > target ? hi : lo) = mid;
            }
            for (std::size_t i = 0; i < n; ++i) c.p_r[i] = lo * full[i];
        }
        IterateState cand = tight_state(c, cfg, ch, m);
        if (!(cand.objective > best.objective) || !accept_candidate(cand, best, cfg, ch, m)) break;
        best = std::move(cand);
    }
    return best;
}

}  // namespace detail

inline void finalize_report(SolveReport& rep, const SystemConfig& cfg, const ChannelState& ch,
                            const std::function<bool(const Allocation&)>& feasible) {
    rep.allocation = detail::snap_small_fractions(rep.final.allocation, feasible);
    rep.objective = evaluate_objective(rep.allocation, cfg, ch);
    rep.feasible = feasible(rep.allocation);
    const IterateState& f = rep.final;
    rep.tightness_gap = 0.0;
    for (std::size_t n = 0; n < f.u_ru.size() && n < rep.allocation.n_users(); ++n) {
        if (!(rep.allocation.alpha_ru[n] > 0.0)) continue;
        const double r = user_bit_rate(f.allocation.alpha_ru[n], f.allocation.p_r[n], ch.h_ru_sq[n], cfg);
        rep.tightness_gap = std::max(rep.tightness_gap, std::abs(f.u_ru[n] - r) / std::max(f.objective, 1.0));
    }
    rep.gamma_gap_db = f.allocation.alpha_br > 0.0 && std::isfinite(f.gamma_br_db)
                           ? std::abs(f.gamma_br_db - backhaul_snr_db(f.allocation.alpha_br, cfg, ch))
                           : 0.0;
}

/// Block coordinate descent over the power and bandwidth blocks. Stops when
/// the relative objective improvement of an outer iteration drops below tau.
inline SolveReport bcd_solve(const SystemConfig& cfg, const ChannelState& ch, const SemanticModel& m,
                             const Allocation& init, const BcdOptions& opt = {}) {
    const auto t_start = std::chrono::steady_clock::now();
    SolveReport rep;
    IterateState st = tight_state(init, cfg, ch, m);
    rep.objective_trace.push_back(st.objective);

    auto power = [&](const IterateState& s) { return solve_power_subproblem(s, cfg, ch, m, opt.solver); };
    auto bandwidth = [&](const IterateState& s) { return solve_bandwidth_subproblem(s, cfg, ch, m, opt.solver); };
    auto rebalance = [&](const IterateState& s) { return rebalance_power(s, cfg, ch, m, opt.solver); };
    auto guarded = [&](auto&& block, const IterateState& s) {
        try {
            return detail::run_block(s, opt.sca_rounds, opt.tau, block);
        } catch (const SubproblemError& e) {
            if (e.kind() == convex::SolveKind::numeric_failure) throw;
            return SubproblemResult{s, false, e.kind(), 0};
        }
    };

    rep.converged = false;
    for (int r = 1; r <= opt.max_iter; ++r) {
        const double prev = st.objective;
        auto power_step = [&](const IterateState& s) {
            IterateState next = guarded(power, s).state;
            if (opt.power_tie_break) next = guarded(rebalance, next).state;
            return next;
        };
        const Allocation before = st.allocation;
        if (opt.bandwidth_first) {
            st = guarded(bandwidth, st).state;
            st = power_step(st);
        } else {
            st = power_step(st);
            st = guarded(bandwidth, st).state;
        }
        if (opt.extrapolation_doublings > 0) {
            st = detail::extrapolate(before, st, cfg, ch, m, opt.extrapolation_doublings);
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
    rep.final = st;
    finalize_report(rep, cfg, ch, [&](const Allocation& a) { return check_feasibility(a, cfg, ch, m).feasible(); });
    rep.wallclock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return rep;
}

}  // namespace semrelay
