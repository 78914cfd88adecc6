#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <thread>
#include <vector>

#include "semrelay/allocator.hpp"
#include "semrelay/baselines.hpp"

// Brute-force reference optimizer for instances with at most three users.

namespace semrelay {

enum class OracleScheme { semrelay, df };

namespace detail {

/// Number of non-negative integer vectors of length `parts` summing to at most `total`.
inline double simplex_points(long total, int parts) {
    // C(total + parts, parts)
    double c = 1.0;
    for (int k = 1; k <= parts; ++k) c = c * static_cast<double>(total + k) / k;
    return c;
}

}  // namespace detail

struct GridSpec {
    double alpha_step = 0.02;
    double power_step_w = 0.02;
    std::size_t n_users = 2;
    double power_budget_w = 1.0;
    /// Enumerate relay powers on the grid for every bandwidth point instead of
    /// water-filling. Audit mode.
    bool full_power_grid = false;
    /// Zoom passes after the coarse grid: each re-grids +-2 cells around the
    /// incumbent at a tenth of the step, recentring while the incumbent
    /// improves. Exact only when the optimal value is concave in the bandwidth
    /// fractions (the DF scheme).
    int refine_levels = 0;

    static constexpr double kMaxPoints = 1e8;

    GridSpec() = default;
    GridSpec(double alpha_step_, double power_step_w_, std::size_t n_users_, double power_budget_w_,
             bool full_power_grid_ = false, int refine_levels_ = 0)
        : alpha_step(alpha_step_),
          power_step_w(power_step_w_),
          n_users(n_users_),
          power_budget_w(power_budget_w_),
          full_power_grid(full_power_grid_),
          refine_levels(refine_levels_) {
        validate();
    }

    long alpha_cells() const { return std::lround(1.0 / alpha_step); }
    long power_cells() const { return static_cast<long>(std::floor(power_budget_w / power_step_w + 1e-9)); }

    /// Worst-case number of evaluated points of the coarse grid.
    double grid_size() const {
        const double bw = detail::simplex_points(alpha_cells(), static_cast<int>(n_users));
        const double pw = detail::simplex_points(power_cells(), static_cast<int>(n_users));
        return bw * pw;
    }

    void validate() const {
        if (!(alpha_step > 0.0 && alpha_step <= 1.0)) throw std::invalid_argument("GridSpec: alpha_step must be in (0, 1]");
        if (std::abs(alpha_cells() * alpha_step - 1.0) > 1e-9) {
            throw std::invalid_argument("GridSpec: alpha_step must divide 1");
        }
        if (!(power_step_w > 0.0)) throw std::invalid_argument("GridSpec: power_step_w must be positive");
        if (!(power_budget_w >= 0.0)) throw std::invalid_argument("GridSpec: power_budget_w must be non-negative");
        if (n_users < 1 || n_users > 3) throw std::invalid_argument("GridSpec: n_users must be 1, 2 or 3");
        if (refine_levels < 0) throw std::invalid_argument("GridSpec: refine_levels must be non-negative");
        if (grid_size() > kMaxPoints) throw std::invalid_argument("GridSpec: grid exceeds 1e8 points");
    }
};

struct OracleResult {
    Allocation allocation;
    double objective = 0.0;  // weighted sum rate, bits/s; 0 when nothing is feasible
    bool found = false;
    std::uint64_t evaluated = 0;
};

/// Weighted water-filling: maximizes sum_n w_n W_n log2(1 + g_n P_n / (W_n N0))
/// subject to sum P_n <= budget. Users with zero width get zero power.
inline std::vector<double> water_fill(const std::vector<double>& widths_hz, const std::vector<double>& gains,
                                      const std::vector<double>& weights, double budget_w, double n0) {
    const std::size_t n = widths_hz.size();
    std::vector<double> p(n, 0.0);
    if (!(budget_w > 0.0)) return p;
    auto alloc = [&](double lambda, std::vector<double>& out) {
        double total = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            out[k] = 0.0;
            if (widths_hz[k] <= 0.0 || weights[k] <= 0.0) continue;
            out[k] = std::max(0.0, weights[k] * widths_hz[k] / (lambda * std::numbers::ln2) -
                                       widths_hz[k] * n0 / gains[k]);
            total += out[k];
        }
        return total;
    };
    std::vector<double> tmp(n);
    // Bracket lambda in log space: total power is decreasing in lambda.
    double lo = -700.0, hi = 700.0;
    if (alloc(std::exp(lo), tmp) <= budget_w) return tmp;  // no active users
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (alloc(std::exp(mid), tmp) > budget_w ? lo : hi) = mid;
    }
    alloc(std::exp(hi), p);
    return p;
}

namespace detail {

inline bool all_equal(const std::vector<double>& w) {
    return std::all_of(w.begin(), w.end(), [&](double x) { return x == w.front(); });
}

struct OracleContext {
    const SystemConfig& cfg;
    const ChannelState& ch;
    const SemanticModel& m;
    const GridSpec& spec;
    OracleScheme scheme;
    bool equal_weights;

    static constexpr double kTol = 1e-12;

    double backhaul(double alpha_br) const {
        if (scheme == OracleScheme::df) return df_backhaul_rate(alpha_br, cfg, ch);
        const double gamma = snr_br_db(alpha_br, cfg, ch);
        if (similarity(gamma, m) < m.eps_bar) return -1.0;
        return bit_equivalent_rate(alpha_br, cfg.bandwidth_hz, gamma, m);
    }

    bool feasible(const Allocation& a) const {
        const auto v = scheme == OracleScheme::df ? check_df_feasibility(a, cfg, ch) : check_feasibility(a, cfg, ch, m);
        return v.feasible(kTol);
    }

    void consider(const Allocation& a, OracleResult& best) const {
        ++best.evaluated;
        const double obj = evaluate_objective(a, cfg, ch);
        if (obj > best.objective && feasible(a)) {
            best.objective = obj;
            best.allocation = a;
            best.found = true;
        }
    }

    /// Enumerates active users' powers on the grid.
    void power_grid(Allocation& a, OracleResult& best) const {
        const long cells = spec.power_cells();
        const std::size_t n = a.n_users();
        std::vector<long> k(n, 0);
        auto rec = [&](auto&& self, std::size_t idx, long left) -> void {
            if (idx == n) {
                for (std::size_t j = 0; j < n; ++j) a.p_r[j] = static_cast<double>(k[j]) * spec.power_step_w;
                consider(a, best);
                return;
            }
            const long top = a.alpha_ru[idx] > 0.0 ? left : 0;
            for (long v = 0; v <= top; ++v) {
                k[idx] = v;
                self(self, idx + 1, left - v);
            }
        };
        rec(rec, 0, cells);
    }

    /// Best power allocation at fixed bandwidths.
    void inner(Allocation& a, double backhaul_bps, OracleResult& best) const {
        if (spec.full_power_grid) {
            power_grid(a, best);
            return;
        }
        std::vector<double> widths(a.n_users());
        for (std::size_t k = 0; k < widths.size(); ++k) widths[k] = a.alpha_ru[k] * cfg.bandwidth_hz;
        const auto wf = water_fill(widths, ch.h_ru_sq, cfg.weights, cfg.relay_budget_w, cfg.noise_psd_w_hz);
        a.p_r = wf;
        if (sum_user_rate(a, cfg, ch) <= backhaul_bps) {
            consider(a, best);
            return;
        }
        if (!equal_weights) {
            power_grid(a, best);
            return;
        }
        // Equal weights: any powers with sum rate equal to the backhaul are
        // optimal; shrink the water-filling solution uniformly to get one.
        const double target = backhaul_bps * (1.0 - 1e-13);
        double lo = 0.0, hi = 1.0;
        for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
            const double mid = 0.5 * (lo + hi);
            for (std::size_t k = 0; k < wf.size(); ++k) a.p_r[k] = mid * wf[k];
            (sum_user_rate(a, cfg, ch) > target ? hi : lo) = mid;
        }
        for (std::size_t k = 0; k < wf.size(); ++k) a.p_r[k] = lo * wf[k];
        consider(a, best);
    }

    /// Largest backhaul fraction the scheme admits on its own: 1 for DF, the
    /// similarity limit for the semantic relay.
    double alpha_br_cap() const {
        if (scheme == OracleScheme::df || m.eps_bar <= m.a1) return 1.0;
        if (m.eps_bar >= m.saturation()) return 0.0;  // threshold unreachable at any SNR
        const double gbar = min_snr_threshold(m);
        double cap = std::min(1.0, ch.h_br_sq * cfg.bs_power_w /
                                       (cfg.bandwidth_hz * cfg.noise_psd_w_hz * db_to_linear(gbar)));
        while (cap > 0.0 && similarity(snr_br_db(cap, cfg, ch), m) < m.eps_bar) cap *= 1.0 - 1e-12;
        return cap;
    }

    /// Users' sum rate with water-filled full budget at the given bandwidths.
    double user_capacity(const Allocation& a) const {
        std::vector<double> widths(a.n_users());
        for (std::size_t k = 0; k < widths.size(); ++k) widths[k] = a.alpha_ru[k] * cfg.bandwidth_hz;
        Allocation tmp = a;
        tmp.p_r = water_fill(widths, ch.h_ru_sq, cfg.weights, cfg.relay_budget_w, cfg.noise_psd_w_hz);
        return sum_user_rate(tmp, cfg, ch);
    }

    /// Equal weights: the value along the ray alpha_ru -> kappa * alpha_ru
    /// (backhaul taking the rest) is min(backhaul, capacity), one side
    /// decreasing and one increasing in kappa. Bisects to the crossing.
    void ray_balance(const Allocation& grid_point, double used, double cap, OracleResult& best) const {
        const double k_lo = std::max(0.0, (1.0 - cap) / used);
        const double k_hi = 1.0 / used;
        Allocation a = grid_point;
        auto gap = [&](double kappa) {
            for (std::size_t k = 0; k < a.n_users(); ++k) a.alpha_ru[k] = kappa * grid_point.alpha_ru[k];
            a.alpha_br = std::min(1.0 - kappa * used, cap);
            return user_capacity(a) - backhaul(a.alpha_br);
        };
        double lo = k_lo, hi = k_hi;
        if (gap(lo) >= 0.0) {
            hi = lo;
        } else {
            for (int it = 0; it < 100 && hi - lo > 1e-15 * hi; ++it) {
                const double mid = 0.5 * (lo + hi);
                (gap(mid) >= 0.0 ? hi : lo) = mid;
            }
        }
        gap(hi);  // capacity side, so the backhaul binds
        if (!(a.alpha_br > 0.0)) return;
        const double backhaul_bps = backhaul(a.alpha_br);
        if (backhaul_bps < 0.0) return;
        inner(a, backhaul_bps, best);
    }

    /// Completes a user bandwidth vector. Both backhaul rates increase with
    /// alpha_br, so the backhaul takes everything the users leave, up to the cap.
    void complete(Allocation& a, double used, double cap, OracleResult& best) const {
        a.alpha_br = std::min(1.0 - used, cap);
        if (!(a.alpha_br > 0.0)) return;
        const double backhaul_bps = backhaul(a.alpha_br);
        if (backhaul_bps < 0.0) return;
        inner(a, backhaul_bps, best);
        if (equal_weights && !spec.full_power_grid && used > 0.0) ray_balance(a, used, cap, best);
    }

    /// Enumerates bandwidths of users idx.. on cells of `step` starting at
    /// origin (span + 1 values each), keeping the total below one.
    void users(Allocation& a, std::size_t idx, double used, double step, const std::vector<double>& origin, long span,
               double cap, OracleResult& best) const {
        if (idx == a.n_users()) {
            complete(a, used, cap, best);
            return;
        }
        for (long j = 0; j <= span; ++j) {
            const double x = origin[idx] + static_cast<double>(j) * step;
            if (x < -1e-15) continue;
            const double xc = std::max(0.0, x);
            if (used + xc >= 1.0 - 1e-12) break;
            a.alpha_ru[idx] = xc;
            users(a, idx + 1, used + xc, step, origin, span, cap, best);
        }
        a.alpha_ru[idx] = 0.0;
    }

    /// One shard unit: first user's bandwidth fixed at origin[0] + i * step.
    void slice(long i, double step, const std::vector<double>& origin, long span, double cap,
               OracleResult& best) const {
        const double x = origin[0] + static_cast<double>(i) * step;
        if (x < -1e-15) return;
        const double xc = std::max(0.0, x);
        if (xc >= 1.0 - 1e-12) return;
        Allocation a;
        a.alpha_ru.assign(cfg.n_users(), 0.0);
        a.p_r.assign(cfg.n_users(), 0.0);
        a.alpha_ru[0] = xc;
        users(a, 1, xc, step, origin, span, cap, best);
    }
};

/// Evaluates every index in [0, count) concurrently, each shard owning a
/// contiguous range; results are reduced in index order so the returned
/// maximizer does not depend on the thread count.
template <class Eval>
OracleResult sharded_max(long count, Eval&& eval) {
    const long hw = std::max(1u, std::thread::hardware_concurrency());
    const long shards = std::clamp<long>(hw, 1, std::max<long>(1, count));
    std::vector<OracleResult> parts(static_cast<std::size_t>(shards));
    std::vector<std::thread> pool;
    auto work = [&](long s) {
        const long begin = count * s / shards, end = count * (s + 1) / shards;
        for (long i = begin; i < end; ++i) eval(i, parts[static_cast<std::size_t>(s)]);
    };
    for (long s = 1; s < shards; ++s) pool.emplace_back(work, s);
    work(0);
    for (auto& t : pool) t.join();
    OracleResult out;
    for (const auto& r : parts) {
        out.evaluated += r.evaluated;
        if (r.found && (!out.found || r.objective > out.objective)) {
            const auto evaluated = out.evaluated;
            out = r;
            out.evaluated = evaluated;
        }
    }
    return out;
}

}  // namespace detail

/// Grid-search maximizer of the weighted sum rate under the exact problem
/// constraints (check_feasibility for the semantic relay, check_df_feasibility
/// for decode-and-forward). User bandwidths are enumerated on the grid; the
/// backhaul fraction is set to the largest admissible value and the powers are
/// water-filled (see GridSpec for the audit mode). With equal weights each grid
/// direction is also balanced exactly by ray_balance. Returns objective 0 and
/// found = false when no grid point is feasible.
inline OracleResult grid_search(const SystemConfig& cfg, const ChannelState& ch, const SemanticModel& m,
                                const GridSpec& spec, OracleScheme scheme) {
    spec.validate();
    cfg.validate();
    if (cfg.n_users() != spec.n_users) throw std::invalid_argument("grid_search: user count differs from GridSpec");
    if (std::abs(cfg.relay_budget_w - spec.power_budget_w) > 1e-12 * std::max(1.0, spec.power_budget_w)) {
        throw std::invalid_argument("grid_search: relay budget differs from GridSpec");
    }
    const std::size_t n = cfg.n_users();
    const detail::OracleContext ctx{cfg, ch, m, spec, scheme, detail::all_equal(cfg.weights)};

    const long cells = spec.alpha_cells();
    const double cap = ctx.alpha_br_cap();
    OracleResult best = detail::sharded_max(cells, [&](long i, OracleResult& acc) {
        ctx.slice(i, spec.alpha_step, std::vector<double>(n, 0.0), cells, cap, acc);
    });

    double cur = spec.alpha_step;
    for (int level = 0; level < spec.refine_levels && best.found; ++level) {
        const double fine = cur / 10.0;
        const long span = 40;  // +-2 cells of the previous step
        // Recentre until the incumbent stops improving, then refine.
        for (int move = 0; move < 1000; ++move) {
            std::vector<double> origin(n);
            for (std::size_t k = 0; k < n; ++k) origin[k] = best.allocation.alpha_ru[k] - 2.0 * cur;
            OracleResult zoom = detail::sharded_max(span + 1, [&](long i, OracleResult& acc) {
                ctx.slice(i, fine, origin, span, cap, acc);
            });
            const auto evaluated = best.evaluated + zoom.evaluated;
            const bool improved = zoom.found && zoom.objective > best.objective;
            if (improved) best = zoom;
            best.evaluated = evaluated;
            if (!improved) break;
        }
        cur = fine;
    }
    return best;
}

}  // namespace semrelay
