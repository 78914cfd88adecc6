#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "semrelay/allocator.hpp"
#include "semrelay/baselines.hpp"
#include "semrelay/oracle.hpp"
#include "semrelay/rng.hpp"
#include "semrelay/sca_bounds.hpp"

// Property suites shared by the `validate` subcommand and the acceptance
// binary. Targets are evaluated from the model functions directly, never
// through the bound code under test.

namespace semrelay::validation {

struct SuiteResult {
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

/// The bound constructors under test. Replaceable so a suite can be pointed at
/// a deliberately broken bound.
struct BoundSet {
    std::function<AffineBound(double, double, const SystemConfig&, const SemanticModel&)> rbr = rbr_lower_bound;
    std::function<AffineBound(double, double, double, const SystemConfig&)> phi = phi_upper_bound;
    std::function<AffineBound(double, double)> delta = delta_lower_bound;
    std::function<AffineBound(double, const SemanticModel&)> s = s_upper_bound;
    std::function<AffineBound(double, double, double, const SystemConfig&)> rru_alpha = rru_alpha_upper_bound;
    std::function<AffineBound(double, const SystemConfig&, const ChannelState&)> psi = psi_lower_bound;
};

struct Options {
    int bound_samples = 1000;
    int gradient_samples = 100;
    int bcd_instances = 50;
    int oracle_instances = 10;
    double tau = 1e-6;
    std::uint64_t seed = 7;
    BoundSet bounds{};
};

namespace detail {

inline double elapsed(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline std::string fmt(const char* f, double a, double b = 0.0) {
    char buf[160];
    std::snprintf(buf, sizeof buf, f, a, b);
    return buf;
}

/// One random instance for the bound and gradient suites: a user 1-40 m from
/// the relay, bandwidth 1-20 MHz, BS-relay gain at 60 m. Other draws cover
/// gamma in [-20, 40] dB, fractions in [1e-6, 1] and powers in [0, 10] W.
struct Sample {
    SystemConfig cfg;
    ChannelState ch;
    double h_ru = 0.0;
};

inline Sample random_sample(SplitMix64& rng) {
    Sample s;
    s.cfg = make_system(1, 1e6 + 19e6 * rng.uniform(), 1.0);
    s.ch.h_br_sq = path_loss(60.0, 1e-6, 3.5);
    s.h_ru = path_loss(1.0 + 39.0 * rng.uniform(), 1e-6, 3.5);
    s.ch.h_ru_sq = {s.h_ru};
    return s;
}

inline double log_uniform(SplitMix64& rng, double lo, double hi) {
    return lo * std::pow(hi / lo, rng.uniform());
}

/// Checks tangency at the expansion point and domination at a second random
/// point for one bound. `draw` returns {bound at x~, target at x~, bound at
/// x, target at x}.
struct BoundCheck {
    std::string name;
    BoundDirection expected;
    std::function<std::array<double, 4>(SplitMix64&)> draw;
};

inline std::vector<SuiteResult> run_bound_checks(const std::vector<BoundCheck>& checks, int samples,
                                                 std::uint64_t seed) {
    std::vector<SuiteResult> out;
    for (std::size_t i = 0; i < checks.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        auto rng = SplitMix64::stream(seed, 100 + i);
        double worst_tangency = 0.0;
        int violations = 0;
        double worst_violation = 0.0;
        for (int k = 0; k < samples; ++k) {
            const auto [b0, f0, b1, f1] = checks[i].draw(rng);
            worst_tangency = std::max(worst_tangency, std::abs(b0 - f0) / std::max(std::abs(f0), 1e-300));
            const double excess = checks[i].expected == BoundDirection::lower ? b1 - f1 : f1 - b1;
            const double rel = excess / std::max(std::abs(f1), 1.0);
            if (rel > 1e-9) ++violations;
            worst_violation = std::max(worst_violation, rel);
        }
        const double t = elapsed(t0);
        out.push_back({checks[i].name + " tangency", worst_tangency <= 1e-10,
                       fmt("max relative gap at expansion point %.2e (limit 1e-10)", worst_tangency), t});
        out.push_back({checks[i].name + " domination", violations == 0,
                       std::to_string(violations) + " violations in " + std::to_string(samples) +
                           fmt(" points, worst excess %.2e (limit 1e-9)", worst_violation),
                       0.0});
    }
    return out;
}

}  // namespace detail

/// Tangency and domination of the six first-order surrogates.
inline std::vector<SuiteResult> bound_suite(const Options& opt = {}) {
    using detail::log_uniform;
    using detail::random_sample;
    const SemanticModel m;
    const BoundSet& b = opt.bounds;
    auto gamma = [](SplitMix64& r) { return -20.0 + 60.0 * r.uniform(); };
    auto t_of = [&](double g) { return m.logistic_exponent(g); };
    std::vector<detail::BoundCheck> checks{
        {"backhaul-rate", BoundDirection::lower,
         [&](SplitMix64& r) {
             const auto s = random_sample(r);
             const double a = log_uniform(r, 1e-6, 1.0), g0 = gamma(r), g1 = gamma(r);
             const AffineBound bound = b.rbr(g0, a, s.cfg, m);
             auto f = [&](double g) { return bit_equivalent_rate(a, s.cfg.bandwidth_hz, g, m); };
             return std::array{bound(t_of(g0)), f(g0), bound(t_of(g1)), f(g1)};
         }},
        {"user-rate-in-power", BoundDirection::upper,
         [&](SplitMix64& r) {
             const auto s = random_sample(r);
             const double a = log_uniform(r, 1e-6, 1.0), p0 = 10.0 * r.uniform(), p1 = 10.0 * r.uniform();
             const AffineBound bound = b.phi(p0, a, s.h_ru, s.cfg);
             auto f = [&](double p) { return user_bit_rate(a, p, s.h_ru, s.cfg); };
             return std::array{bound(p0), f(p0), bound(p1), f(p1)};
         }},
        {"delta", BoundDirection::lower,
         [&](SplitMix64& r) {
             const double a0 = r.uniform(), s0 = r.uniform(), a1 = r.uniform(), s1 = r.uniform();
             const AffineBound bound = b.delta(a0, s0);
             auto f = [](double a, double s) { return (a + s) * (a + s); };
             return std::array{bound(std::vector{a0, s0}), f(a0, s0), bound(std::vector{a1, s1}), f(a1, s1)};
         }},
        {"similarity", BoundDirection::lower,
         [&](SplitMix64& r) {
             const double g0 = gamma(r), g1 = gamma(r);
             const AffineBound bound = b.s(g0, m);
             return std::array{bound(t_of(g0)), similarity(g0, m), bound(t_of(g1)), similarity(g1, m)};
         }},
        {"user-rate-in-bandwidth", BoundDirection::upper,
         [&](SplitMix64& r) {
             const auto s = random_sample(r);
             const double p = 10.0 * r.uniform(), a0 = log_uniform(r, 1e-6, 1.0), a1 = log_uniform(r, 1e-6, 1.0);
             const AffineBound bound = b.rru_alpha(a0, p, s.h_ru, s.cfg);
             auto f = [&](double a) { return user_bit_rate(a, p, s.h_ru, s.cfg); };
             return std::array{bound(a0), f(a0), bound(a1), f(a1)};
         }},
        {"psi", BoundDirection::lower,
         [&](SplitMix64& r) {
             const auto s = random_sample(r);
             const double a0 = log_uniform(r, 1e-6, 1.0), a1 = log_uniform(r, 1e-6, 1.0);
             const AffineBound bound = b.psi(a0, s.cfg, s.ch);
             auto f = [&](double a) { return snr_br_db(a, s.cfg, s.ch); };
             return std::array{bound(a0), f(a0), bound(a1), f(a1)};
         }},
    };
    return detail::run_bound_checks(checks, opt.bound_samples, opt.seed);
}

/// Bound slopes against central finite differences of the target functions.
inline std::vector<SuiteResult> gradient_suite(const Options& opt = {}) {
    using detail::log_uniform;
    using detail::random_sample;
    const SemanticModel m;
    const BoundSet& b = opt.bounds;
    // {analytic slope, central difference} at one random expansion point.
    using Draw = std::function<std::array<double, 2>(SplitMix64&)>;
    auto central = [](const std::function<double(double)>& f, double x, double h) {
        return (f(x + h) - f(x - h)) / (2.0 * h);
    };
    const std::vector<std::pair<std::string, Draw>> cases{
        {"backhaul-rate slope in t",
         [&](SplitMix64& r) {
             const auto s = random_sample(r);
             const double a = log_uniform(r, 1e-6, 1.0), g = -20.0 + 60.0 * r.uniform();
             const double t = m.logistic_exponent(g);
             auto f = [&](double tt) {
                 return a * s.cfg.bandwidth_hz * m.bits_per_word / m.symbols_per_word * (m.a1 + m.a2 / (1.0 + tt));
             };
             return std::array{b.rbr(g, a, s.cfg, m).slope[0], central(f, t, 1e-5 * t)};
         }},
        {"user-rate slope in power",
         [&](SplitMix64& r) {
             const auto s = random_sample(r);
             const double a = log_uniform(r, 1e-6, 1.0), p = log_uniform(r, 1e-3, 10.0);
             auto f = [&](double pp) { return user_bit_rate(a, pp, s.h_ru, s.cfg); };
             return std::array{b.phi(p, a, s.h_ru, s.cfg).slope[0], central(f, p, 1e-5 * p)};
         }},
        {"user-rate slope in bandwidth",
         [&](SplitMix64& r) {
             const auto s = random_sample(r);
             const double a = log_uniform(r, 1e-6, 1.0), p = log_uniform(r, 1e-3, 10.0);
             auto f = [&](double aa) { return user_bit_rate(aa, p, s.h_ru, s.cfg); };
             return std::array{b.rru_alpha(a, p, s.h_ru, s.cfg).slope[0], central(f, a, 1e-5 * a)};
         }},
        {"psi slope",
         [&](SplitMix64& r) {
             const auto s = random_sample(r);
             const double a = log_uniform(r, 1e-6, 1.0);
             auto f = [&](double aa) { return snr_br_db(aa, s.cfg, s.ch); };
             return std::array{b.psi(a, s.cfg, s.ch).slope[0], central(f, a, 1e-5 * a)};
         }},
    };
    std::vector<SuiteResult> out;
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        auto rng = SplitMix64::stream(opt.seed, 200 + i);
        double worst = 0.0;
        for (int k = 0; k < opt.gradient_samples; ++k) {
            const auto [analytic, fd] = cases[i].second(rng);
            worst = std::max(worst, std::abs(analytic - fd) / std::max(std::abs(fd), 1e-300));
        }
        out.push_back({"gradient " + cases[i].first, worst <= 1e-6,
                       detail::fmt("max relative error %.2e over %.0f points (limit 1e-6)", worst,
                                   opt.gradient_samples),
                       detail::elapsed(t0)});
    }
    return out;
}

/// Reference instance: N users placed in the 40 m disk, deterministic LoS.
inline std::pair<SystemConfig, ChannelState> reference_instance(std::size_t n_users, std::uint64_t seed,
                                                                double bandwidth_hz = 10e6, double pbar_w = 1.0) {
    SystemConfig cfg = make_system(n_users, bandwidth_hz, pbar_w);
    Geometry g;
    g.d_ru_m = place_users(n_users, 40.0, 1.0, seed);
    return {cfg, make_channel(g, seed, true)};
}

struct BcdRun {
    std::uint64_t seed = 0;
    SolveReport report;
    FeasibilityVerdict verdict;
    double continuation_gain = 0.0;  // relative gain of 5 further iterations
};

inline std::vector<BcdRun> run_reference_bcd(int instances, double tau) {
    const SemanticModel m;
    std::vector<BcdRun> runs(static_cast<std::size_t>(instances));
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int i = next++; i < instances; i = next++) {
            const auto [cfg, ch] = reference_instance(10, static_cast<std::uint64_t>(i + 1));
            BcdOptions opt;
            opt.tau = tau;
            BcdRun& run = runs[static_cast<std::size_t>(i)];
            run.seed = static_cast<std::uint64_t>(i + 1);
            run.report = bcd_solve(cfg, ch, m, default_init(cfg, ch, m), opt);
            run.verdict = check_feasibility(run.report.allocation, cfg, ch, m);
            BcdOptions more;
            more.tau = 0.0;
            more.max_iter = 5;
            const SolveReport cont = bcd_solve(cfg, ch, m, run.report.final.allocation, more);
            run.continuation_gain = (cont.objective - run.report.objective) / std::max(run.report.objective, 1.0);
        }
    };
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    for (unsigned t = 1; t < std::min<unsigned>(hw, static_cast<unsigned>(instances)); ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return runs;
}

/// Monotone traces, convergence count, no premature stop, and exact
/// feasibility plus relaxation tightness at the returned point.
inline std::vector<SuiteResult> bcd_suite(const Options& opt = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto runs = run_reference_bcd(opt.bcd_instances, opt.tau);
    const double t = detail::elapsed(t0);
    int non_monotone = 0, converged = 0, premature = 0, infeasible = 0, loose = 0;
    double worst_drop = 0.0, worst_slack = 0.0, worst_gap = 0.0, worst_gain = 0.0, worst_gamma = 0.0;
    for (const auto& r : runs) {
        const auto& tr = r.report.objective_trace;
        bool mono = true;
        for (std::size_t k = 1; k < tr.size(); ++k) {
            const double drop = (tr[k - 1] - tr[k]) / std::max(tr[k - 1], 1.0);
            worst_drop = std::max(worst_drop, drop);
            if (drop > 1e-9) mono = false;
        }
        non_monotone += !mono;
        converged += r.report.converged;
        worst_gain = std::max(worst_gain, r.continuation_gain);
        premature += r.continuation_gain > 1e-3;
        worst_slack = std::min(worst_slack, r.verdict.worst());
        infeasible += !r.verdict.feasible(kTolFeas);
        worst_gap = std::max(worst_gap, r.report.tightness_gap);
        const bool causality_binds = r.verdict.causality <= 1e-4;
        if (causality_binds) worst_gamma = std::max(worst_gamma, r.report.gamma_gap_db);
        loose += r.report.tightness_gap > 1e-4 || (causality_binds && r.report.gamma_gap_db > 1e-4);
    }
    const int n = opt.bcd_instances;
    const int need = n - (n + 24) / 25;  // 48 of 50
    const std::string of = " of " + std::to_string(n);
    return {
        {"bcd monotone", non_monotone == 0,
         std::to_string(n - non_monotone) + of + detail::fmt(" traces non-decreasing, worst drop %.2e", worst_drop), t},
        {"bcd convergence", converged >= need && premature == 0,
         std::to_string(converged) + of + " converged (need " + std::to_string(need) + "), " +
             std::to_string(premature) + detail::fmt(" stopped early (5 more iterations gain > 1e-3, worst %.2e)",
                                                     worst_gain),
         0.0},
        {"bcd feasibility", infeasible == 0,
         std::to_string(infeasible) + " infeasible" + detail::fmt(", worst normalized slack %.2e (limit -1e-6)", worst_slack),
         0.0},
        {"bcd tightness", loose == 0,
         std::to_string(loose) + " loose" +
             detail::fmt(", worst u-R gap %.2e of sum rate, worst gamma gap %.2e dB (limits 1e-4)", worst_gap,
                         worst_gamma),
         0.0},
    };
}

struct OracleRun {
    std::uint64_t seed = 0;
    double bcd = 0.0, oracle = 0.0, df = 0.0, df_oracle = 0.0;
};

/// N = 2 instances against brute force: BCD >= 0.98 x grid optimum, DF convex
/// solve within 1e-3 of its refined grid optimum.
inline std::vector<OracleRun> run_oracle_comparison(int instances) {
    const SemanticModel m;
    std::vector<OracleRun> out;
    for (int i = 1; i <= instances; ++i) {
        const auto [cfg, ch] = reference_instance(2, static_cast<std::uint64_t>(i));
        OracleRun r;
        r.seed = static_cast<std::uint64_t>(i);
        r.oracle = grid_search(cfg, ch, m, GridSpec(0.02, 0.02, 2, 1.0), OracleScheme::semrelay).objective;
        r.df_oracle = grid_search(cfg, ch, m, GridSpec(0.02, 0.02, 2, 1.0, false, 3), OracleScheme::df).objective;
        r.bcd = bcd_solve(cfg, ch, m, default_init(cfg, ch, m)).objective;
        r.df = solve_df_relay(cfg, ch).objective;
        out.push_back(r);
    }
    return out;
}

inline std::vector<SuiteResult> oracle_suite(const Options& opt = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto runs = run_oracle_comparison(opt.oracle_instances);
    double worst_ratio = 1e300, worst_df = 0.0;
    for (const auto& r : runs) {
        worst_ratio = std::min(worst_ratio, r.bcd / r.oracle);
        worst_df = std::max(worst_df, std::abs(r.df / r.df_oracle - 1.0));
    }
    return {
        {"oracle semantic relay", worst_ratio >= 0.98,
         detail::fmt("worst bcd / grid optimum %.5f (need >= 0.98)", worst_ratio), detail::elapsed(t0)},
        {"oracle df relay", worst_df <= 1e-3, detail::fmt("worst relative gap %.2e (limit 1e-3)", worst_df), 0.0},
    };
}

inline std::vector<SuiteResult> run_all(const Options& opt = {}) {
    std::vector<SuiteResult> all;
    for (auto part : {bound_suite(opt), gradient_suite(opt), bcd_suite(opt), oracle_suite(opt)}) {
        all.insert(all.end(), part.begin(), part.end());
    }
    return all;
}

}  // namespace semrelay::validation
