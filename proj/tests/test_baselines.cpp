#include <catch_amalgamated.hpp>

#include <cmath>

#include "semrelay/allocator.hpp"
#include "semrelay/baselines.hpp"
#include "semrelay/validation.hpp"

using namespace semrelay;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Largest x in [lo, hi] with pred(x) true, for pred true at lo and false at hi.
template <class Pred>
double bisect(double lo, double hi, Pred&& pred) {
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (pred(mid) ? lo : hi) = mid;
    }
    return lo;
}

SystemConfig with_bandwidth(SystemConfig cfg, double b_hz) {
    cfg.bandwidth_hz = b_hz;
    return cfg;
}

}  // namespace

TEST_CASE("equal-split backhaul fractions") {
    CHECK(equal_split_backhaul(EqualSplit::all_links, 10) == 1.0 / 11.0);
    CHECK(equal_split_backhaul(EqualSplit::half_backhaul, 10) == 0.5);
}

TEST_CASE("equal-bandwidth threshold inverts the backhaul SNR at the similarity threshold") {
    const SemanticModel m;
    const auto [cfg, ch] = validation::reference_instance(10, 1);
    for (auto split : {EqualSplit::half_backhaul, EqualSplit::all_links}) {
        const double a = equal_split_backhaul(split, 10);
        const double b_star = equal_bandwidth_threshold_hz(cfg, ch, m, split);
        const double b_bisect = bisect(1e3, 1e10, [&](double b) {
            return snr_br_db(a, with_bandwidth(cfg, b), ch) >= min_snr_threshold(m);
        });
        CHECK_THAT(b_star, WithinRel(b_bisect, 1e-9));
    }
    CHECK_THAT(equal_bandwidth_threshold_hz(cfg, ch, m, EqualSplit::half_backhaul), WithinRel(16.62e6, 1e-3));
    CHECK_THAT(equal_bandwidth_threshold_hz(cfg, ch, m, EqualSplit::all_links), WithinRel(91.4e6, 1e-3));
}

TEST_CASE("equal-bandwidth baseline is feasible below the threshold and carries nothing above it") {
    const SemanticModel m;
    const auto [cfg, ch] = validation::reference_instance(10, 1);
    const double b_star = equal_bandwidth_threshold_hz(cfg, ch, m, EqualSplit::half_backhaul);
    const auto below = solve_equal_bandwidth(with_bandwidth(cfg, 0.999 * b_star), ch, m);
    CHECK(below.feasible);
    CHECK(below.objective > 0.0);
    const auto above = solve_equal_bandwidth(with_bandwidth(cfg, 1.001 * b_star), ch, m);
    CHECK(above.status == "infeasible");
    CHECK(above.objective == 0.0);
    CHECK_FALSE(above.feasible);
}

TEST_CASE("measured equal-bandwidth crossing matches the threshold within 0.1%") {
    const SemanticModel m;
    const auto [cfg, ch] = validation::reference_instance(10, 1);
    const double b_star = equal_bandwidth_threshold_hz(cfg, ch, m, EqualSplit::half_backhaul);
    const double crossing = bisect(1e6, 20e6, [&](double b) {
        return solve_equal_bandwidth(with_bandwidth(cfg, b), ch, m).objective > 0.0;
    });
    CHECK_THAT(crossing, WithinRel(b_star, 1e-3));
}

TEST_CASE("equal-bandwidth baseline for one user matches the fixed-bandwidth power oracle") {
    const SemanticModel m;
    SystemConfig cfg = make_system(1, 1e6, 1.0);
    for (double d : {5.0, 20.0, 40.0}) {
        const ChannelState ch{path_loss(60.0, 1e-6, 3.5), {path_loss(d, 1e-6, 3.5)}};
        const auto rep = solve_equal_bandwidth(cfg, ch, m);
        // Oracle: full budget unless the user would outrun the backhaul.
        const double backhaul = bit_equivalent_rate(0.5, cfg.bandwidth_hz, snr_br_db(0.5, cfg, ch), m);
        const double p = bisect(0.0, 1.0, [&](double x) { return user_bit_rate(0.5, x, ch.h_ru_sq[0], cfg) <= backhaul; });
        const double expected = user_bit_rate(0.5, p, ch.h_ru_sq[0], cfg);
        INFO("distance " << d);
        CHECK(rep.feasible);
        CHECK_THAT(rep.objective, WithinRel(expected, 1e-5));
    }
}

TEST_CASE("equal-power baseline treats identical users identically") {
    const SemanticModel m;
    const auto [cfg, ch0] = validation::reference_instance(2, 5);
    ChannelState ch = ch0;
    ch.h_ru_sq[1] = ch.h_ru_sq[0];
    const auto rep = solve_equal_power(cfg, ch, m);
    CHECK(rep.feasible);
    CHECK_THAT(rep.allocation.alpha_ru[0], WithinAbs(rep.allocation.alpha_ru[1], 1e-6));
    CHECK(rep.allocation.p_r[0] == 0.5);
    CHECK(rep.allocation.p_r[1] == 0.5);
}

TEST_CASE("equal-power baseline is within 2% of a fixed-power bandwidth grid") {
    const SemanticModel m;
    for (std::uint64_t seed : {1, 2, 3}) {
        const auto [cfg, ch] = validation::reference_instance(2, seed);
        const auto rep = solve_equal_power(cfg, ch, m);
        // Grid over the user fractions; the backhaul gets the largest
        // fraction that keeps the similarity threshold.
        const double cap = std::min(1.0, bisect(0.0, 1.0, [&](double a) {
            return a == 0.0 || snr_br_db(a, cfg, ch) >= min_snr_threshold(m);
        }));
        double best = 0.0;
        const int cells = 400;
        for (int i = 0; i <= cells; ++i) {
            for (int j = 0; i + j <= cells; ++j) {
                Allocation a{std::min(cap, 1.0 - (i + j) / double(cells)),
                             {i / double(cells), j / double(cells)},
                             {0.5, 0.5}};
                if (check_feasibility(a, cfg, ch, m).feasible()) best = std::max(best, evaluate_objective(a, cfg, ch));
            }
        }
        INFO("seed " << seed);
        REQUIRE(best > 0.0);
        CHECK(rep.objective >= 0.98 * best);
    }
}

TEST_CASE("decode-and-forward backhaul at linear SNR 3 is 2 alpha B") {
    SystemConfig cfg = make_system(1, 1e6, 1.0);
    const double alpha = 0.25;
    ChannelState ch{3.0 * alpha * cfg.bandwidth_hz * cfg.noise_psd_w_hz / cfg.bs_power_w, {1e-10}};
    CHECK_THAT(df_backhaul_rate(alpha, cfg, ch), WithinRel(2.0 * alpha * cfg.bandwidth_hz, 1e-14));
    CHECK(df_backhaul_rate(0.0, cfg, ch) == 0.0);
}

TEST_CASE("decode-and-forward for one user matches the crossing of backhaul and access rates") {
    for (double d : {3.0, 15.0, 40.0}) {
        for (double b : {1e6, 10e6}) {
            SystemConfig cfg = make_system(1, b, 1.0);
            const ChannelState ch{path_loss(60.0, 1e-6, 3.5), {path_loss(d, 1e-6, 3.5)}};
            const auto rep = solve_df_relay(cfg, ch);
            // Full band, full power: the rate is min(R_br(a), R_ru(1 - a)) at its crossing.
            const double a = bisect(0.0, 1.0, [&](double x) {
                return df_backhaul_rate(x, cfg, ch) <= user_bit_rate(1.0 - x, 1.0, ch.h_ru_sq[0], cfg);
            });
            INFO("distance " << d << " bandwidth " << b);
            CHECK(rep.converged);
            CHECK_THAT(rep.objective, WithinRel(df_backhaul_rate(a, cfg, ch), 1e-3));
            CHECK(rep.kkt_residual <= 1e-7);
            CHECK(check_df_feasibility(rep.allocation, cfg, ch).feasible());
        }
    }
}

TEST_CASE("decode-and-forward KKT residual on the reference scenario") {
    for (double b : {1e6, 10e6, 20e6}) {
        const auto [cfg, ch] = validation::reference_instance(10, 1, b);
        const auto rep = solve_df_relay(cfg, ch);
        INFO("bandwidth " << b);
        CHECK(rep.converged);
        CHECK(rep.kkt_residual <= 1e-7);
        CHECK(std::isnan(rep.final.s));
    }
}

TEST_CASE("semantic relay beats decode-and-forward at 1 MHz") {
    const SemanticModel m;
    const auto [cfg, ch] = validation::reference_instance(10, 1, 1e6);
    const auto proposed = bcd_solve(cfg, ch, m, default_init(cfg, ch, m));
    const auto df = solve_df_relay(cfg, ch);
    CHECK(proposed.objective >= df.objective);
}

TEST_CASE("joint allocation dominates both single-block baselines") {
    const SemanticModel m;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        for (double b : {2e6, 8e6, 14e6}) {
            const auto [cfg, ch] = validation::reference_instance(6, seed, b);
            const double joint = bcd_solve(cfg, ch, m, default_init(cfg, ch, m)).objective;
            const auto ebw = solve_equal_bandwidth(cfg, ch, m);
            const auto ep = solve_equal_power(cfg, ch, m);
            INFO("seed " << seed << " bandwidth " << b);
            REQUIRE(ebw.feasible);
            REQUIRE(ep.feasible);
            CHECK(joint >= ebw.objective * (1.0 - 1e-6));
            CHECK(joint >= ep.objective * (1.0 - 1e-6));
        }
    }
}
