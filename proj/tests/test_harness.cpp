#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "semrelay/harness.hpp"
#include "semrelay/scenario.hpp"
#include "semrelay/validation.hpp"

using namespace semrelay;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinRel;

namespace {

ScenarioConfig parse(const std::string& text) {
    std::istringstream in(text);
    return parse_scenario(in);
}

std::string error_key(const std::string& text) {
    try {
        parse(text);
    } catch (const ConfigError& e) {
        return e.key();
    }
    return "<no error>";
}

ScenarioConfig deterministic_scenario() {
    ScenarioConfig sc;
    sc.deterministic_los = true;
    sc.realizations = 1;
    return sc;
}

std::vector<double> rates(const std::vector<CsvRow>& rows, Scheme s) {
    std::vector<double> out;
    for (const auto& r : rows) {
        if (r.scheme == s) out.push_back(r.sum_rate_bps);
    }
    return out;
}

}  // namespace

TEST_CASE("scenario defaults are the reference setup") {
    const ScenarioConfig sc;
    const SystemConfig cfg = sc.system();
    CHECK(cfg.n_users() == 10);
    CHECK(cfg.bandwidth_hz == 10e6);
    CHECK(cfg.bs_power_w == 2.0);
    CHECK(cfg.relay_budget_w == 1.0);
    CHECK_THAT(cfg.noise_psd_w_hz, WithinRel(std::pow(10.0, -19.9), 1e-12));
    CHECK(sc.tau == 1e-6);
    CHECK(sc.max_iter == 100);
    CHECK(sc.schemes.size() == 4);
    CHECK(sc.split == EqualSplit::half_backhaul);
    const Geometry g = sc.geometry(1);
    CHECK(g.d_br_m == 60.0);
    CHECK_THAT(g.rho0, WithinRel(1e-6, 1e-12));
    CHECK(g.d_ru_m.size() == 10);
}

TEST_CASE("scenario file values override defaults") {
    const auto sc = parse(
        "[system]\nn_users = 3\nb_total_hz = 5e6\nweights = 1, 2, 0.5\n"
        "[semantic]\neps_bar = 0.85\nwords_per_sentence = 4\n"
        "[geometry]\nuser_distances_m = 5, 10, 20\n"
        "[solver]\ntau = 1e-4\nmax_iter = 30\n"
        "[run]\nseed = 42\ndeterministic_los = true\nschemes = proposed, df\nsplit = all-links\n"
        "realizations = 3\nthreads = 2\n");
    CHECK(sc.n_users == 3);
    CHECK(sc.b_total_hz == 5e6);
    CHECK(sc.weights == std::vector<double>{1.0, 2.0, 0.5});
    CHECK(sc.semantic.eps_bar == 0.85);
    CHECK(sc.semantic.words_per_sentence == 4.0);
    CHECK_FALSE(sc.semantic.suts_per_sentence.has_value());
    CHECK(sc.geometry(1).d_ru_m == std::vector<double>{5.0, 10.0, 20.0});
    CHECK(sc.bcd_options().tau == 1e-4);
    CHECK(sc.bcd_options().max_iter == 30);
    CHECK(sc.seed == 42);
    CHECK(sc.deterministic_los);
    CHECK(sc.schemes == std::vector<Scheme>{Scheme::proposed, Scheme::df});
    CHECK(sc.split == EqualSplit::all_links);
    CHECK(sc.realizations == 3);
    CHECK(sc.threads == 2);
}

TEST_CASE("config errors name the offending key") {
    CHECK(error_key("[system]\nbogus = 1\n") == "system.bogus");
    CHECK(error_key("[nowhere]\nx = 1\n") == "nowhere");
    CHECK(error_key("[system]\nb_total_hz = ten\n") == "system.b_total_hz");
    CHECK(error_key("[system]\nb_total_hz = -1\n") == "system.b_total_hz");
    CHECK(error_key("[system]\nn_users = 2\nweights = 1, 2, 3\n") == "system.weights");
    CHECK(error_key("[solver]\nmax_iter = 2.5\n") == "solver.max_iter");
    CHECK(error_key("[run]\nschemes = proposed, magic\n") == "run.schemes");
    CHECK(error_key("[run]\nsplit = thirds\n") == "run.split");
    CHECK(error_key("[run]\ndeterministic_los = maybe\n") == "run.deterministic_los");
    CHECK(error_key("[semantic]\neps_bar = 0.99\n") == "semantic");
    CHECK(error_key("[geometry]\nmin_user_distance_m = 50\n") == "geometry.max_user_distance_m");
    CHECK_THROWS_WITH(parse("[system]\nbogus = 1\n"), ContainsSubstring("config key 'system.bogus'"));
    CHECK_THROWS_AS(parse("[system\n"), ConfigError);
    CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.ini"), ConfigError);
}

TEST_CASE("scheme lists") {
    CHECK(parse_schemes("all") == all_schemes());
    CHECK(parse_schemes(" df ,equal-bw") == std::vector<Scheme>{Scheme::df, Scheme::equal_bw});
    CHECK_THROWS_AS(parse_schemes(""), ConfigError);
    CHECK_THROWS_AS(parse_schemes("Proposed"), ConfigError);
    CHECK(std::string(scheme_name(Scheme::equal_power)) == "equal-power");
}

TEST_CASE("linear grids") {
    CHECK(linear_grid(1.0, 1.0, 20) == std::vector<double>{1.0});
    const auto g = linear_grid(1e6, 20e6, 20);
    CHECK(g.size() == 20);
    CHECK(g.front() == 1e6);
    CHECK(g.back() == 20e6);
    CHECK(g[1] == 2e6);
}

TEST_CASE("single solve produces one converged row per scheme") {
    const auto rows = run_solve(deterministic_scenario());
    REQUIRE(rows.size() == 4);
    for (const auto& r : rows) {
        CHECK(r.feasible);
        CHECK(r.sum_rate_bps > 0.0);
        CHECK(r.b_hz == 10e6);
    }
    CHECK(rows[0].scheme == Scheme::proposed);
    CHECK(rows[0].converged);
    CHECK(rows[0].similarity >= 0.9 - 1e-6);
    CHECK(std::isnan(rows[3].similarity));
    for (std::size_t k = 1; k < 4; ++k) CHECK(rows[0].sum_rate_bps >= rows[k].sum_rate_bps);
}

TEST_CASE("CSV layout") {
    CsvRow r;
    r.seed = 7;
    r.scheme = Scheme::df;
    r.b_hz = 1e6;
    r.pbar_w = 0.5;
    r.sum_rate_bps = 12345678.25;
    r.alpha_br = 0.125;
    r.gamma_br_db = std::numeric_limits<double>::infinity();
    r.similarity = std::numeric_limits<double>::quiet_NaN();
    r.iterations = 3;
    r.converged = true;
    const std::string csv = format_csv({r});
    CHECK(csv ==
          "seed,scheme,b_hz,pbar_w,sum_rate_bps,alpha_br,gamma_br_db,similarity,iterations,converged,feasible\n"
          "7,df,1000000,0.5,12345678.25,0.125,inf,nan,3,true,false\n");
}

TEST_CASE("sweeps are byte-identical across runs and thread counts") {
    ScenarioConfig sc;
    sc.realizations = 3;
    sc.b_points = 4;
    sc.threads = 1;
    const std::string one = format_csv(sweep_bandwidth(sc));
    sc.threads = 3;
    const std::string three = format_csv(sweep_bandwidth(sc));
    const std::string again = format_csv(sweep_bandwidth(sc));
    CHECK(one == three);
    CHECK(three == again);
    const auto rows = sweep_bandwidth(sc);
    REQUIRE(rows.size() == 4 * 3 * 4);
    CHECK(rows[0].seed == 1);
    CHECK(rows[4].seed == 2);
    CHECK(rows[12].b_hz > rows[0].b_hz);
}

TEST_CASE("a degenerate range sweeps a single point") {
    ScenarioConfig sc = deterministic_scenario();
    sc.b_min_hz = sc.b_max_hz = 5e6;
    const auto rows = sweep_bandwidth(sc);
    CHECK(rows.size() == 4);
    for (const auto& r : rows) CHECK(r.b_hz == 5e6);
}

TEST_CASE("curves average over realizations") {
    std::vector<CsvRow> rows(4);
    for (std::size_t k = 0; k < 4; ++k) {
        rows[k].scheme = Scheme::proposed;
        rows[k].b_hz = k < 2 ? 1e6 : 2e6;
        rows[k].sum_rate_bps = static_cast<double>(k + 1);
    }
    const auto curves = average_curves(rows, SweepAxis::bandwidth, {Scheme::proposed});
    REQUIRE(curves.size() == 1);
    CHECK(curves[0].x == std::vector<double>{1e6, 2e6});
    CHECK(curves[0].y == std::vector<double>{1.5, 3.5});
}

TEST_CASE("bandwidth sweep shows the equal-bandwidth cutoff and the semantic gain") {
    ScenarioConfig sc = deterministic_scenario();
    sc.b_points = 8;
    sc.b_min_hz = 2e6;
    sc.b_max_hz = 18e6;
    const auto rows = sweep_bandwidth(sc);
    const auto cfg = sc.system();
    const double b_star = equal_bandwidth_threshold_hz(cfg, sc.channel(sc.seed), sc.semantic, sc.split);
    for (const auto& r : rows) {
        if (r.scheme == Scheme::equal_bw && r.b_hz > b_star) CHECK(r.sum_rate_bps == 0.0);
        if (r.scheme == Scheme::equal_bw && r.b_hz < b_star) CHECK(r.sum_rate_bps > 0.0);
    }
    const auto proposed = rates(rows, Scheme::proposed);
    const auto df = rates(rows, Scheme::df);
    for (std::size_t k = 0; k < proposed.size(); ++k) CHECK(proposed[k] > df[k]);
}

TEST_CASE("power sweep is monotone with a diminishing slope") {
    ScenarioConfig sc = deterministic_scenario();
    sc.p_min_w = 0.1;
    sc.p_max_w = 4.0;
    sc.p_points = 14;
    const auto rows = sweep_power(sc);
    for (Scheme s : all_schemes()) {
        const auto y = rates(rows, s);
        for (std::size_t k = 1; k < y.size(); ++k) CHECK(y[k] >= y[k - 1] * (1.0 - 1e-6));
    }
    const auto grid = linear_grid(sc.p_min_w, sc.p_max_w, sc.p_points);
    const auto y = rates(rows, Scheme::proposed);
    auto at = [&](double p) {
        const auto it = std::min_element(grid.begin(), grid.end(),
                                         [&](double a, double b) { return std::abs(a - p) < std::abs(b - p); });
        return y[static_cast<std::size_t>(it - grid.begin())];
    };
    const double low = (at(1.0) - at(0.1)) / at(0.1) / 0.9;
    const double high = (at(4.0) - at(1.0)) / at(1.0) / 3.0;
    CHECK(high < low);
}

TEST_CASE("SVG rendering is well formed") {
    const std::vector<Curve> curves{{"proposed", {1e6, 2e6, 3e6}, {1e7, 2e7, 2.5e7}},
                                    {"a<b & c", {1e6, 2e6, 3e6}, {0.5e7, 1e7, 0.0}}};
    const std::string svg = render_svg(curves, "B (MHz)", "rate", 1e6, 1e6);
    CHECK(svg.rfind("<svg xmlns=\"http://www.w3.org/2000/svg\"", 0) == 0);
    CHECK(svg.size() >= 7);
    CHECK(svg.substr(svg.size() - 7) == "</svg>\n");
    auto count = [&](const std::string& needle) {
        std::size_t n = 0;
        for (auto pos = svg.find(needle); pos != std::string::npos; pos = svg.find(needle, pos + 1)) ++n;
        return n;
    };
    CHECK(count("<polyline") == 2);
    CHECK(count("<circle") == 6);
    CHECK(count("a&lt;b &amp; c") == 1);
    CHECK(count("a<b") == 0);
    CHECK(count("<text") == count("</text>"));
}

TEST_CASE("a stopping rule that quits after one iteration is flagged") {
    validation::Options opt;
    opt.bcd_instances = 10;
    opt.tau = 1.0;
    bool convergence_failed = false;
    for (const auto& r : validation::bcd_suite(opt)) {
        if (r.name == "bcd convergence") convergence_failed = !r.passed;
    }
    CHECK(convergence_failed);
}
