// Command-line front end: single solves, bandwidth and power sweeps, and the
// property suites. Exit codes: 0 success, 1 usage or config error, 2 solver
// failure, 3 validation failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "semrelay/harness.hpp"
#include "semrelay/scenario.hpp"
#include "semrelay/validation.hpp"

namespace {

using namespace semrelay;

constexpr int kExitUsage = 1;
constexpr int kExitSolver = 2;
constexpr int kExitValidation = 3;

struct CommonFlags {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> scheme;
    std::optional<int> realizations;
    bool deterministic = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config, "Scenario INI file (defaults when omitted)");
    cmd->add_option("--out", f.out, "Output directory");
    cmd->add_option("--seed", f.seed, "Channel seed (first seed of a sweep)");
    cmd->add_option("--scheme", f.scheme, "proposed, equal-bw, equal-power, df or all (comma list allowed)");
    cmd->add_option("--realizations", f.realizations, "Channel realizations averaged per sweep point")
        ->check(CLI::PositiveNumber);
    cmd->add_flag("--deterministic", f.deterministic, "Line-of-sight channel without fading");
}

ScenarioConfig load(const CommonFlags& f) {
    ScenarioConfig sc = f.config.empty() ? ScenarioConfig{} : load_scenario(f.config);
    if (f.seed) sc.seed = *f.seed;
    if (f.scheme) sc.schemes = parse_schemes(*f.scheme, "--scheme");
    if (f.realizations) sc.realizations = *f.realizations;
    if (f.deterministic) sc.deterministic_los = true;
    return sc;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

std::filesystem::path out_dir(const CommonFlags& f) {
    std::filesystem::path dir = f.out.empty() ? "." : f.out;
    std::filesystem::create_directories(dir);
    return dir;
}

int run_solve_cmd(const CommonFlags& f) {
    const ScenarioConfig sc = load(f);
    const std::string csv = format_csv(run_solve(sc));
    std::cout << csv;
    if (!f.out.empty()) write_file(out_dir(f) / "solve.csv", csv);
    return 0;
}

int run_sweep_cmd(const CommonFlags& f, SweepAxis axis) {
    const ScenarioConfig sc = load(f);
    const auto rows = axis == SweepAxis::bandwidth ? sweep_bandwidth(sc) : sweep_power(sc);
    const auto dir = out_dir(f);
    const std::string stem = axis == SweepAxis::bandwidth ? "sweep_bandwidth" : "sweep_power";
    write_file(dir / (stem + ".csv"), format_csv(rows));
    const auto curves = average_curves(rows, axis, sc.schemes);
    const std::string svg = axis == SweepAxis::bandwidth
                                ? render_svg(curves, "total bandwidth B (MHz)", "weighted sum rate (Mbit/s)", 1e6, 1e6)
                                : render_svg(curves, "relay power budget (W)", "weighted sum rate (Mbit/s)", 1.0, 1e6);
    write_file(dir / (stem + ".svg"), svg);
    for (const auto& c : curves) {
        std::printf("%-12s", c.name.c_str());
        for (double y : c.y) std::printf(" %.4g", y);
        std::printf("\n");
    }
    std::printf("wrote %s.csv and %s.svg to %s\n", stem.c_str(), stem.c_str(), dir.string().c_str());
    return 0;
}

int run_validate_cmd() {
    bool ok = true;
    for (const auto& r : validation::run_all()) {
        std::printf("%s  %-36s %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
        ok = ok && r.passed;
    }
    return ok ? 0 : kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Resource allocation for a semantic relay downlink"};
    app.require_subcommand(1);
    CommonFlags flags;
    auto* solve = app.add_subcommand("solve", "Solve one scenario with the selected schemes");
    auto* sweep_b = app.add_subcommand("sweep-bandwidth", "Sum rate versus total bandwidth");
    auto* sweep_p = app.add_subcommand("sweep-power", "Sum rate versus relay power budget");
    auto* validate = app.add_subcommand("validate", "Run the property suites");
    for (auto* cmd : {solve, sweep_b, sweep_p}) add_common(cmd, flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (solve->parsed()) return run_solve_cmd(flags);
        if (sweep_b->parsed()) return run_sweep_cmd(flags, SweepAxis::bandwidth);
        if (sweep_p->parsed()) return run_sweep_cmd(flags, SweepAxis::power);
        if (validate->parsed()) return run_validate_cmd();
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const SubproblemError& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return kExitSolver;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitSolver;
    }
    return kExitUsage;
}
