#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "semrelay/allocator.hpp"
#include "semrelay/baselines.hpp"
#include "semrelay/scenario.hpp"

namespace semrelay {

/// Runs one scheme on one channel realization. Solver failures propagate as
/// SubproblemError; infeasible baselines come back with objective 0.
inline SolveReport run_scheme(Scheme s, const ScenarioConfig& sc, const SystemConfig& cfg, const ChannelState& ch) {
    const BcdOptions opt = sc.bcd_options();
    switch (s) {
        case Scheme::proposed: return bcd_solve(cfg, ch, sc.semantic, default_init(cfg, ch, sc.semantic), opt);
        case Scheme::equal_bw: return solve_equal_bandwidth(cfg, ch, sc.semantic, sc.split, opt);
        case Scheme::equal_power: return solve_equal_power(cfg, ch, sc.semantic, opt);
        case Scheme::df: return solve_df_relay(cfg, ch, opt.solver);
    }
    throw std::logic_error("run_scheme: unknown scheme");
}

struct CsvRow {
    std::uint64_t seed = 0;
    Scheme scheme = Scheme::proposed;
    double b_hz = 0.0;
    double pbar_w = 0.0;
    double sum_rate_bps = 0.0;
    double alpha_br = 0.0;
    double gamma_br_db = 0.0;
    double similarity = 0.0;  // NaN for the DF relay, which sends bits
    int iterations = 0;
    bool converged = false;
    bool feasible = false;
};

inline constexpr const char* kCsvHeader =
    "seed,scheme,b_hz,pbar_w,sum_rate_bps,alpha_br,gamma_br_db,similarity,iterations,converged,feasible";

inline CsvRow make_row(std::uint64_t seed, Scheme s, const SystemConfig& cfg, const ChannelState& ch,
                       const SemanticModel& m, const SolveReport& rep) {
    CsvRow r;
    r.seed = seed;
    r.scheme = s;
    r.b_hz = cfg.bandwidth_hz;
    r.pbar_w = cfg.relay_budget_w;
    r.sum_rate_bps = rep.objective;
    r.alpha_br = rep.allocation.alpha_br;
    r.gamma_br_db = backhaul_snr_db(r.alpha_br, cfg, ch);
    r.similarity = s == Scheme::df ? std::numeric_limits<double>::quiet_NaN() : similarity(r.gamma_br_db, m);
    r.iterations = rep.iterations;
    r.converged = rep.converged;
    r.feasible = rep.feasible;
    return r;
}

namespace detail {
inline std::string fmt_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}
}  // namespace detail

inline std::string format_row(const CsvRow& r) {
    using detail::fmt_double;
    return std::to_string(r.seed) + "," + scheme_name(r.scheme) + "," + fmt_double(r.b_hz) + "," +
           fmt_double(r.pbar_w) + "," + fmt_double(r.sum_rate_bps) + "," + fmt_double(r.alpha_br) + "," +
           fmt_double(r.gamma_br_db) + "," + fmt_double(r.similarity) + "," + std::to_string(r.iterations) + "," +
           (r.converged ? "true" : "false") + "," + (r.feasible ? "true" : "false");
}

inline std::string format_csv(const std::vector<CsvRow>& rows) {
    std::string out = std::string(kCsvHeader) + "\n";
    for (const auto& r : rows) out += format_row(r) + "\n";
    return out;
}

/// All configured schemes on the config's own B, P and seed.
inline std::vector<CsvRow> run_solve(const ScenarioConfig& sc) {
    const SystemConfig cfg = sc.system();
    const ChannelState ch = sc.channel(sc.seed);
    std::vector<CsvRow> rows;
    for (Scheme s : sc.schemes) rows.push_back(make_row(sc.seed, s, cfg, ch, sc.semantic, run_scheme(s, sc, cfg, ch)));
    return rows;
}

/// `points` evenly spaced values on [lo, hi]; a single value when lo == hi.
inline std::vector<double> linear_grid(double lo, double hi, int points) {
    if (lo == hi || points <= 1) return {lo};
    std::vector<double> v(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) v[i] = i + 1 == points ? hi : lo + (hi - lo) * i / (points - 1);
    return v;
}

enum class SweepAxis { bandwidth, power };

/// Runs every (grid value, realization) pair concurrently; realization r uses
/// seed sc.seed + r. Rows come back ordered by grid index, then seed, then
/// scheme, independent of scheduling. The first failure in that order is
/// rethrown after all workers finish.
inline std::vector<CsvRow> run_sweep(const ScenarioConfig& sc, SweepAxis axis, const std::vector<double>& values) {
    const std::size_t reps = static_cast<std::size_t>(sc.realizations);
    const std::size_t jobs = values.size() * reps;
    std::vector<std::vector<CsvRow>> out(jobs);
    std::vector<std::exception_ptr> errors(jobs);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t j = next++; j < jobs; j = next++) {
            try {
                const double v = values[j / reps];
                const std::uint64_t seed = sc.seed + j % reps;
                const SystemConfig cfg = axis == SweepAxis::bandwidth ? sc.system(v, sc.p_relay_budget_w)
                                                                      : sc.system(sc.b_total_hz, v);
                const ChannelState ch = sc.channel(seed);
                for (Scheme s : sc.schemes) {
                    out[j].push_back(make_row(seed, s, cfg, ch, sc.semantic, run_scheme(s, sc, cfg, ch)));
                }
            } catch (...) {
                errors[j] = std::current_exception();
            }
        }
    };
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t n_threads = std::min<std::size_t>(sc.threads > 0 ? sc.threads : hw, std::max<std::size_t>(jobs, 1));
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    std::vector<CsvRow> rows;
    rows.reserve(jobs * sc.schemes.size());
    for (auto& block : out) rows.insert(rows.end(), block.begin(), block.end());
    return rows;
}

inline std::vector<CsvRow> sweep_bandwidth(const ScenarioConfig& sc) {
    return run_sweep(sc, SweepAxis::bandwidth, linear_grid(sc.b_min_hz, sc.b_max_hz, sc.b_points));
}

inline std::vector<CsvRow> sweep_power(const ScenarioConfig& sc) {
    return run_sweep(sc, SweepAxis::power, linear_grid(sc.p_min_w, sc.p_max_w, sc.p_points));
}

struct Curve {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

/// Mean sum rate per scheme at each swept value, in grid order.
inline std::vector<Curve> average_curves(const std::vector<CsvRow>& rows, SweepAxis axis,
                                         const std::vector<Scheme>& schemes) {
    std::vector<Curve> curves;
    for (Scheme s : schemes) {
        Curve c{scheme_name(s), {}, {}};
        std::vector<double> count;
        for (const auto& r : rows) {
            if (r.scheme != s) continue;
            const double x = axis == SweepAxis::bandwidth ? r.b_hz : r.pbar_w;
            if (c.x.empty() || c.x.back() != x) {
                c.x.push_back(x);
                c.y.push_back(0.0);
                count.push_back(0.0);
            }
            c.y.back() += r.sum_rate_bps;
            count.back() += 1.0;
        }
        for (std::size_t i = 0; i < c.y.size(); ++i) c.y[i] /= count[i];
        curves.push_back(std::move(c));
    }
    return curves;
}

namespace detail {

/// Round tick step (1, 2 or 5 times a power of ten) giving about `target` ticks.
inline double nice_step(double span, int target) {
    const double raw = span / target;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    for (double f : {1.0, 2.0, 5.0}) {
        if (raw <= f * mag) return f * mag;
    }
    return 10.0 * mag;
}

inline std::string svg_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '<') out += "&lt;";
        else if (c == '>') out += "&gt;";
        else if (c == '&') out += "&amp;";
        else out += c;
    }
    return out;
}

}  // namespace detail

/// Line chart with axes, ticks and a legend. x and y are divided by the given
/// scales before plotting (e.g. Hz -> MHz).
inline std::string render_svg(const std::vector<Curve>& curves, const std::string& x_label, const std::string& y_label,
                              double x_scale = 1.0, double y_scale = 1.0) {
    constexpr double w = 720, h = 480, left = 80, right = 160, top = 30, bottom = 60;
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y1 = 0.0;
    for (const auto& c : curves) {
        for (double x : c.x) {
            x0 = std::min(x0, x / x_scale);
            x1 = std::max(x1, x / x_scale);
        }
        for (double y : c.y) y1 = std::max(y1, y / y_scale);
    }
    if (!std::isfinite(x0)) x0 = 0.0, x1 = 1.0;
    if (x1 <= x0) x1 = x0 + 1.0;
    if (y1 <= 0.0) y1 = 1.0;
    const double y_step = detail::nice_step(y1, 6);
    y1 = std::ceil(y1 / y_step) * y_step;
    const double pw = w - left - right, ph = h - top - bottom;
    auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return top + ph - y / y1 * ph; };
    auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", v);
        return std::string(buf);
    };
    auto label = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%g", v);
        return std::string(buf);
    };

    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
    std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(w) + "\" height=\"" + num(h) +
                    "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    const double x_step = detail::nice_step(x1 - x0, 8);
    for (double t = std::ceil(x0 / x_step) * x_step; t <= x1 + 1e-9 * x_step; t += x_step) {
        s += "<line x1=\"" + num(px(t)) + "\" y1=\"" + num(top) + "\" x2=\"" + num(px(t)) + "\" y2=\"" +
             num(top + ph) + "\" stroke=\"#e0e0e0\"/>\n";
        s += "<text x=\"" + num(px(t)) + "\" y=\"" + num(top + ph + 18) + "\" text-anchor=\"middle\">" + label(t) +
             "</text>\n";
    }
    for (double t = 0.0; t <= y1 + 1e-9 * y_step; t += y_step) {
        s += "<line x1=\"" + num(left) + "\" y1=\"" + num(py(t)) + "\" x2=\"" + num(left + pw) + "\" y2=\"" +
             num(py(t)) + "\" stroke=\"#e0e0e0\"/>\n";
        s += "<text x=\"" + num(left - 8) + "\" y=\"" + num(py(t) + 4) + "\" text-anchor=\"end\">" + label(t) +
             "</text>\n";
    }
    s += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
         "\" fill=\"none\" stroke=\"black\"/>\n";
    s += "<text x=\"" + num(left + pw / 2) + "\" y=\"" + num(h - 15) + "\" text-anchor=\"middle\">" +
         detail::svg_escape(x_label) + "</text>\n";
    s += "<text transform=\"translate(20," + num(top + ph / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
         detail::svg_escape(y_label) + "</text>\n";
    for (std::size_t i = 0; i < curves.size(); ++i) {
        const auto& c = curves[i];
        const char* color = colors[i % std::size(colors)];
        std::string pts;
        for (std::size_t k = 0; k < c.x.size(); ++k) {
            pts += (k ? " " : "") + num(px(c.x[k] / x_scale)) + "," + num(py(c.y[k] / y_scale));
        }
        s += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"2\" points=\"" + pts +
             "\"/>\n";
        for (std::size_t k = 0; k < c.x.size(); ++k) {
            s += "<circle cx=\"" + num(px(c.x[k] / x_scale)) + "\" cy=\"" + num(py(c.y[k] / y_scale)) +
                 "\" r=\"2.5\" fill=\"" + color + "\"/>\n";
        }
        const double ly = top + 20 + 20 * static_cast<double>(i);
        s += "<line x1=\"" + num(left + pw + 15) + "\" y1=\"" + num(ly) + "\" x2=\"" + num(left + pw + 40) +
             "\" y2=\"" + num(ly) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
        s += "<text x=\"" + num(left + pw + 46) + "\" y=\"" + num(ly + 4) + "\">" + detail::svg_escape(c.name) +
             "</text>\n";
    }
    s += "</svg>\n";
    return s;
}

}  // namespace semrelay
