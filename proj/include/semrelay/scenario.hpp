#pragma once

#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "semrelay/baselines.hpp"
#include "semrelay/channel.hpp"
#include "semrelay/semantic_model.hpp"
#include "semrelay/system_config.hpp"

namespace semrelay {

enum class Scheme { proposed, equal_bw, equal_power, df };

inline const char* scheme_name(Scheme s) {
    switch (s) {
        case Scheme::proposed: return "proposed";
        case Scheme::equal_bw: return "equal-bw";
        case Scheme::equal_power: return "equal-power";
        case Scheme::df: return "df";
    }
    return "?";
}

inline const std::vector<Scheme>& all_schemes() {
    static const std::vector<Scheme> s{Scheme::proposed, Scheme::equal_bw, Scheme::equal_power, Scheme::df};
    return s;
}

/// Thrown for any config problem. key() is "section.name", or empty when the
/// problem is not tied to one key (unreadable file, INI syntax).
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, const std::string& what)
        : std::runtime_error(key.empty() ? what : "config key '" + key + "': " + what), key_(std::move(key)) {}
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

/// "proposed", "equal-bw", "equal-power", "df" or "all".
inline std::vector<Scheme> parse_schemes(const std::string& text, const std::string& key = "run.schemes") {
    std::vector<Scheme> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        item = b == std::string::npos ? "" : item.substr(b, e - b + 1);
        if (item == "all") {
            out.insert(out.end(), all_schemes().begin(), all_schemes().end());
            continue;
        }
        bool found = false;
        for (Scheme s : all_schemes()) {
            if (item == scheme_name(s)) {
                out.push_back(s);
                found = true;
            }
        }
        if (!found) throw ConfigError(key, "unknown scheme '" + item + "'");
    }
    if (out.empty()) throw ConfigError(key, "no scheme given");
    return out;
}

/// One scenario: link constants, semantic model, geometry, solver and run
/// settings. Defaults are the reference simulation setup.
struct ScenarioConfig {
    // [system]
    std::size_t n_users = 10;
    double b_total_hz = 10e6;
    double p_bs_w = 2.0;
    double p_relay_budget_w = 1.0;
    double n0_dbm_hz = -169.0;
    std::vector<double> weights;  // empty: all ones

    // [semantic]
    SemanticModel semantic;

    // [geometry]
    double d_br_m = 60.0;
    double max_user_distance_m = 40.0;
    double min_user_distance_m = 1.0;
    std::vector<double> user_distances_m;  // empty: random placement per seed
    double rho0_db = -60.0;
    double beta = 3.5;
    double rician_k_db = 20.0;

    // [solver]
    double tau = 1e-6;
    int max_iter = 100;

    // [run]
    std::uint64_t seed = 1;
    bool deterministic_los = false;
    std::vector<Scheme> schemes{all_schemes()};
    EqualSplit split = EqualSplit::half_backhaul;
    int realizations = 100;
    double b_min_hz = 1e6;
    double b_max_hz = 20e6;
    int b_points = 20;
    double p_min_w = 0.1;
    double p_max_w = 4.0;
    int p_points = 40;
    int threads = 0;  // 0: hardware concurrency

    SystemConfig system(double b_hz, double pbar_w) const {
        SystemConfig cfg;
        cfg.bandwidth_hz = b_hz;
        cfg.bs_power_w = p_bs_w;
        cfg.relay_budget_w = pbar_w;
        cfg.noise_psd_w_hz = dbm_to_watt(n0_dbm_hz);
        cfg.weights = weights.empty() ? std::vector<double>(n_users, 1.0) : weights;
        cfg.validate();
        return cfg;
    }
    SystemConfig system() const { return system(b_total_hz, p_relay_budget_w); }

    Geometry geometry(std::uint64_t s) const {
        Geometry g;
        g.d_br_m = d_br_m;
        g.rho0 = db_to_linear(rho0_db);
        g.beta = beta;
        g.rician_k_db = rician_k_db;
        g.d_ru_m = user_distances_m.empty() ? place_users(n_users, max_user_distance_m, min_user_distance_m, s)
                                            : user_distances_m;
        return g;
    }

    ChannelState channel(std::uint64_t s) const { return make_channel(geometry(s), s, deterministic_los); }

    BcdOptions bcd_options() const {
        BcdOptions opt;
        opt.tau = tau;
        opt.max_iter = max_iter;
        return opt;
    }
};

namespace detail {

inline double parse_number(const std::string& key, const std::string& text) {
    const char* begin = text.c_str();
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(begin, &end);
    while (end && (*end == ' ' || *end == '\t')) ++end;
    if (end == begin || *end != '\0' || errno == ERANGE) throw ConfigError(key, "expected a number, got '" + text + "'");
    if (!std::isfinite(v)) throw ConfigError(key, "value must be finite");
    return v;
}

inline long long parse_integer(const std::string& key, const std::string& text) {
    const double v = parse_number(key, text);
    if (v != std::floor(v) || std::abs(v) > 9.0e15) throw ConfigError(key, "expected an integer, got '" + text + "'");
    return static_cast<long long>(v);
}

inline bool parse_bool(const std::string& key, const std::string& text) {
    if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
    if (text == "false" || text == "0" || text == "no" || text == "off") return false;
    throw ConfigError(key, "expected true/false, got '" + text + "'");
}

inline std::vector<double> parse_list(const std::string& key, const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_number(key, item));
    return out;
}

inline void require(bool ok, const std::string& key, const std::string& what) {
    if (!ok) throw ConfigError(key, what);
}

}  // namespace detail

/// Parses INI text. Unknown sections or keys, malformed values and
/// out-of-range values raise ConfigError naming the key.
inline ScenarioConfig parse_scenario(std::istream& in) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError("", "config syntax error at line " + std::to_string(e.line()) + ": " + e.message());
    }

    ScenarioConfig c;
    using detail::parse_bool, detail::parse_integer, detail::parse_list, detail::parse_number;
    using Setter = std::function<void(const std::string&, const std::string&)>;
    auto num = [](double& field) -> Setter {
        return [&field](const std::string& k, const std::string& v) { field = parse_number(k, v); };
    };
    auto integer = [](int& field) -> Setter {
        return [&field](const std::string& k, const std::string& v) {
            const long long x = parse_integer(k, v);
            detail::require(x >= -2147483647LL && x <= 2147483647LL, k, "value out of range");
            field = static_cast<int>(x);
        };
    };
    auto optional_num = [](std::optional<double>& field) -> Setter {
        return [&field](const std::string& k, const std::string& v) { field = parse_number(k, v); };
    };

    SemanticModel& m = c.semantic;
    const std::map<std::string, std::map<std::string, Setter>> keys{
        {"system",
         {{"n_users",
           [&](const std::string& k, const std::string& v) {
               const long long n = parse_integer(k, v);
               detail::require(n >= 1 && n <= 1000, k, "must be in [1, 1000]");
               c.n_users = static_cast<std::size_t>(n);
           }},
          {"b_total_hz", num(c.b_total_hz)},
          {"p_bs_w", num(c.p_bs_w)},
          {"p_relay_budget_w", num(c.p_relay_budget_w)},
          {"n0_dbm_hz", num(c.n0_dbm_hz)},
          {"weights", [&](const std::string& k, const std::string& v) { c.weights = parse_list(k, v); }}}},
        {"semantic",
         {{"a1", num(m.a1)},
          {"a2", num(m.a2)},
          {"c1", num(m.c1)},
          {"c2", num(m.c2)},
          {"symbols_per_word", num(m.symbols_per_word)},
          {"bits_per_word", num(m.bits_per_word)},
          {"eps_bar", num(m.eps_bar)},
          {"words_per_sentence", optional_num(m.words_per_sentence)},
          {"suts_per_sentence", optional_num(m.suts_per_sentence)}}},
        {"geometry",
         {{"d_br_m", num(c.d_br_m)},
          {"max_user_distance_m", num(c.max_user_distance_m)},
          {"min_user_distance_m", num(c.min_user_distance_m)},
          {"user_distances_m",
           [&](const std::string& k, const std::string& v) { c.user_distances_m = parse_list(k, v); }},
          {"rho0_db", num(c.rho0_db)},
          {"beta", num(c.beta)},
          {"rician_k_db", num(c.rician_k_db)}}},
        {"solver", {{"tau", num(c.tau)}, {"max_iter", integer(c.max_iter)}}},
        {"run",
         {{"seed",
           [&](const std::string& k, const std::string& v) {
               const long long s = parse_integer(k, v);
               detail::require(s >= 0, k, "must be >= 0");
               c.seed = static_cast<std::uint64_t>(s);
           }},
          {"deterministic_los", [&](const std::string& k, const std::string& v) { c.deterministic_los = parse_bool(k, v); }},
          {"schemes", [&](const std::string& k, const std::string& v) { c.schemes = parse_schemes(v, k); }},
          {"split",
           [&](const std::string& k, const std::string& v) {
               if (v == "half-backhaul") c.split = EqualSplit::half_backhaul;
               else if (v == "all-links") c.split = EqualSplit::all_links;
               else throw ConfigError(k, "expected half-backhaul or all-links, got '" + v + "'");
           }},
          {"realizations", integer(c.realizations)},
          {"b_min_hz", num(c.b_min_hz)},
          {"b_max_hz", num(c.b_max_hz)},
          {"b_points", integer(c.b_points)},
          {"p_min_w", num(c.p_min_w)},
          {"p_max_w", num(c.p_max_w)},
          {"p_points", integer(c.p_points)},
          {"threads", integer(c.threads)}}},
    };

    for (const auto& [section, body] : tree) {
        const auto sec = keys.find(section);
        if (body.empty() && !body.data().empty()) throw ConfigError(section, "key outside any section");
        if (sec == keys.end()) throw ConfigError(section, "unknown section");
        for (const auto& [name, value] : body) {
            const std::string key = section + "." + name;
            const auto it = sec->second.find(name);
            if (it == sec->second.end()) throw ConfigError(key, "unknown key");
            it->second(key, value.data());
        }
    }

    using detail::require;
    require(c.b_total_hz > 0.0, "system.b_total_hz", "must be > 0");
    require(c.p_bs_w >= 0.0, "system.p_bs_w", "must be >= 0");
    require(c.p_relay_budget_w >= 0.0, "system.p_relay_budget_w", "must be >= 0");
    require(c.weights.empty() || c.weights.size() == c.n_users, "system.weights", "need one weight per user");
    for (double w : c.weights) require(w >= 0.0, "system.weights", "weights must be >= 0");
    require(c.d_br_m > 0.0, "geometry.d_br_m", "must be > 0");
    require(c.min_user_distance_m > 0.0, "geometry.min_user_distance_m", "must be > 0");
    require(c.max_user_distance_m > c.min_user_distance_m, "geometry.max_user_distance_m",
            "must exceed min_user_distance_m");
    require(c.user_distances_m.empty() || c.user_distances_m.size() == c.n_users, "geometry.user_distances_m",
            "need one distance per user");
    for (double d : c.user_distances_m) require(d > 0.0, "geometry.user_distances_m", "distances must be > 0");
    require(c.beta > 0.0, "geometry.beta", "must be > 0");
    require(c.tau > 0.0, "solver.tau", "must be > 0");
    require(c.max_iter >= 1, "solver.max_iter", "must be >= 1");
    require(c.realizations >= 1, "run.realizations", "must be >= 1");
    require(c.b_min_hz > 0.0, "run.b_min_hz", "must be > 0");
    require(c.b_max_hz >= c.b_min_hz, "run.b_max_hz", "must be >= b_min_hz");
    require(c.b_points >= 1, "run.b_points", "must be >= 1");
    require(c.p_min_w >= 0.0, "run.p_min_w", "must be >= 0");
    require(c.p_max_w >= c.p_min_w, "run.p_max_w", "must be >= p_min_w");
    require(c.p_points >= 1, "run.p_points", "must be >= 1");
    require(c.threads >= 0, "run.threads", "must be >= 0");
    try {
        m.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError("semantic", e.what());
    }
    return c;
}

inline ScenarioConfig load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot open config file '" + path + "'");
    return parse_scenario(in);
}

}  // namespace semrelay
