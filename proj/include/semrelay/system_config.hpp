#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace semrelay {

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double x) { return 10.0 * std::log10(x); }
/// dBm/Hz to W/Hz.
inline double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

/// Link-level constants of the downlink. All quantities are linear SI.
struct SystemConfig {
    double bandwidth_hz = 10e6;           // B
    double bs_power_w = 2.0;              // P_b
    double relay_budget_w = 1.0;          // relay power budget
    double noise_psd_w_hz = dbm_to_watt(-169.0);  // N0
    std::vector<double> weights;          // one per user

    std::size_t n_users() const { return weights.size(); }

    void validate() const {
        auto fail = [](const std::string& what) { throw std::invalid_argument("system config: " + what); };
        if (!(bandwidth_hz > 0.0) || !std::isfinite(bandwidth_hz)) fail("bandwidth must be positive");
        if (!(bs_power_w >= 0.0)) fail("BS power must be >= 0");
        if (!(relay_budget_w >= 0.0)) fail("relay budget must be >= 0");
        if (!(noise_psd_w_hz > 0.0)) fail("noise density must be positive");
        if (weights.empty()) fail("at least one user is required");
        for (double w : weights) {
            if (!(w >= 0.0) || !std::isfinite(w)) fail("weights must be finite and >= 0");
        }
    }
};

inline SystemConfig make_system(std::size_t n_users, double bandwidth_hz, double relay_budget_w) {
    SystemConfig cfg;
    cfg.bandwidth_hz = bandwidth_hz;
    cfg.relay_budget_w = relay_budget_w;
    cfg.weights.assign(n_users, 1.0);
    return cfg;
}

}  // namespace semrelay
