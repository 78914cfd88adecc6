#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "semrelay/rng.hpp"
#include "semrelay/system_config.hpp"

namespace semrelay {

/// Linear power gains of the two hops.
struct ChannelState {
    double h_br_sq = 0.0;
    std::vector<double> h_ru_sq;

    std::size_t n_users() const { return h_ru_sq.size(); }

    void validate(std::size_t n_users) const {
        if (!(h_br_sq > 0.0)) throw std::invalid_argument("channel: BS-relay gain must be positive");
        if (h_ru_sq.size() != n_users) throw std::invalid_argument("channel: user gain count mismatch");
        for (double g : h_ru_sq) {
            if (!(g > 0.0)) throw std::invalid_argument("channel: user gains must be positive");
        }
    }
};

struct Geometry {
    double d_br_m = 60.0;
    std::vector<double> d_ru_m;
    double rho0 = 1e-6;  // path loss at 1 m, linear
    double beta = 3.5;
    double rician_k_db = 20.0;
};

/// Power-law path loss referenced to 1 m.
inline double path_loss(double d_m, double rho0, double beta) {
    if (!(d_m > 0.0)) throw std::domain_error("path_loss: distance must be positive");
    return rho0 * std::pow(d_m, -beta);
}

/// One draw of |sqrt(k/(k+1)) + sqrt(1/(k+1)) z|^2, z ~ CN(0, 1). Unit mean.
/// k_db = +inf is pure line of sight and returns exactly 1.
inline double sample_rician_gain(double k_db, SplitMix64& rng) {
    if (std::isinf(k_db) && k_db > 0.0) return 1.0;
    const double kappa = std::pow(10.0, k_db / 10.0);
    const double los = std::sqrt(kappa / (kappa + 1.0));
    const double nlos = std::sqrt(1.0 / (kappa + 1.0));
    const double re = los + nlos * rng.normal() * std::numbers::sqrt2 / 2.0;
    const double im = nlos * rng.normal() * std::numbers::sqrt2 / 2.0;
    return re * re + im * im;
}

/// Users uniform (by area) on the annulus [min_d, max_d] around the relay.
inline std::vector<double> place_users(std::size_t n_users, double max_d_m, double min_d_m, std::uint64_t seed) {
    if (!(max_d_m > min_d_m && min_d_m > 0.0)) throw std::invalid_argument("place_users: need 0 < min < max");
    auto rng = SplitMix64::stream(seed, 1);
    std::vector<double> d(n_users);
    for (auto& di : d) {
        const double u = rng.uniform();
        di = std::sqrt(min_d_m * min_d_m + u * (max_d_m * max_d_m - min_d_m * min_d_m));
    }
    return d;
}

/// Channel realization for a geometry. With deterministic_los the fading
/// factor is forced to 1 so only path loss remains.
inline ChannelState make_channel(const Geometry& g, std::uint64_t seed, bool deterministic_los) {
    ChannelState ch;
    auto rng = SplitMix64::stream(seed, 2);
    auto fading = [&] { return deterministic_los ? 1.0 : sample_rician_gain(g.rician_k_db, rng); };
    ch.h_br_sq = path_loss(g.d_br_m, g.rho0, g.beta) * fading();
    ch.h_ru_sq.reserve(g.d_ru_m.size());
    for (double d : g.d_ru_m) ch.h_ru_sq.push_back(path_loss(d, g.rho0, g.beta) * fading());
    return ch;
}

/// Received backhaul SNR in dB at bandwidth fraction alpha_br.
inline double snr_br_db(double alpha_br, const SystemConfig& cfg, const ChannelState& ch) {
    if (!(alpha_br > 0.0)) throw std::domain_error("snr_br_db: alpha_br must be positive");
    const double snr = ch.h_br_sq * cfg.bs_power_w / (alpha_br * cfg.bandwidth_hz * cfg.noise_psd_w_hz);
    if (!(snr > 0.0)) throw std::domain_error("snr_br_db: non-positive SNR");
    return 10.0 * std::log10(snr);
}

/// Shannon rate (bits/s) of one relay-user link. Zero at alpha = 0.
inline double user_bit_rate(double alpha, double power_w, double h_sq, const SystemConfig& cfg) {
    if (alpha <= 0.0 || power_w <= 0.0) return 0.0;
    const double w = alpha * cfg.bandwidth_hz;
    return w * std::log1p(h_sq * power_w / (w * cfg.noise_psd_w_hz)) / std::numbers::ln2;
}

}  // namespace semrelay
