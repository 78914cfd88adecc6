#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "semrelay/channel.hpp"
#include "semrelay/semantic_model.hpp"
#include "semrelay/system_config.hpp"

// First-order surrogates used to convexify the power and bandwidth blocks.
// Each bound is affine in its own variable(s) and tangent to the target
// function at the expansion point. Lower bounds minorize a convex target,
// upper bounds majorize a concave one.

namespace semrelay {

enum class BoundDirection { lower, upper };

/// Which quantity an AffineBound is affine in.
enum class BoundVariable {
    logistic_exponent,  // t = exp(-(c1 * gamma + c2))
    power,              // P (W)
    alpha_br_and_s,     // (alpha_br, S)
    alpha,              // alpha_ru (fraction)
    alpha_br,           // alpha_br (fraction)
};

struct AffineBound {
    double constant = 0.0;
    std::vector<double> slope;
    std::vector<double> expansion_point;
    BoundDirection direction = BoundDirection::lower;
    BoundVariable variable = BoundVariable::power;

    double operator()(std::span<const double> v) const {
        if (v.size() != slope.size()) throw std::invalid_argument("AffineBound: dimension mismatch");
        double r = constant;
        for (std::size_t i = 0; i < v.size(); ++i) r += slope[i] * (v[i] - expansion_point[i]);
        return r;
    }
    double operator()(double v) const { return (*this)(std::span<const double>(&v, 1)); }
};

namespace detail {
inline AffineBound scalar_bound(double constant, double slope, double at, BoundDirection dir, BoundVariable var) {
    return AffineBound{constant, {slope}, {at}, dir, var};
}
}  // namespace detail

/// Lower bound on the backhaul bit rate, affine in t = exp(-(c1 gamma + c2)):
///   R_br >= E1 - E2 (t - t~)
/// E1 is the rate at gamma~, E2 = (alpha_br B mu / K) a2 / (1 + t~)^2.
inline AffineBound rbr_lower_bound(double gamma_tilde_db, double alpha_br, const SystemConfig& cfg,
                                   const SemanticModel& m) {
    const double scale = alpha_br * cfg.bandwidth_hz * m.bits_per_word / m.symbols_per_word;
    const double t = m.logistic_exponent(gamma_tilde_db);
    const double e1 = scale * (m.a1 + m.a2 / (1.0 + t));
    const double e2 = scale * m.a2 / ((1.0 + t) * (1.0 + t));
    return detail::scalar_bound(e1, -e2, t, BoundDirection::lower, BoundVariable::logistic_exponent);
}

/// Tangent upper bound on a user's rate in its power P around P~.
inline AffineBound phi_upper_bound(double p_tilde_w, double alpha, double h_sq, const SystemConfig& cfg) {
    if (!(alpha > 0.0)) throw std::domain_error("phi_upper_bound: alpha must be positive");
    const double w = alpha * cfg.bandwidth_hz;
    const double e3 = user_bit_rate(alpha, p_tilde_w, h_sq, cfg);
    const double e4 = w * h_sq / ((w * cfg.noise_psd_w_hz + h_sq * p_tilde_w) * std::numbers::ln2);
    return detail::scalar_bound(e3, e4, p_tilde_w, BoundDirection::upper, BoundVariable::power);
}

/// Tangent lower bound on delta = (alpha_br + S)^2 around (alpha~, S~):
///   delta >= -(a~ + S~)^2 + 2 (a~ + S~)(alpha_br + S)
inline AffineBound delta_lower_bound(double alpha_tilde, double s_tilde) {
    const double sum = alpha_tilde + s_tilde;
    return AffineBound{sum * sum, {2.0 * sum, 2.0 * sum}, {alpha_tilde, s_tilde}, BoundDirection::lower,
                       BoundVariable::alpha_br_and_s};
}

/// Right-hand side of the constraint S <= E5 - E6 (t - t~). The similarity
/// a1 + a2 / (1 + t) is convex in t, so this tangent minorizes it and the
/// constraint is an inner approximation of S <= similarity(gamma).
inline AffineBound s_upper_bound(double gamma_tilde_db, const SemanticModel& m) {
    const double t = m.logistic_exponent(gamma_tilde_db);
    const double e5 = m.a1 + m.a2 / (1.0 + t);
    const double e6 = m.a2 / ((1.0 + t) * (1.0 + t));
    return detail::scalar_bound(e5, -e6, t, BoundDirection::lower, BoundVariable::logistic_exponent);
}

/// Tangent upper bound on a user's rate in its bandwidth fraction around alpha~.
inline AffineBound rru_alpha_upper_bound(double alpha_tilde, double power_w, double h_sq, const SystemConfig& cfg) {
    if (!(alpha_tilde > 0.0)) throw std::domain_error("rru_alpha_upper_bound: alpha must be positive");
    const double b = cfg.bandwidth_hz;
    const double w = alpha_tilde * b;
    const double snr = h_sq * power_w / (w * cfg.noise_psd_w_hz);
    const double e7 = user_bit_rate(alpha_tilde, power_w, h_sq, cfg);
    const double e8 = b * std::log1p(snr) / std::numbers::ln2 -
                      std::numbers::log2e * b * h_sq * power_w / (w * cfg.noise_psd_w_hz + h_sq * power_w);
    return detail::scalar_bound(e7, e8, alpha_tilde, BoundDirection::upper, BoundVariable::alpha);
}

/// Tangent lower bound on psi(alpha_br) = snr_br_db(alpha_br), which is convex.
inline AffineBound psi_lower_bound(double alpha_tilde, const SystemConfig& cfg, const ChannelState& ch) {
    const double e9 = snr_br_db(alpha_tilde, cfg, ch);
    const double e10 = 10.0 / (alpha_tilde * std::numbers::ln10);
    return detail::scalar_bound(e9, -e10, alpha_tilde, BoundDirection::lower, BoundVariable::alpha_br);
}

}  // namespace semrelay
