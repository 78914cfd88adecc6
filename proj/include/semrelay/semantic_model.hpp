#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

namespace semrelay {

/// Logistic surrogate for the semantic similarity of a learned text codec,
/// plus the constants that turn it into a bit-equivalent backhaul rate.
///
/// similarity(gamma_db) = a1 + a2 / (1 + exp(-(c1 * gamma_db + c2)))
struct SemanticModel {
    double a1 = 0.3760;
    double a2 = 0.5970;
    double c1 = 0.2634;
    double c2 = -0.8151;
    double symbols_per_word = 5.0;  // K
    double bits_per_word = 40.0;    // mu
    double eps_bar = 0.9;           // required minimum similarity

    // Only needed for the suts/s rate; they cancel in the bit-equivalent rate.
    std::optional<double> words_per_sentence;   // L
    std::optional<double> suts_per_sentence;    // I

    /// Throws std::invalid_argument naming the first violated invariant.
    void validate() const {
        auto fail = [](const std::string& what) { throw std::invalid_argument("semantic model: " + what); };
        if (!(a1 >= 0.0)) fail("a1 must be >= 0");
        if (!(a2 > 0.0)) fail("a2 must be > 0");
        if (!(a1 + a2 <= 1.0)) fail("a1 + a2 must be <= 1");
        if (!(c1 > 0.0)) fail("c1 must be > 0");
        if (!std::isfinite(c2)) fail("c2 must be finite");
        if (!(symbols_per_word >= 1.0)) fail("K must be >= 1");
        if (!(bits_per_word > 0.0)) fail("mu must be > 0");
        if (!(eps_bar > a1 && eps_bar < a1 + a2)) fail("eps_bar must lie in (a1, a1 + a2)");
    }

    /// Upper asymptote of the similarity curve.
    double saturation() const { return a1 + a2; }

    /// exp(-(c1 * gamma_db + c2)); the variable the SCA bounds are affine in.
    double logistic_exponent(double gamma_db) const { return std::exp(-(c1 * gamma_db + c2)); }
};

/// Semantic similarity at a receive SNR given in dB. Strictly increasing,
/// valued in (a1, a1 + a2). gamma_db = +inf is accepted and gives a1 + a2.
inline double similarity(double gamma_db, const SemanticModel& m) {
    const double z = m.c1 * gamma_db + m.c2;
    // 1 / (1 + e^{-z}) evaluated without overflow for large |z|.
    const double sig = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    return m.a1 + m.a2 * sig;
}

/// Smallest SNR (dB) whose similarity reaches eps_bar.
inline double min_snr_threshold(const SemanticModel& m) {
    if (!(m.eps_bar > m.a1 && m.eps_bar < m.a1 + m.a2)) {
        throw std::domain_error("min_snr_threshold: eps_bar outside (a1, a1 + a2)");
    }
    return std::log((m.eps_bar - m.a1) / (m.a1 + m.a2 - m.eps_bar)) / m.c1 - m.c2 / m.c1;
}

/// Effective semantic rate in suts/s over a backhaul of alpha_br * bandwidth_hz.
inline double semantic_rate(double alpha_br, double bandwidth_hz, double gamma_db, const SemanticModel& m) {
    if (!m.suts_per_sentence || !m.words_per_sentence) {
        throw std::invalid_argument("semantic_rate: suts_per_sentence and words_per_sentence must be set");
    }
    return alpha_br * bandwidth_hz * *m.suts_per_sentence / (m.symbols_per_word * *m.words_per_sentence) *
           similarity(gamma_db, m);
}

/// Semantic-to-bit rate (bits/s) of the backhaul: mu * alpha_br * B / K * similarity.
inline double bit_equivalent_rate(double alpha_br, double bandwidth_hz, double gamma_db, const SemanticModel& m) {
    if (alpha_br == 0.0) return 0.0;
    return m.bits_per_word * alpha_br * bandwidth_hz / m.symbols_per_word * similarity(gamma_db, m);
}

}  // namespace semrelay
