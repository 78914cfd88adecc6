#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace semrelay {

/// SplitMix64 (Steele, Lea, Flood 2014).
///
///   state += 0x9E3779B97F4A7C15
///   z = state
///   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///   return z ^ (z >> 31)
///
/// Uniform doubles take the top 53 bits: (next() >> 11) * 2^-53, in [0, 1).
/// Normals use the basic Box-Muller transform on two uniforms, both outputs
/// consumed in order (cos branch first). Streams are split by mixing a
/// stream id into the seed, so each (seed, stream) pair is reproducible in
/// any language that follows the recipe above.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    /// Independent generator for a named sub-stream.
    static SplitMix64 stream(std::uint64_t seed, std::uint64_t stream_id) {
        SplitMix64 mixer(seed ^ (stream_id * 0xD1B54A32D192ED03ULL));
        return SplitMix64(mixer.next());
    }

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace semrelay
