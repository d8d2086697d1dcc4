#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>

namespace ensf {

/// SplitMix64 finalizer. Used to derive independent seeds from coordinates.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Counter-based seed derivation: hashes a root seed together with an ordered
/// path of coordinates (repetition, role, cell index, member, ...). The result
/// depends only on the values, never on the order in which streams are built.
constexpr std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> path) noexcept {
    std::uint64_t h = splitmix64(root);
    for (std::uint64_t c : path) h = splitmix64(h ^ splitmix64(c + 0x632BE59BD9B4E019ULL));
    return h;
}

/// Stream roles for the twin-experiment seed tree.
enum class StreamRole : std::uint64_t {
    truth = 1,
    obs_noise = 2,
    filter = 3,
    shocks = 4,
    initial_ensemble = 5,
};

/// Seeded random stream.
///
/// Built on std::mt19937_64, whose output sequence is fixed by the standard.
/// Uniforms take the top 53 bits; normals use the Marsaglia polar transform
/// with the second variate cached. Nothing here goes through std:: distributions,
/// whose algorithms are implementation-defined.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform integer on [0, n), rejection-sampled to avoid modulo bias.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t r;
        do r = engine_();
        while (r >= limit);
        return r % n;
    }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        // Marsaglia polar method: rejection on the unit disc, no trigonometry.
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

    void fill_normal(std::span<double> out, double scale = 1.0) {
        for (double& v : out) v = scale * normal();
    }

    /// Seed for a child stream; advances this stream by one draw.
    std::uint64_t split() { return splitmix64(engine_()); }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace ensf
