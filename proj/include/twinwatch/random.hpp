#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string_view>

#include <nlohmann/json.hpp>

#include "twinwatch/hash.hpp"

namespace twinwatch {

/// N(mean, stddev²) with optional clamping of each draw.
struct NormalSpec {
    double mean = 0.0;
    double stddev = 1.0;
    std::optional<double> min_clamp;
    std::optional<double> max_clamp;

    /// Throws ValidationError(field) if stddev <= 0 or the clamps are inverted.
    void validate(const char* field) const;

    double clamp(double raw) const {
        if (min_clamp && raw < *min_clamp) return *min_clamp;
        if (max_clamp && raw > *max_clamp) return *max_clamp;
        return raw;
    }
};

/// Uniform integer distribution on [lo, hi].
struct IntRange {
    int lo = 1;
    int hi = 18;

    void validate(const char* field) const;
};

/// A named random stream derived from a master seed. Each concern of a
/// simulation draws from its own stream so event interleaving does not shift
/// the numbers another concern sees.
class RngStream {
public:
    RngStream(std::uint64_t master_seed, std::string_view name)
        : engine_(mix_seed({master_seed, fnv1a64(name)})) {}
    explicit RngStream(std::uint64_t derived_seed) : engine_(derived_seed) {}

    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
    double uniform(double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(engine_);
    }
    int uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine_); }
    double normal(double mean, double stddev) {
        return std::normal_distribution<double>(mean, stddev)(engine_);
    }
    bool bernoulli(double p) { return uniform() < p; }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

/// One normal draw with the clamps applied.
double sample_delay(const NormalSpec& spec, RngStream& rng);

/// Rounded, clamped normal count (never negative).
int sample_count(const NormalSpec& spec, RngStream& rng);

nlohmann::json to_json(const NormalSpec& spec);
NormalSpec normal_spec_from_json(const nlohmann::json& j, const NormalSpec& defaults);

}  // namespace twinwatch
