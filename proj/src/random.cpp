#include "twinwatch/random.hpp"

#include <cmath>
#include <string>

#include "twinwatch/errors.hpp"

namespace twinwatch {

void NormalSpec::validate(const char* field) const {
    if (!std::isfinite(mean) || !(stddev > 0.0) || !std::isfinite(stddev)) {
        throw ValidationError(field, std::string(field) + ": stddev must be positive and finite");
    }
    if (min_clamp && max_clamp && *min_clamp > *max_clamp) {
        throw ValidationError(field, std::string(field) + ": min_clamp exceeds max_clamp");
    }
}

void IntRange::validate(const char* field) const {
    if (lo < 0 || hi < lo) {
        throw ValidationError(field, std::string(field) + ": require 0 <= lo <= hi");
    }
}

double sample_delay(const NormalSpec& spec, RngStream& rng) {
    return spec.clamp(rng.normal(spec.mean, spec.stddev));
}

int sample_count(const NormalSpec& spec, RngStream& rng) {
    const double v = std::round(sample_delay(spec, rng));
    return v < 0.0 ? 0 : static_cast<int>(v);
}

nlohmann::json to_json(const NormalSpec& spec) {
    nlohmann::json j{{"mean", spec.mean}, {"stddev", spec.stddev}};
    if (spec.min_clamp) j["min_clamp"] = *spec.min_clamp;
    if (spec.max_clamp) j["max_clamp"] = *spec.max_clamp;
    return j;
}

NormalSpec normal_spec_from_json(const nlohmann::json& j, const NormalSpec& defaults) {
    NormalSpec s = defaults;
    s.mean = j.value("mean", s.mean);
    s.stddev = j.value("stddev", s.stddev);
    if (j.contains("min_clamp")) {
        s.min_clamp = j["min_clamp"].is_null() ? std::nullopt
                                               : std::optional<double>(j["min_clamp"].get<double>());
    }
    if (j.contains("max_clamp")) {
        s.max_clamp = j["max_clamp"].is_null() ? std::nullopt
                                               : std::optional<double>(j["max_clamp"].get<double>());
    }
    return s;
}

}  // namespace twinwatch
