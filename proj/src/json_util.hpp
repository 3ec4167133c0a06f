#pragma once

// Small helpers shared by the request/problem parsers. Type errors surface as
// ParseError, out-of-range values as ValidationError naming the field.

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "twinwatch/detection.hpp"
#include "twinwatch/errors.hpp"
#include "twinwatch/sim.hpp"

namespace twinwatch::detail {

template <typename T>
T field_as(const nlohmann::json& j, const char* key, const T& fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ParseError(std::string("field '") + key + "' has the wrong type");
    }
}

inline DetectionWeights weights_from_json(const nlohmann::json& j, const DetectionWeights& fallback) {
    if (!j.contains("weights") || j.at("weights").is_null()) return fallback;
    const auto& w = j.at("weights");
    if (!w.is_object()) throw ParseError("field 'weights' must be an object");
    DetectionWeights out{field_as(w, "w_a", fallback.w_a), field_as(w, "w_d", fallback.w_d),
                         field_as(w, "w_n", fallback.w_n)};
    out.validate();
    return out;
}

inline nlohmann::json to_json(const DetectionWeights& w) {
    return {{"w_a", w.w_a}, {"w_d", w.w_d}, {"w_n", w.w_n}};
}

inline std::vector<Period> periods_from_json(const nlohmann::json& j, const std::vector<Period>& fallback) {
    std::vector<std::string> names;
    if (j.contains("period") && !j.at("period").is_null()) {
        names.push_back(field_as<std::string>(j, "period", ""));
    } else if (j.contains("periods") && !j.at("periods").is_null()) {
        names = field_as<std::vector<std::string>>(j, "periods", {});
    } else {
        return fallback;
    }
    std::vector<Period> out;
    for (const auto& n : names) out.push_back(period_from_string(n));
    if (out.empty()) throw ValidationError("periods", "at least one period is required");
    return out;
}

inline std::vector<int> scenarios_from_json(const nlohmann::json& j, const std::vector<int>& fallback) {
    std::vector<int> out;
    if (j.contains("scenario") && !j.at("scenario").is_null()) {
        out.push_back(field_as<int>(j, "scenario", 0));
    } else if (j.contains("scenarios") && !j.at("scenarios").is_null()) {
        out = field_as<std::vector<int>>(j, "scenarios", {});
    } else {
        return fallback;
    }
    if (out.empty()) throw ValidationError("scenarios", "at least one scenario is required");
    for (const int s : out) {
        if (s < 1 || s > 3) throw ValidationError("scenarios", "scenario must be 1, 2 or 3");
    }
    return out;
}

inline std::vector<Camera> cameras_from_json(const nlohmann::json& j) {
    if (!j.is_array()) throw ParseError("field 'cameras' must be an array");
    std::vector<Camera> out;
    try {
        for (const auto& c : j) out.push_back(camera_from_json(c));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed camera: ") + e.what());
    }
    for (const auto& c : out) validate_camera(c);
    return out;
}

inline nlohmann::json cameras_to_json(const std::vector<Camera>& cameras) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& c : cameras) out.push_back(camera_to_json(c));
    return out;
}

}  // namespace twinwatch::detail
