#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "twinwatch/sim.hpp"

namespace twinwatch {

/// Which parameters of one camera the optimizer may change.
struct CameraFreedom {
    std::string camera_id;
    /// Pan bounds in degrees. A span of 360 or more wraps around.
    std::optional<std::pair<double, double>> pan;
    /// Slide along the mount segment the camera sits on (parameter in [0, 1]).
    bool position = false;
};

struct ObjectiveConfig {
    ObservationMode mode = ObservationMode::Geometric;
    std::vector<Period> periods{Period::Morning};
    std::vector<int> scenarios{1, 2, 3};
    DetectionWeights weights;
    DetectionThreshold threshold;
    int replications = 8;
    std::uint64_t seed = 0;
    double duration_s = 3600.0;
    /// Traffic, delays and the rest; cameras and observation flags are overridden.
    SimConfig sim;
};

struct OptimizationProblem {
    StationLayout layout;
    std::vector<Camera> cameras;
    std::vector<CameraFreedom> free;
    ObjectiveConfig objective;
    int budget = 400;  // objective evaluations
    int restarts = 4;  // random starts after the one from the initial cameras
    std::uint64_t seed = 0;

    void validate() const;
};

enum class ParamKind { Pan, Position };

struct ParamSpec {
    std::size_t camera = 0;  // index into OptimizationProblem::cameras
    ParamKind kind = ParamKind::Pan;
    double lo = 0.0;
    double hi = 360.0;
    bool wraps = false;
    std::string mount;  // position parameters only
};

/// Flattened parameter list in the order of `problem.free`, pan before position.
std::vector<ParamSpec> parameter_specs(const OptimizationProblem& problem);
/// Parameter vector describing the problem's initial cameras.
std::vector<double> initial_params(const OptimizationProblem& problem);
/// Cameras with the parameter vector applied. Throws ValidationError("params")
/// for values outside the bounds.
std::vector<Camera> apply_params(const OptimizationProblem& problem, const std::vector<double>& params);

/// Accuracy estimator with the suspect traffic simulated once. Every candidate
/// is scored on the same recorded replications, so the value is a
/// deterministic function of the cameras.
class ObjectiveEvaluator {
public:
    ObjectiveEvaluator(const StationLayout& layout, const ObjectiveConfig& config);
    ~ObjectiveEvaluator();
    ObjectiveEvaluator(ObjectiveEvaluator&&) noexcept;
    ObjectiveEvaluator& operator=(ObjectiveEvaluator&&) noexcept;

    /// Share of recorded suspects detected by the cameras.
    double accuracy(const std::vector<Camera>& cameras);
    int suspect_count() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

double evaluate_objective(const OptimizationProblem& problem, const std::vector<double>& params);

struct TraceEntry {
    int iteration = 0;
    int restart = 0;
    double step = 0.0;  // pan step in degrees; 0 for start points
    std::vector<double> params;
    double objective = 0.0;
    double best = 0.0;
};

struct OptimizationTrace {
    std::vector<TraceEntry> entries;
    int best_index = 0;
};

struct OptimizationResult {
    std::vector<Camera> cameras;
    std::vector<double> params;
    double initial_objective = 0.0;
    double best_objective = 0.0;
    OptimizationTrace trace;
    int evaluations = 0;
    bool budget_exhausted = false;
};

using TraceCallback = std::function<void(const TraceEntry&)>;

/// Coordinate hill-climbing with pan steps 16, 8, 4, 2 and 1 degrees (position
/// steps are a hundredth of that) and seeded random restarts.
OptimizationResult optimize(const OptimizationProblem& problem, const TraceCallback& on_entry = {});

/// Reads a problem body. Cameras come from "cameras" or a preset of `layout`.
OptimizationProblem problem_from_json(const nlohmann::json& j, const StationLayout& layout);
nlohmann::json to_json(const TraceEntry& entry);
nlohmann::json to_json(const OptimizationResult& result);

}  // namespace twinwatch
