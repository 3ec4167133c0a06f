#include "twinwatch/optimizer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>

#include "json_util.hpp"
#include "twinwatch/errors.hpp"
#include "twinwatch/hash.hpp"

namespace twinwatch {

using json = nlohmann::json;

namespace {

constexpr std::array<double, 5> kPanSteps{16.0, 8.0, 4.0, 2.0, 1.0};
constexpr double kPositionStepScale = 0.01;  // position step = pan step / 100

// Keeps parameter vectors usable as map keys after repeated +/- steps.
double tidy(double v) { return std::round(v * 1e9) / 1e9; }

double wrap_into(double v, double lo) {
    double r = std::fmod(v - lo, 360.0);
    if (r < 0.0) r += 360.0;
    return tidy(lo + r);
}

const Camera& find_camera(const std::vector<Camera>& cameras, const std::string& id, std::size_t* index) {
    for (std::size_t i = 0; i < cameras.size(); ++i) {
        if (cameras[i].id == id) {
            if (index) *index = i;
            return cameras[i];
        }
    }
    throw ValidationError("free", "no camera named '" + id + "'");
}

}  // namespace

void OptimizationProblem::validate() const {
    if (cameras.empty()) throw ValidationError("cameras", "at least one camera is required");
    std::set<std::string> ids;
    for (const auto& c : cameras) {
        validate_camera(c);
        if (!ids.insert(c.id).second) throw ValidationError(c.id, "duplicate camera id '" + c.id + "'");
    }
    std::set<std::string> freed;
    for (const auto& f : free) {
        const Camera& cam = find_camera(cameras, f.camera_id, nullptr);
        if (!freed.insert(f.camera_id).second) {
            throw ValidationError("free", "camera '" + f.camera_id + "' listed twice");
        }
        if (f.pan) {
            const auto [lo, hi] = *f.pan;
            if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi)) {
                throw ValidationError("free", "pan range of '" + f.camera_id + "' must satisfy min < max");
            }
        }
        if (f.position && !layout.mount_for(cam.position)) {
            throw ValidationError(f.camera_id, "camera '" + f.camera_id + "' is not on a mount segment");
        }
    }
    if (parameter_specs(*this).empty()) throw ValidationError("free", "no free parameters to optimize");
    if (objective.mode != ObservationMode::Geometric) {
        throw ValidationError("mode", "camera poses only matter in geometric mode");
    }
    if (objective.replications < 1) throw ValidationError("replications", "replications must be at least 1");
    if (objective.periods.empty()) throw ValidationError("periods", "at least one period is required");
    if (objective.scenarios.empty()) throw ValidationError("scenarios", "at least one scenario is required");
    if (!(objective.duration_s > 0.0)) throw ValidationError("duration_s", "duration must be positive");
    objective.weights.validate();
    objective.threshold.validate();
    if (budget < 1) throw ValidationError("budget", "budget must allow at least one evaluation");
    if (restarts < 0) throw ValidationError("restarts", "restarts must be non-negative");
}

std::vector<ParamSpec> parameter_specs(const OptimizationProblem& problem) {
    std::vector<ParamSpec> specs;
    for (const auto& f : problem.free) {
        std::size_t index = 0;
        const Camera& cam = find_camera(problem.cameras, f.camera_id, &index);
        if (f.pan) {
            const auto [lo, hi] = *f.pan;
            const bool wraps = hi - lo >= 360.0;
            specs.push_back({index, ParamKind::Pan, lo, wraps ? lo + 360.0 : hi, wraps, {}});
        }
        if (f.position) {
            const MountSegment* m = problem.layout.mount_for(cam.position);
            specs.push_back({index, ParamKind::Position, 0.0, 1.0, false, m ? m->id : std::string()});
        }
    }
    return specs;
}

std::vector<double> initial_params(const OptimizationProblem& problem) {
    std::vector<double> params;
    for (const auto& s : parameter_specs(problem)) {
        const Camera& cam = problem.cameras[s.camera];
        if (s.kind == ParamKind::Pan) {
            params.push_back(s.wraps ? wrap_into(cam.pan_azimuth, s.lo) : cam.pan_azimuth);
        } else {
            const MountSegment* m = problem.layout.mount(s.mount);
            params.push_back(tidy(std::clamp(segment_parameter(cam.position, m->a, m->b), 0.0, 1.0)));
        }
    }
    return params;
}

std::vector<Camera> apply_params(const OptimizationProblem& problem, const std::vector<double>& params) {
    const auto specs = parameter_specs(problem);
    if (params.size() != specs.size()) {
        throw ValidationError("params", "expected " + std::to_string(specs.size()) + " parameters");
    }
    std::vector<Camera> cameras = problem.cameras;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const ParamSpec& s = specs[i];
        const double v = params[i];
        const bool inside = s.wraps ? (v >= s.lo && v < s.hi) : (v >= s.lo && v <= s.hi);
        if (!std::isfinite(v) || !inside) {
            throw ValidationError("params", "parameter " + std::to_string(i) + " is out of bounds");
        }
        Camera& cam = cameras[s.camera];
        if (s.kind == ParamKind::Pan) {
            cam.pan_azimuth = v;
        } else {
            cam.position = problem.layout.mount(s.mount)->at(v);
        }
    }
    return cameras;
}

struct ObjectiveEvaluator::Impl {
    struct Snap {
        Point2D position;
        Point2D heading;
        int suspect;  // index into the recorded suspects, -1 for other passengers
    };

    DetectionWeights weights;
    DetectionThreshold threshold;
    NormalizationBounds bounds;
    std::vector<Snap> snaps;
    std::vector<std::size_t> frame_start;  // frame f spans [frame_start[f], frame_start[f + 1])
    int suspects = 0;
    std::map<std::array<double, 6>, std::vector<double>> columns;

    const std::vector<double>& column(const Camera& cam) {
        const std::array<double, 6> key{cam.position.x, cam.position.y, cam.pan_azimuth,
                                        cam.fov_deg,    cam.min_range_m, cam.max_range_m};
        if (const auto it = columns.find(key); it != columns.end()) return it->second;

        std::vector<double> best(static_cast<std::size_t>(suspects), -1.0);
        std::vector<std::pair<std::size_t, double>> in_view;
        const int n_cap = static_cast<int>(bounds.n_max);
        for (std::size_t f = 0; f + 1 < frame_start.size(); ++f) {
            in_view.clear();
            for (std::size_t i = frame_start[f]; i < frame_start[f + 1]; ++i) {
                if (const auto d = camera_sees(cam, snaps[i].position)) in_view.emplace_back(i, *d);
            }
            if (in_view.empty()) continue;
            const int n = std::min(static_cast<int>(in_view.size()), n_cap);
            for (const auto& [i, d] : in_view) {
                const Snap& s = snaps[i];
                if (s.suspect < 0) continue;
                const double p = detection_probability(angular_deviation_deg(cam, s.heading), d, n, weights, bounds);
                double& slot = best[static_cast<std::size_t>(s.suspect)];
                slot = std::max(slot, p);
            }
        }
        return columns.emplace(key, std::move(best)).first->second;
    }
};

ObjectiveEvaluator::ObjectiveEvaluator(const StationLayout& layout, const ObjectiveConfig& config)
    : impl_(std::make_unique<Impl>()) {
    if (config.mode != ObservationMode::Geometric) {
        throw ValidationError("mode", "camera poses only matter in geometric mode");
    }
    if (config.replications < 1) throw ValidationError("replications", "replications must be at least 1");
    Impl& im = *impl_;
    im.weights = config.weights;
    im.threshold = config.threshold;
    im.bounds = config.sim.bounds;

    // Agent motion does not depend on the cameras, so the crowd is simulated
    // once without any and the frames are replayed for every candidate.
    SimConfig cfg = config.sim;
    cfg.mode = ObservationMode::Geometric;
    cfg.preset = CameraPreset{"none", {}};
    cfg.weights = config.weights;
    cfg.threshold = config.threshold;
    cfg.suspect_scenarios = config.scenarios;
    cfg.observe_regular_agents = false;
    cfg.record_regular_samples = false;
    cfg.drain = true;
    cfg.bernoulli_p.reset();
    cfg.validate();

    for (const Period period : config.periods) {
        for (int r = 0; r < config.replications; ++r) {
            cfg.period = period;
            cfg.seed = mix_seed({config.seed, static_cast<std::uint64_t>(period), static_cast<std::uint64_t>(r)});
            const std::size_t first_snap = im.snaps.size();
            std::vector<int> ids;  // agent id per snap of this run
            const SimOutput out = run_simulation(layout, cfg, config.duration_s, [&](const Frame& frame) {
                im.frame_start.push_back(im.snaps.size());
                for (const auto& a : frame.agents) {
                    im.snaps.push_back({a.position, a.heading, a.suspect ? 0 : -1});
                    ids.push_back(a.agent_id);
                }
            });
            std::unordered_map<int, int> suspect_index;
            for (const auto& t : out.trajectories) {
                if (t.kind == AgentKind::Suspect && t.completed()) suspect_index[t.agent_id] = im.suspects++;
            }
            for (std::size_t i = first_snap; i < im.snaps.size(); ++i) {
                auto& s = im.snaps[i];
                if (s.suspect < 0) continue;
                const auto it = suspect_index.find(ids[i - first_snap]);
                s.suspect = it == suspect_index.end() ? -1 : it->second;
            }
        }
    }
    im.frame_start.push_back(im.snaps.size());
}

ObjectiveEvaluator::~ObjectiveEvaluator() = default;
ObjectiveEvaluator::ObjectiveEvaluator(ObjectiveEvaluator&&) noexcept = default;
ObjectiveEvaluator& ObjectiveEvaluator::operator=(ObjectiveEvaluator&&) noexcept = default;

int ObjectiveEvaluator::suspect_count() const { return impl_->suspects; }

double ObjectiveEvaluator::accuracy(const std::vector<Camera>& cameras) {
    Impl& im = *impl_;
    if (im.suspects == 0) return 0.0;
    std::vector<double> best(static_cast<std::size_t>(im.suspects), -1.0);
    for (const auto& cam : cameras) {
        const auto& col = im.column(cam);
        for (std::size_t s = 0; s < best.size(); ++s) best[s] = std::max(best[s], col[s]);
    }
    const auto detected = std::count_if(best.begin(), best.end(), [&](double p) { return p >= im.threshold.t; });
    return static_cast<double>(detected) / im.suspects;
}

double evaluate_objective(const OptimizationProblem& problem, const std::vector<double>& params) {
    problem.validate();
    const auto cameras = apply_params(problem, params);
    ObjectiveEvaluator evaluator(problem.layout, problem.objective);
    return evaluator.accuracy(cameras);
}

OptimizationResult optimize(const OptimizationProblem& problem, const TraceCallback& on_entry) {
    problem.validate();
    const auto specs = parameter_specs(problem);
    ObjectiveEvaluator evaluator(problem.layout, problem.objective);

    OptimizationResult result;
    std::map<std::vector<double>, double> seen;

    auto evaluate = [&](const std::vector<double>& params, int restart, double step) -> std::optional<double> {
        if (const auto it = seen.find(params); it != seen.end()) return it->second;
        if (result.evaluations >= problem.budget) {
            result.budget_exhausted = true;
            return std::nullopt;
        }
        const double value = evaluator.accuracy(apply_params(problem, params));
        seen.emplace(params, value);
        TraceEntry e{result.evaluations, restart, step, params, value, value};
        if (result.evaluations == 0) {
            result.initial_objective = value;
            result.best_objective = value;
            result.params = params;
        } else if (value > result.best_objective) {
            result.best_objective = value;
            result.params = params;
            result.trace.best_index = result.evaluations;
        }
        e.best = result.best_objective;
        ++result.evaluations;
        result.trace.entries.push_back(e);
        if (on_entry) on_entry(result.trace.entries.back());
        return value;
    };

    auto moved = [&](const ParamSpec& s, double v, double delta) {
        if (s.wraps) return wrap_into(v + delta, s.lo);
        return tidy(std::clamp(v + delta, s.lo, s.hi));
    };

    // Returns false once the budget runs out.
    auto climb = [&](std::vector<double> current, int restart) {
        auto f = evaluate(current, restart, 0.0);
        if (!f) return false;
        for (const double step : kPanSteps) {
            bool improved = true;
            while (improved) {
                improved = false;
                for (std::size_t i = 0; i < specs.size(); ++i) {
                    const double delta = specs[i].kind == ParamKind::Pan ? step : step * kPositionStepScale;
                    for (const double sign : {1.0, -1.0}) {
                        auto candidate = current;
                        candidate[i] = moved(specs[i], current[i], sign * delta);
                        if (candidate[i] == current[i]) continue;
                        const auto fc = evaluate(candidate, restart, step);
                        if (!fc) return false;
                        if (*fc > *f) {
                            current = std::move(candidate);
                            f = fc;
                            improved = true;
                            break;
                        }
                    }
                }
            }
        }
        return true;
    };

    RngStream rng(problem.seed, "restarts");
    bool more = climb(initial_params(problem), 0);
    for (int r = 1; more && r <= problem.restarts; ++r) {
        std::vector<double> start;
        for (const auto& s : specs) {
            if (s.kind == ParamKind::Pan) {
                const int lo = static_cast<int>(std::ceil(s.lo));
                const int hi = static_cast<int>(s.wraps ? std::ceil(s.hi) - 1 : std::floor(s.hi));
                start.push_back(hi >= lo ? static_cast<double>(rng.uniform_int(lo, hi)) : s.lo);
            } else {
                start.push_back(static_cast<double>(rng.uniform_int(0, 100)) / 100.0);
            }
        }
        more = climb(std::move(start), r);
    }
    result.cameras = apply_params(problem, result.params);
    return result;
}

OptimizationProblem problem_from_json(const json& j, const StationLayout& layout) {
    using detail::field_as;
    if (!j.is_object()) throw ParseError("problem must be a JSON object");
    OptimizationProblem p;
    p.layout = layout;
    if (j.contains("cameras")) {
        p.cameras = detail::cameras_from_json(j.at("cameras"));
    } else {
        p.cameras = builtin_preset(field_as<std::string>(j, "preset", "Base"), layout).cameras;
    }

    if (!j.contains("free")) {
        for (const auto& c : p.cameras) p.free.push_back({c.id, std::pair{0.0, 360.0}, false});
    } else {
        const auto& free = j.at("free");
        if (!free.is_array()) throw ParseError("field 'free' must be an array");
        for (const auto& f : free) {
            if (!f.is_object()) throw ParseError("entries of 'free' must be objects");
            CameraFreedom cf;
            cf.camera_id = field_as<std::string>(f, "camera", "");
            if (f.contains("pan")) {
                const auto& pan = f.at("pan");
                if (pan.is_boolean()) {
                    if (pan.get<bool>()) cf.pan = std::pair{0.0, 360.0};
                } else if (pan.is_object()) {
                    cf.pan = std::pair{field_as(pan, "min", 0.0), field_as(pan, "max", 360.0)};
                } else {
                    throw ParseError("field 'pan' must be a boolean or {min, max}");
                }
            }
            cf.position = field_as(f, "position", false);
            p.free.push_back(std::move(cf));
        }
    }

    const json obj = j.value("objective", json::object());
    if (!obj.is_object()) throw ParseError("field 'objective' must be an object");
    ObjectiveConfig& o = p.objective;
    o.mode = observation_mode_from_string(field_as<std::string>(obj, "mode", "geometric"));
    o.periods = detail::periods_from_json(obj, o.periods);
    o.scenarios = detail::scenarios_from_json(obj, o.scenarios);
    o.weights = detail::weights_from_json(obj, o.weights);
    o.threshold.t = field_as(obj, "threshold", o.threshold.t);
    o.replications = field_as(obj, "replications", o.replications);
    o.seed = field_as(obj, "seed", o.seed);
    o.duration_s = field_as(obj, "duration_s", o.duration_s);

    p.budget = field_as(j, "budget", p.budget);
    p.restarts = field_as(j, "restarts", p.restarts);
    p.seed = field_as(j, "seed", p.seed);
    return p;
}

json to_json(const TraceEntry& e) {
    return {{"iteration", e.iteration}, {"restart", e.restart}, {"step", e.step},
            {"params", e.params},       {"objective", e.objective}, {"best", e.best}};
}

json to_json(const OptimizationResult& r) {
    json entries = json::array();
    for (const auto& e : r.trace.entries) entries.push_back(to_json(e));
    return {{"cameras", detail::cameras_to_json(r.cameras)},
            {"params", r.params},
            {"initial_objective", r.initial_objective},
            {"final_objective", r.best_objective},
            {"evaluations", r.evaluations},
            {"budget_exhausted", r.budget_exhausted},
            {"trace", {{"entries", entries}, {"best_index", r.trace.best_index}}}};
}

}  // namespace twinwatch
