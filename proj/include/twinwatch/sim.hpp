#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "twinwatch/detection.hpp"
#include "twinwatch/random.hpp"
#include "twinwatch/station.hpp"

namespace twinwatch {

enum class Period { Morning, Midday, Afternoon };

struct TimeOfDay {
    Period period;
    std::string_view name;
    int start_hour;  // inclusive
    int end_hour;    // exclusive
};

const std::array<TimeOfDay, 3>& time_of_day_table();
const TimeOfDay& time_of_day(Period period);
std::string_view to_string(Period period);
Period period_from_string(std::string_view name);
/// Period covering the given hour of the day; throws for hours before 06:00.
Period period_at_hour(double hour);

struct TrafficRates {
    NormalSpec entrance_per_min;
    NormalSpec exit_per_5min;
};

struct TrafficTable {
    std::array<TrafficRates, 3> rates;

    static TrafficTable defaults();
    const TrafficRates& at(Period p) const { return rates[static_cast<std::size_t>(p)]; }
    TrafficRates& at(Period p) { return rates[static_cast<std::size_t>(p)]; }
};

enum class ObservationMode { Geometric, Stochastic };
std::string_view to_string(ObservationMode mode);
ObservationMode observation_mode_from_string(std::string_view name);

enum class AgentKind { Regular, Suspect };
enum class AgentPhase { Walking, Queued, Dwelling, Departed };
std::string_view to_string(AgentKind kind);

enum class StepAction { Pass, Gate, TicketMachine, Dwell };

struct RouteStep {
    std::string node;
    StepAction action = StepAction::Pass;
};

struct Route {
    std::vector<RouteStep> steps;

    std::vector<std::string> nodes() const;
};

struct Agent {
    int id = 0;
    AgentKind kind = AgentKind::Regular;
    int scenario = 0;  // 1..3 for suspects
    Point2D position;
    Point2D heading{1.0, 0.0};
    double speed = 1.4;
    std::vector<std::string> route;
    AgentPhase phase = AgentPhase::Walking;
    double spawn_time = 0.0;
};

struct SimConfig {
    ObservationMode mode = ObservationMode::Geometric;
    std::uint64_t seed = 0;
    Period period = Period::Morning;
    CameraPreset preset;
    DetectionWeights weights;
    DetectionThreshold threshold;
    NormalizationBounds bounds;
    double sample_interval = 0.5;
    TrafficTable traffic = TrafficTable::defaults();
    NormalSpec gate_delay{5.0, 2.0, 1.0, std::nullopt};
    NormalSpec machine_delay{12.0, 2.0, 6.0, std::nullopt};
    NormalSpec suspects_per_hour{8.0, 2.3, 0.0, std::nullopt};
    StochasticSampler stochastic;
    double walking_speed = 1.4;

    /// Share of entering passengers who stop at a ticket machine.
    double ticket_purchase_fraction = 0.3;
    /// Scenario-1 suspects dwell at this many distinct concourse nodes.
    int dwell_waypoints = 2;
    NormalSpec dwell{10.0, 3.0, 2.0, std::nullopt};
    std::vector<int> suspect_scenarios{1, 2, 3};

    /// Evaluate cameras against regular passengers too (geometric mode).
    bool observe_regular_agents = true;
    bool record_regular_samples = false;
    /// Keep running past `duration` without new arrivals until the station empties.
    bool drain = false;
    double drain_limit = 4.0 * 3600.0;

    /// Test hook: each suspect-camera pair reaches the threshold with this
    /// probability instead of drawing (A, D, N). Stochastic mode only.
    std::optional<double> bernoulli_p;

    void validate() const;
};

struct CameraMax {
    std::string camera_id;
    double max_p = 0.0;
};

struct ServiceRecord {
    std::string node;
    StepAction kind = StepAction::Gate;
    double arrive = 0.0;
    double start = 0.0;
    double end = 0.0;
};

struct Trajectory {
    int agent_id = 0;
    AgentKind kind = AgentKind::Regular;
    int scenario = 0;
    Period period = Period::Morning;
    std::vector<std::string> route;
    double spawn_time = 0.0;
    std::optional<double> end_time;
    double walked_m = 0.0;
    double queue_wait_s = 0.0;
    double service_s = 0.0;
    double dwell_s = 0.0;
    std::vector<ServiceRecord> services;
    std::vector<CameraMax> per_camera_max;  // sorted by camera id
    bool detected = false;
    std::vector<ObservationSample> samples;

    bool completed() const { return end_time.has_value(); }
};

struct PassengerCounts {
    int spawned = 0;
    int entrance_spawned = 0;
    int exit_flow_spawned = 0;
    int suspects_spawned = 0;
    int served = 0;  // completed gate/machine services
    int departed = 0;
    int in_transit = 0;
};

struct SimOutput {
    std::vector<Trajectory> trajectories;
    PassengerCounts passenger_counts;
    std::uint64_t rng_seed = 0;
    std::vector<int> suspects_per_hour_drawn;
    double end_time = 0.0;
};

struct AgentSnapshot {
    int agent_id = 0;
    Point2D position;
    Point2D heading;
    bool suspect = false;
};

/// Positions of every agent in the station at one sampling instant.
struct Frame {
    double time = 0.0;
    std::vector<AgentSnapshot> agents;
};

using FrameCallback = std::function<void(const Frame&)>;

/// Runs one replication. In geometric mode `on_frame`, when set, receives every
/// sampling instant at which at least one suspect is in the station.
SimOutput run_simulation(const StationLayout& layout, const SimConfig& cfg, double duration,
                         const FrameCallback& on_frame = {});

/// Waypoint route for a suspect of the given scenario (1, 2 or 3).
Route scenario_route(int scenario, const StationLayout& layout, RngStream& rng,
                     int dwell_waypoints = 2);

/// Route of an entering passenger: entrance, optional ticket machine, gate, platform.
Route entrance_route(const StationLayout& layout, RngStream& rng, bool buys_ticket);
/// Route of a passenger leaving a train: platform, gate, street exit.
Route exit_flow_route(const StationLayout& layout, RngStream& rng, std::string_view platform);

/// Horizontal distance when `p` is inside the camera's FOV cone and range annulus.
std::optional<double> camera_sees(const Camera& camera, Point2D p);

/// 180 degrees minus the angle between the optical axis and the heading,
/// so walking straight at the camera gives 0.
double angular_deviation_deg(const Camera& camera, Point2D heading);

/// Geometric observation of `agent`; `all_agents` provides the crowd count.
std::optional<ObservationSample> observe(const Camera& camera, const Agent& agent,
                                         std::span<const Agent> all_agents,
                                         const DetectionWeights& w, const NormalizationBounds& b,
                                         double time = 0.0);

/// Stochastic observation: (A, D, N) drawn from the sampler, geometry ignored.
ObservationSample observe_stochastic(const Camera& camera, const StochasticSampler& sampler,
                                     RngStream& rng, const DetectionWeights& w,
                                     const NormalizationBounds& b, double time = 0.0);

struct TrajectoryVerdict {
    std::vector<CameraMax> per_camera_max;  // sorted by camera id
    bool detected = false;
};

TrajectoryVerdict suspect_trajectory_verdict(std::span<const ObservationSample> samples,
                                             const DetectionThreshold& t);

nlohmann::json to_json(const SimOutput& output);
nlohmann::json to_json(const Trajectory& trajectory);

}  // namespace twinwatch
