#include "twinwatch/sim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <queue>
#include <utility>

#include "twinwatch/errors.hpp"
#include "twinwatch/hash.hpp"

namespace twinwatch {

namespace {

constexpr std::array<TimeOfDay, 3> kTimesOfDay{{
    {Period::Morning, "Morning", 6, 12},
    {Period::Midday, "Midday", 12, 18},
    {Period::Afternoon, "Afternoon", 18, 24},
}};

/// Shortest paths memoized per (from, to).
class PathCache {
public:
    explicit PathCache(const StationLayout& layout) : layout_(layout) {}

    const std::vector<std::string>& get(const std::string& from, const std::string& to) {
        auto key = std::make_pair(from, to);
        auto it = cache_.find(key);
        if (it == cache_.end()) {
            it = cache_.emplace(std::move(key), shortest_route(layout_, from, to)).first;
        }
        return it->second;
    }

    const StationLayout& layout() const { return layout_; }

private:
    const StationLayout& layout_;
    std::map<std::pair<std::string, std::string>, std::vector<std::string>> cache_;
};

void append_leg(Route& route, PathCache& paths, const std::string& to, StepAction action) {
    const auto& path = paths.get(route.steps.back().node, to);
    if (path.size() == 1) {
        if (route.steps.back().action == StepAction::Pass) {
            route.steps.back().action = action;
        } else {
            route.steps.push_back({to, action});
        }
        return;
    }
    for (std::size_t i = 1; i < path.size(); ++i) {
        route.steps.push_back({path[i], i + 1 == path.size() ? action : StepAction::Pass});
    }
}

const std::string& pick(const std::vector<std::string>& options, RngStream& rng) {
    return options[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(options.size()) - 1))];
}

std::vector<std::string> required_zone(const StationLayout& layout, ZoneKind kind) {
    auto nodes = layout.zone_nodes(kind);
    if (nodes.empty()) {
        throw ValidationError(std::string(to_string(kind)),
                              "layout '" + layout.name + "' has no " + std::string(to_string(kind)) + " zone");
    }
    return nodes;
}

const std::vector<std::string>& required_service(const StationLayout& layout, bool gates) {
    const auto& group = gates ? layout.service_points.gates : layout.service_points.ticket_machines;
    if (group.nodes.empty()) {
        const char* label = gates ? "gates" : "ticket_machines";
        throw ValidationError(label, "layout '" + layout.name + "' has no " + label);
    }
    return group.nodes;
}

Route scenario_route_impl(int scenario, PathCache& paths, RngStream& rng, int dwell_waypoints) {
    const StationLayout& layout = paths.layout();
    Route route;
    route.steps.push_back({pick(required_zone(layout, ZoneKind::Entrance), rng), StepAction::Pass});
    switch (scenario) {
        case 1: {
            auto concourse = required_zone(layout, ZoneKind::Concourse);
            const auto exits = required_zone(layout, ZoneKind::Exit);
            const int k = std::min<int>(dwell_waypoints, static_cast<int>(concourse.size()));
            for (int i = 0; i < k; ++i) {
                const int j = rng.uniform_int(i, static_cast<int>(concourse.size()) - 1);
                std::swap(concourse[static_cast<std::size_t>(i)], concourse[static_cast<std::size_t>(j)]);
                append_leg(route, paths, concourse[static_cast<std::size_t>(i)], StepAction::Dwell);
            }
            append_leg(route, paths, pick(exits, rng), StepAction::Pass);
            break;
        }
        case 2:
            append_leg(route, paths, pick(required_service(layout, false), rng), StepAction::TicketMachine);
            [[fallthrough]];
        case 3:
            append_leg(route, paths, pick(required_service(layout, true), rng), StepAction::Gate);
            append_leg(route, paths, pick(required_zone(layout, ZoneKind::Platform), rng), StepAction::Pass);
            break;
        default:
            throw ValidationError("scenario", "scenario must be 1, 2 or 3");
    }
    return route;
}

Route entrance_route_impl(PathCache& paths, RngStream& rng, bool buys_ticket) {
    const StationLayout& layout = paths.layout();
    Route route;
    route.steps.push_back({pick(required_zone(layout, ZoneKind::Entrance), rng), StepAction::Pass});
    if (buys_ticket) {
        append_leg(route, paths, pick(required_service(layout, false), rng), StepAction::TicketMachine);
    }
    append_leg(route, paths, pick(required_service(layout, true), rng), StepAction::Gate);
    append_leg(route, paths, pick(required_zone(layout, ZoneKind::Platform), rng), StepAction::Pass);
    return route;
}

Route exit_flow_route_impl(PathCache& paths, RngStream& rng, const std::string& platform) {
    const StationLayout& layout = paths.layout();
    Route route;
    route.steps.push_back({platform, StepAction::Pass});
    append_leg(route, paths, pick(required_service(layout, true), rng), StepAction::Gate);
    append_leg(route, paths, pick(required_zone(layout, ZoneKind::Exit), rng), StepAction::Pass);
    return route;
}

double score(double a_deg, double d_m, int n, const DetectionWeights& w, const NormalizationBounds& b) {
    const double p = w.w_a * normalize_angle(a_deg, b) + w.w_d * normalize_distance(d_m, b) +
                     w.w_n * normalize_density(n, b);
    return std::clamp(p, 0.0, 1.0);
}

enum class EventKind { Spawn, NodeArrival, ServiceDone, DwellDone, SampleTick };

struct Event {
    double time;
    std::uint64_t seq;
    EventKind kind;
    int subject;  // agent index, or pending-spawn index for Spawn

    bool operator>(const Event& o) const { return time != o.time ? time > o.time : seq > o.seq; }
};

struct PendingSpawn {
    double time;
    AgentKind kind;
    int scenario;          // suspects
    std::string platform;  // exit-flow passengers; empty for entrance arrivals
};

struct AgentState {
    int id = 0;
    AgentKind kind = AgentKind::Regular;
    int scenario = 0;
    Route route;
    std::size_t step = 0;  // index of the node last reached
    AgentPhase phase = AgentPhase::Walking;
    Point2D from;
    Point2D heading{1.0, 0.0};
    double leg_length = 0.0;
    double leg_start = 0.0;
    double spawn_time = 0.0;
    std::optional<double> end_time;
    double walked = 0.0;
    double queue_wait = 0.0;
    double service = 0.0;
    double dwell = 0.0;
    std::vector<ServiceRecord> services;
    std::vector<double> camera_max;  // -1 when never observed
    std::vector<ObservationSample> samples;
};

struct ServerState {
    bool busy = false;
    std::deque<int> waiting;
};

class Simulation {
public:
    Simulation(const StationLayout& layout, const SimConfig& cfg, double duration,
               const FrameCallback& on_frame)
        : layout_(layout),
          cfg_(cfg),
          duration_(duration),
          on_frame_(on_frame),
          paths_(layout),
          arrivals_(cfg.seed, "arrivals"),
          delays_(cfg.seed, "delays"),
          routes_(cfg.seed, "routes"),
          suspects_(cfg.seed, "suspects"),
          servers_(layout.nav_nodes.size()) {}

    SimOutput run() {
        generate_arrivals();
        if (cfg_.mode == ObservationMode::Geometric) push(0.0, EventKind::SampleTick, 0);
        const double limit = cfg_.drain ? duration_ + cfg_.drain_limit : duration_;
        double now = 0.0;
        while (!events_.empty()) {
            const Event e = events_.top();
            if (e.time > limit) break;
            events_.pop();
            now = e.time;
            switch (e.kind) {
                case EventKind::Spawn: spawn(pending_[static_cast<std::size_t>(e.subject)], now); break;
                case EventKind::NodeArrival: arrive(e.subject, now); break;
                case EventKind::ServiceDone: finish_service(e.subject, now); break;
                case EventKind::DwellDone: proceed(e.subject, now); break;
                case EventKind::SampleTick: tick(static_cast<std::size_t>(e.subject), now); break;
            }
        }
        return collect(std::max(now, cfg_.drain ? now : duration_));
    }

private:
    void push(double time, EventKind kind, int subject) { events_.push({time, seq_++, kind, subject}); }

    void generate_arrivals() {
        const auto& rates = cfg_.traffic.at(cfg_.period);
        for (int minute = 0; minute * 60.0 < duration_; ++minute) {
            const int count = sample_count(rates.entrance_per_min, arrivals_);
            for (int i = 0; i < count; ++i) {
                const double t = minute * 60.0 + arrivals_.uniform(0.0, 60.0);
                if (t < duration_) pending_.push_back({t, AgentKind::Regular, 0, {}});
            }
        }
        const auto platforms = required_zone(layout_, ZoneKind::Platform);
        for (int batch = 0; batch * 300.0 < duration_; ++batch) {
            const int count = sample_count(rates.exit_per_5min, arrivals_);
            const std::string& platform = pick(platforms, arrivals_);
            for (int i = 0; i < count; ++i) {
                pending_.push_back({batch * 300.0, AgentKind::Regular, 0, platform});
            }
        }
        for (int hour = 0; hour * 3600.0 < duration_; ++hour) {
            const int count = sample_count(cfg_.suspects_per_hour, suspects_);
            suspects_drawn_.push_back(count);
            for (int i = 0; i < count; ++i) {
                const double t = hour * 3600.0 + suspects_.uniform(0.0, 3600.0);
                const int pick_index =
                    suspects_.uniform_int(0, static_cast<int>(cfg_.suspect_scenarios.size()) - 1);
                const int scenario = cfg_.suspect_scenarios[static_cast<std::size_t>(pick_index)];
                if (t < duration_) pending_.push_back({t, AgentKind::Suspect, scenario, {}});
            }
        }
        for (std::size_t i = 0; i < pending_.size(); ++i) {
            push(pending_[i].time, EventKind::Spawn, static_cast<int>(i));
        }
    }

    void spawn(const PendingSpawn& p, double now) {
        AgentState a;
        a.id = static_cast<int>(agents_.size());
        a.kind = p.kind;
        a.scenario = p.scenario;
        a.spawn_time = now;
        a.camera_max.assign(cfg_.preset.cameras.size(), -1.0);
        if (p.kind == AgentKind::Suspect) {
            a.route = scenario_route_impl(p.scenario, paths_, routes_, cfg_.dwell_waypoints);
            ++counts_.suspects_spawned;
        } else if (p.platform.empty()) {
            a.route = entrance_route_impl(paths_, routes_, routes_.bernoulli(cfg_.ticket_purchase_fraction));
            ++counts_.entrance_spawned;
        } else {
            a.route = exit_flow_route_impl(paths_, routes_, p.platform);
            ++counts_.exit_flow_spawned;
        }
        a.from = layout_.node_position(a.route.steps.front().node);
        ++counts_.spawned;
        const int index = static_cast<int>(agents_.size());
        agents_.push_back(std::move(a));
        active_.push_back(index);
        if (p.kind == AgentKind::Suspect) {
            ++suspects_active_;
            if (cfg_.mode == ObservationMode::Stochastic) observe_stochastically(agents_.back(), now);
        }
        proceed(index, now);
    }

    void observe_stochastically(AgentState& a, double now) {
        for (std::size_t c = 0; c < cfg_.preset.cameras.size(); ++c) {
            const Camera& cam = cfg_.preset.cameras[c];
            RngStream pair_rng(mix_seed({cfg_.seed, fnv1a64("stochastic_obs"),
                                         static_cast<std::uint64_t>(a.id), fnv1a64(cam.id)}));
            ObservationSample s;
            if (cfg_.bernoulli_p) {
                s.camera_id = cam.id;
                s.time = now;
                s.p = pair_rng.bernoulli(*cfg_.bernoulli_p) ? 1.0 : 0.0;
            } else {
                s = observe_stochastic(cam, cfg_.stochastic, pair_rng, cfg_.weights, cfg_.bounds, now);
            }
            a.camera_max[c] = std::max(a.camera_max[c], s.p);
            a.samples.push_back(std::move(s));
        }
    }

    /// Leaves the node at `step` towards the next one, or departs at the end.
    void proceed(int index, double now) {
        AgentState& a = agents_[static_cast<std::size_t>(index)];
        if (a.step + 1 >= a.route.steps.size()) {
            depart(index, now);
            return;
        }
        const Point2D from = layout_.node_position(a.route.steps[a.step].node);
        const Point2D to = layout_.node_position(a.route.steps[a.step + 1].node);
        const double len = distance(from, to);
        a.phase = AgentPhase::Walking;
        a.from = from;
        a.leg_length = len;
        a.leg_start = now;
        if (len > 0.0) a.heading = (to - from) * (1.0 / len);
        a.walked += len;
        push(now + len / cfg_.walking_speed, EventKind::NodeArrival, index);
    }

    void arrive(int index, double now) {
        AgentState& a = agents_[static_cast<std::size_t>(index)];
        ++a.step;
        a.from = layout_.node_position(a.route.steps[a.step].node);
        a.leg_length = 0.0;
        switch (a.route.steps[a.step].action) {
            case StepAction::Pass: proceed(index, now); break;
            case StepAction::Dwell: {
                a.phase = AgentPhase::Dwelling;
                const double d = sample_delay(cfg_.dwell, delays_);
                a.dwell += d;
                push(now + d, EventKind::DwellDone, index);
                break;
            }
            case StepAction::Gate:
            case StepAction::TicketMachine: {
                a.phase = AgentPhase::Queued;
                const int node = layout_.node_index(a.route.steps[a.step].node);
                a.services.push_back({a.route.steps[a.step].node, a.route.steps[a.step].action, now, now, now});
                ServerState& server = servers_[static_cast<std::size_t>(node)];
                if (server.busy) {
                    server.waiting.push_back(index);
                } else {
                    start_service(index, now);
                }
                break;
            }
        }
    }

    void start_service(int index, double now) {
        AgentState& a = agents_[static_cast<std::size_t>(index)];
        const int node = layout_.node_index(a.route.steps[a.step].node);
        servers_[static_cast<std::size_t>(node)].busy = true;
        const NormalSpec& spec =
            a.route.steps[a.step].action == StepAction::Gate ? cfg_.gate_delay : cfg_.machine_delay;
        const double delay = sample_delay(spec, delays_);
        ServiceRecord& rec = a.services.back();
        rec.start = now;
        rec.end = now + delay;
        push(now + delay, EventKind::ServiceDone, index);
    }

    void finish_service(int index, double now) {
        AgentState& a = agents_[static_cast<std::size_t>(index)];
        const ServiceRecord& rec = a.services.back();
        a.queue_wait += rec.start - rec.arrive;
        a.service += rec.end - rec.start;
        ++counts_.served;
        ServerState& server = servers_[static_cast<std::size_t>(layout_.node_index(rec.node))];
        if (server.waiting.empty()) {
            server.busy = false;
        } else {
            const int next = server.waiting.front();
            server.waiting.pop_front();
            start_service(next, now);
        }
        proceed(index, now);
    }

    void depart(int index, double now) {
        AgentState& a = agents_[static_cast<std::size_t>(index)];
        a.phase = AgentPhase::Departed;
        a.end_time = now;
        ++counts_.departed;
        if (a.kind == AgentKind::Suspect) --suspects_active_;
        active_.erase(std::find(active_.begin(), active_.end(), index));
    }

    Point2D position_at(const AgentState& a, double now) const {
        if (a.phase != AgentPhase::Walking) return a.from;
        const double travelled = std::min(a.leg_length, (now - a.leg_start) * cfg_.walking_speed);
        return a.from + a.heading * travelled;
    }

    void tick(std::size_t k, double now) {
        const bool wanted = suspects_active_ > 0 || cfg_.observe_regular_agents;
        if (wanted && !active_.empty()) {
            frame_.time = now;
            frame_.agents.clear();
            for (const int index : active_) {
                const AgentState& a = agents_[static_cast<std::size_t>(index)];
                frame_.agents.push_back({a.id, position_at(a, now), a.heading, a.kind == AgentKind::Suspect});
            }
            observe_frame(now);
            if (on_frame_ && suspects_active_ > 0) on_frame_(frame_);
        }
        const double next = static_cast<double>(k + 1) * cfg_.sample_interval;
        const bool more = next <= duration_ ||
                          (cfg_.drain && !active_.empty() && next <= duration_ + cfg_.drain_limit);
        if (more) push(next, EventKind::SampleTick, static_cast<int>(k + 1));
    }

    void observe_frame(double now) {
        const auto n_cap = static_cast<int>(cfg_.bounds.n_max);
        for (std::size_t c = 0; c < cfg_.preset.cameras.size(); ++c) {
            const Camera& cam = cfg_.preset.cameras[c];
            in_view_.clear();
            for (std::size_t s = 0; s < frame_.agents.size(); ++s) {
                if (const auto d = camera_sees(cam, frame_.agents[s].position)) in_view_.emplace_back(s, *d);
            }
            if (in_view_.empty()) continue;
            const int n = std::min(static_cast<int>(in_view_.size()), n_cap);
            for (const auto& [s, d] : in_view_) {
                AgentState& a = agents_[static_cast<std::size_t>(active_[s])];
                const bool suspect = a.kind == AgentKind::Suspect;
                if (!suspect && !cfg_.observe_regular_agents) continue;
                const double a_deg = angular_deviation_deg(cam, a.heading);
                const double p = score(a_deg, d, n, cfg_.weights, cfg_.bounds);
                a.camera_max[c] = std::max(a.camera_max[c], p);
                if (suspect || cfg_.record_regular_samples) {
                    a.samples.push_back({cam.id, now, a_deg, d, n, p});
                }
            }
        }
    }

    SimOutput collect(double end_time) {
        SimOutput out;
        out.rng_seed = cfg_.seed;
        out.suspects_per_hour_drawn = suspects_drawn_;
        out.end_time = end_time;
        std::vector<std::size_t> camera_order(cfg_.preset.cameras.size());
        for (std::size_t i = 0; i < camera_order.size(); ++i) camera_order[i] = i;
        std::sort(camera_order.begin(), camera_order.end(), [this](std::size_t l, std::size_t r) {
            return cfg_.preset.cameras[l].id < cfg_.preset.cameras[r].id;
        });
        out.trajectories.reserve(agents_.size());
        for (auto& a : agents_) {
            Trajectory t;
            t.agent_id = a.id;
            t.kind = a.kind;
            t.scenario = a.scenario;
            t.period = cfg_.period;
            t.route = a.route.nodes();
            t.spawn_time = a.spawn_time;
            t.end_time = a.end_time;
            t.walked_m = a.walked;
            t.queue_wait_s = a.queue_wait;
            t.service_s = a.service;
            t.dwell_s = a.dwell;
            t.services = std::move(a.services);
            std::vector<double> maxima;
            for (const std::size_t c : camera_order) {
                if (a.camera_max[c] >= 0.0) {
                    t.per_camera_max.push_back({cfg_.preset.cameras[c].id, a.camera_max[c]});
                    maxima.push_back(a.camera_max[c]);
                }
            }
            t.detected = trajectory_detected(maxima, cfg_.threshold);
            t.samples = std::move(a.samples);
            out.trajectories.push_back(std::move(t));
        }
        counts_.in_transit = static_cast<int>(active_.size());
        out.passenger_counts = counts_;
        return out;
    }

    const StationLayout& layout_;
    const SimConfig& cfg_;
    double duration_;
    const FrameCallback& on_frame_;
    PathCache paths_;
    RngStream arrivals_;
    RngStream delays_;
    RngStream routes_;
    RngStream suspects_;
    std::vector<ServerState> servers_;
    std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
    std::uint64_t seq_ = 0;
    std::vector<PendingSpawn> pending_;
    std::vector<AgentState> agents_;
    std::vector<int> active_;
    int suspects_active_ = 0;
    std::vector<int> suspects_drawn_;
    PassengerCounts counts_;
    Frame frame_;
    std::vector<std::pair<std::size_t, double>> in_view_;
};

}  // namespace

const std::array<TimeOfDay, 3>& time_of_day_table() { return kTimesOfDay; }

const TimeOfDay& time_of_day(Period period) { return kTimesOfDay[static_cast<std::size_t>(period)]; }

std::string_view to_string(Period period) { return time_of_day(period).name; }

Period period_from_string(std::string_view name) {
    for (const auto& t : kTimesOfDay) {
        if (t.name == name) return t.period;
    }
    throw ValidationError("period", "unknown period '" + std::string(name) +
                                        "' (expected Morning, Midday or Afternoon)");
}

Period period_at_hour(double hour) {
    for (const auto& t : kTimesOfDay) {
        if (hour >= t.start_hour && hour < t.end_hour) return t.period;
    }
    throw ValidationError("hour", "hour outside 06:00-24:00");
}

TrafficTable TrafficTable::defaults() {
    TrafficTable t;
    t.at(Period::Morning) = {{7.0, 1.5, std::nullopt, std::nullopt}, {5.0, 2.0, std::nullopt, std::nullopt}};
    t.at(Period::Midday) = {{5.0, 1.5, std::nullopt, std::nullopt}, {7.0, 2.0, std::nullopt, std::nullopt}};
    t.at(Period::Afternoon) = {{3.0, 1.5, std::nullopt, std::nullopt}, {9.0, 2.0, std::nullopt, std::nullopt}};
    return t;
}

std::string_view to_string(ObservationMode mode) {
    return mode == ObservationMode::Geometric ? "geometric" : "stochastic";
}

ObservationMode observation_mode_from_string(std::string_view name) {
    if (name == "geometric") return ObservationMode::Geometric;
    if (name == "stochastic") return ObservationMode::Stochastic;
    throw ValidationError("mode", "unknown mode '" + std::string(name) + "' (expected geometric or stochastic)");
}

std::string_view to_string(AgentKind kind) { return kind == AgentKind::Suspect ? "suspect" : "regular"; }

std::vector<std::string> Route::nodes() const {
    std::vector<std::string> out;
    out.reserve(steps.size());
    for (const auto& s : steps) out.push_back(s.node);
    return out;
}

void SimConfig::validate() const {
    if (!(sample_interval > 0.0)) throw ValidationError("sample_interval", "sample_interval must be positive");
    if (!(walking_speed > 0.0)) throw ValidationError("walking_speed", "walking speed must be positive");
    weights.validate();
    threshold.validate();
    bounds.validate();
    for (const auto& rates : traffic.rates) {
        rates.entrance_per_min.validate("traffic.entrance_per_min");
        rates.exit_per_5min.validate("traffic.exit_per_5min");
    }
    gate_delay.validate("gate_delay");
    machine_delay.validate("machine_delay");
    suspects_per_hour.validate("suspects_per_hour");
    dwell.validate("dwell");
    stochastic.a.validate("stochastic_a");
    stochastic.d.validate("stochastic_d");
    stochastic.n.validate("stochastic_n");
    if (!(ticket_purchase_fraction >= 0.0 && ticket_purchase_fraction <= 1.0)) {
        throw ValidationError("ticket_purchase_fraction", "ticket_purchase_fraction must lie in [0, 1]");
    }
    if (suspect_scenarios.empty()) throw ValidationError("scenarios", "at least one suspect scenario is required");
    for (const int s : suspect_scenarios) {
        if (s < 1 || s > 3) throw ValidationError("scenarios", "scenario must be 1, 2 or 3");
    }
    if (dwell_waypoints < 0) throw ValidationError("dwell_waypoints", "dwell_waypoints must be non-negative");
    if (bernoulli_p && !(*bernoulli_p >= 0.0 && *bernoulli_p <= 1.0)) {
        throw ValidationError("bernoulli_p", "bernoulli_p must lie in [0, 1]");
    }
    for (const auto& c : preset.cameras) validate_camera(c);
    if (!(drain_limit >= 0.0)) throw ValidationError("drain_limit", "drain_limit must be non-negative");
}

SimOutput run_simulation(const StationLayout& layout, const SimConfig& cfg, double duration,
                         const FrameCallback& on_frame) {
    if (!(duration > 0.0) || !std::isfinite(duration)) {
        throw ValidationError("duration", "simulation duration must be positive");
    }
    cfg.validate();
    Simulation sim(layout, cfg, duration, on_frame);
    return sim.run();
}

Route scenario_route(int scenario, const StationLayout& layout, RngStream& rng, int dwell_waypoints) {
    PathCache paths(layout);
    return scenario_route_impl(scenario, paths, rng, dwell_waypoints);
}

Route entrance_route(const StationLayout& layout, RngStream& rng, bool buys_ticket) {
    PathCache paths(layout);
    return entrance_route_impl(paths, rng, buys_ticket);
}

Route exit_flow_route(const StationLayout& layout, RngStream& rng, std::string_view platform) {
    PathCache paths(layout);
    return exit_flow_route_impl(paths, rng, std::string(platform));
}

std::optional<double> camera_sees(const Camera& camera, Point2D p) {
    const Point2D offset = p - camera.position;
    const double d = norm(offset);
    if (d < camera.min_range_m || d > camera.max_range_m) return std::nullopt;
    // The cone edge is inclusive; the slack absorbs acos rounding.
    if (angle_between_deg(camera.axis(), offset) > camera.fov_deg / 2.0 + 1e-9) return std::nullopt;
    return d;
}

double angular_deviation_deg(const Camera& camera, Point2D heading) {
    return std::clamp(180.0 - angle_between_deg(camera.axis(), heading), 0.0, 180.0);
}

std::optional<ObservationSample> observe(const Camera& camera, const Agent& agent,
                                         std::span<const Agent> all_agents,
                                         const DetectionWeights& w, const NormalizationBounds& b,
                                         double time) {
    const auto d = camera_sees(camera, agent.position);
    if (!d) return std::nullopt;
    int n = 0;
    for (const auto& other : all_agents) {
        if (other.phase != AgentPhase::Departed && camera_sees(camera, other.position)) ++n;
    }
    n = std::min(std::max(n, 1), static_cast<int>(b.n_max));
    const double a_deg = angular_deviation_deg(camera, agent.heading);
    return ObservationSample{camera.id, time, a_deg, *d, n, detection_probability(a_deg, *d, n, w, b)};
}

ObservationSample observe_stochastic(const Camera& camera, const StochasticSampler& sampler,
                                     RngStream& rng, const DetectionWeights& w,
                                     const NormalizationBounds& b, double time) {
    const double a = sample_delay(sampler.a, rng);
    const double d = sample_delay(sampler.d, rng);
    const int n = rng.uniform_int(sampler.n.lo, sampler.n.hi);
    return {camera.id, time, a, d, n, detection_probability(a, d, n, w, b)};
}

TrajectoryVerdict suspect_trajectory_verdict(std::span<const ObservationSample> samples,
                                             const DetectionThreshold& t) {
    std::map<std::string, double> maxima;
    for (const auto& s : samples) {
        auto [it, fresh] = maxima.emplace(s.camera_id, s.p);
        if (!fresh) it->second = std::max(it->second, s.p);
    }
    TrajectoryVerdict v;
    std::vector<double> values;
    for (const auto& [id, p] : maxima) {
        v.per_camera_max.push_back({id, p});
        values.push_back(p);
    }
    v.detected = trajectory_detected(values, t);
    return v;
}

nlohmann::json to_json(const Trajectory& t) {
    using nlohmann::json;
    json services = json::array();
    for (const auto& s : t.services) {
        services.push_back(json{{"node", s.node},
                                {"kind", s.kind == StepAction::Gate ? "gate" : "ticket_machine"},
                                {"arrive", s.arrive},
                                {"start", s.start},
                                {"end", s.end}});
    }
    json maxima = json::array();
    for (const auto& m : t.per_camera_max) maxima.push_back(json{{"camera_id", m.camera_id}, {"max_p", m.max_p}});
    json samples = json::array();
    for (const auto& s : t.samples) {
        samples.push_back(json{{"camera_id", s.camera_id}, {"time", s.time}, {"a_deg", s.a_deg},
                               {"d_m", s.d_m}, {"n_count", s.n_count}, {"p", s.p}});
    }
    return json{{"agent_id", t.agent_id},
                {"kind", std::string(to_string(t.kind))},
                {"scenario", t.scenario},
                {"period", std::string(to_string(t.period))},
                {"route", t.route},
                {"spawn_time", t.spawn_time},
                {"end_time", t.end_time ? json(*t.end_time) : json(nullptr)},
                {"walked_m", t.walked_m},
                {"queue_wait_s", t.queue_wait_s},
                {"service_s", t.service_s},
                {"dwell_s", t.dwell_s},
                {"services", services},
                {"per_camera_max", maxima},
                {"detected", t.detected},
                {"samples", samples}};
}

nlohmann::json to_json(const SimOutput& output) {
    using nlohmann::json;
    json trajectories = json::array();
    for (const auto& t : output.trajectories) trajectories.push_back(to_json(t));
    const auto& c = output.passenger_counts;
    return json{{"rng_seed", output.rng_seed},
                {"end_time", output.end_time},
                {"suspects_per_hour_drawn", output.suspects_per_hour_drawn},
                {"passenger_counts", json{{"spawned", c.spawned},
                                          {"entrance_spawned", c.entrance_spawned},
                                          {"exit_flow_spawned", c.exit_flow_spawned},
                                          {"suspects_spawned", c.suspects_spawned},
                                          {"served", c.served},
                                          {"departed", c.departed},
                                          {"in_transit", c.in_transit}}},
                {"trajectories", trajectories}};
}

}  // namespace twinwatch
