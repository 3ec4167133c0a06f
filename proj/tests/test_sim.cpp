#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "test_support.hpp"
#include "twinwatch/errors.hpp"
#include "twinwatch/sim.hpp"

using namespace twinwatch;
using twinwatch::testing::corridor_layout;
using twinwatch::testing::default_layout;

namespace {

SimConfig base_config(std::uint64_t seed = 1, const char* preset = "Base") {
    SimConfig cfg;
    cfg.seed = seed;
    cfg.preset = builtin_preset(preset, default_layout());
    return cfg;
}

Camera camera_at(Point2D p, double pan) {
    Camera c;
    c.id = "cam";
    c.position = p;
    c.pan_azimuth = pan;
    return c;
}

Agent agent_at(int id, Point2D p, Point2D heading) {
    Agent a;
    a.id = id;
    a.position = p;
    a.heading = heading;
    return a;
}

}  // namespace

TEST_CASE("time of day table") {
    const auto& table = time_of_day_table();
    CHECK(table[0].name == "Morning");
    CHECK(table[0].start_hour == 6);
    CHECK(table[0].end_hour == 12);
    CHECK(table[1].start_hour == 12);
    CHECK(table[2].end_hour == 24);
    CHECK(period_at_hour(6.0) == Period::Morning);
    CHECK(period_at_hour(11.99) == Period::Morning);
    CHECK(period_at_hour(12.0) == Period::Midday);
    CHECK(period_at_hour(23.5) == Period::Afternoon);
    CHECK_THROWS_AS(period_at_hour(5.0), ValidationError);
    CHECK(period_from_string("Midday") == Period::Midday);
    CHECK_THROWS_AS(period_from_string("Evening"), ValidationError);
}

TEST_CASE("default traffic table") {
    const auto t = TrafficTable::defaults();
    CHECK(t.at(Period::Morning).entrance_per_min.mean == 7.0);
    CHECK(t.at(Period::Midday).entrance_per_min.mean == 5.0);
    CHECK(t.at(Period::Afternoon).entrance_per_min.mean == 3.0);
    for (const auto p : {Period::Morning, Period::Midday, Period::Afternoon}) {
        CHECK(t.at(p).entrance_per_min.stddev == 1.5);
        CHECK(t.at(p).exit_per_5min.stddev == 2.0);
    }
    CHECK(t.at(Period::Morning).exit_per_5min.mean == 5.0);
    CHECK(t.at(Period::Midday).exit_per_5min.mean == 7.0);
    CHECK(t.at(Period::Afternoon).exit_per_5min.mean == 9.0);
    const SimConfig cfg;
    CHECK(cfg.suspects_per_hour.mean == 8.0);
    CHECK(cfg.suspects_per_hour.stddev == 2.3);
    CHECK(cfg.threshold.t == 0.45);
}

TEST_CASE("config validation names the field") {
    auto field_of = [](SimConfig cfg) {
        try {
            cfg.validate();
        } catch (const ValidationError& e) {
            return e.field();
        }
        return std::string();
    };
    SimConfig c = base_config();
    CHECK(field_of(c).empty());
    c.sample_interval = 0.0;
    CHECK(field_of(c) == "sample_interval");
    c = base_config();
    c.suspect_scenarios = {4};
    CHECK(field_of(c) == "scenarios");
    c = base_config();
    c.weights = {0.5, 0.5, 0.5};
    CHECK(field_of(c) == "weights");
    c = base_config();
    c.ticket_purchase_fraction = 1.5;
    CHECK(field_of(c) == "ticket_purchase_fraction");
    c = base_config();
    c.gate_delay.stddev = -1.0;
    CHECK(field_of(c) == "gate_delay");
    CHECK_THROWS_AS(run_simulation(default_layout(), base_config(), 0.0), ValidationError);
}

TEST_CASE("suspect routes per scenario") {
    const auto& l = default_layout();
    const auto entrances = l.zone_nodes(ZoneKind::Entrance);
    const auto exits = l.zone_nodes(ZoneKind::Exit);
    const auto platforms = l.zone_nodes(ZoneKind::Platform);
    const auto concourse = l.zone_nodes(ZoneKind::Concourse);
    auto in = [](const std::vector<std::string>& v, const std::string& s) {
        return std::find(v.begin(), v.end(), s) != v.end();
    };
    RngStream rng(5, "routes");
    for (int i = 0; i < 50; ++i) {
        const Route r1 = scenario_route(1, l, rng);
        CHECK(in(entrances, r1.steps.front().node));
        CHECK(in(exits, r1.steps.back().node));
        std::set<std::string> dwell_nodes;
        for (const auto& s : r1.steps) {
            CHECK(s.action != StepAction::Gate);
            if (s.action == StepAction::Dwell) {
                CHECK(in(concourse, s.node));
                dwell_nodes.insert(s.node);
            }
        }
        CHECK(dwell_nodes.size() == 2);

        const Route r2 = scenario_route(2, l, rng);
        CHECK(in(entrances, r2.steps.front().node));
        CHECK(in(platforms, r2.steps.back().node));
        const auto machine = std::find_if(r2.steps.begin(), r2.steps.end(),
                                          [](const RouteStep& s) { return s.action == StepAction::TicketMachine; });
        const auto gate = std::find_if(r2.steps.begin(), r2.steps.end(),
                                       [](const RouteStep& s) { return s.action == StepAction::Gate; });
        REQUIRE(machine != r2.steps.end());
        REQUIRE(gate != r2.steps.end());
        CHECK(machine < gate);

        const Route r3 = scenario_route(3, l, rng);
        CHECK(in(platforms, r3.steps.back().node));
        CHECK(std::none_of(r3.steps.begin(), r3.steps.end(),
                           [](const RouteStep& s) { return s.action == StepAction::TicketMachine; }));
        CHECK(std::count_if(r3.steps.begin(), r3.steps.end(),
                            [](const RouteStep& s) { return s.action == StepAction::Gate; }) == 1);

        // Consecutive route nodes are joined by an edge.
        for (const Route* r : {&r1, &r2, &r3}) {
            const auto nodes = r->nodes();
            for (std::size_t k = 1; k < nodes.size(); ++k) {
                const int a = l.node_index(nodes[k - 1]);
                const auto& nb = l.neighbours(a);
                CHECK(std::any_of(nb.begin(), nb.end(),
                                  [&](const auto& e) { return e.first == l.node_index(nodes[k]); }));
            }
        }
    }
    CHECK_THROWS_AS(scenario_route(0, l, rng), ValidationError);
}

TEST_CASE("regular passenger routes") {
    const auto& l = default_layout();
    RngStream rng(9, "routes");
    const Route with_ticket = entrance_route(l, rng, true);
    CHECK(std::any_of(with_ticket.steps.begin(), with_ticket.steps.end(),
                      [](const RouteStep& s) { return s.action == StepAction::TicketMachine; }));
    const Route out = exit_flow_route(l, rng, "pl2");
    CHECK(out.steps.front().node == "pl2");
    CHECK(l.zone_nodes(ZoneKind::Exit).end() !=
          std::find(l.zone_nodes(ZoneKind::Exit).begin(), l.zone_nodes(ZoneKind::Exit).end(), out.steps.back().node));
}

TEST_CASE("field of view and range") {
    const Camera cam = camera_at({0, 0}, 0.0);
    CHECK(camera_sees(cam, {5, 0}) == doctest::Approx(5.0));
    CHECK(camera_sees(cam, {std::cos(0.4363323129985824) * 10, std::sin(0.4363323129985824) * 10}));  // 25 deg
    CHECK_FALSE(camera_sees(cam, {std::cos(0.4537856055185257) * 10, std::sin(0.4537856055185257) * 10}));  // 26 deg
    CHECK_FALSE(camera_sees(cam, {0.5, 0}));
    CHECK(camera_sees(cam, {1.0, 0}));
    CHECK(camera_sees(cam, {19.0, 0}));
    CHECK_FALSE(camera_sees(cam, {19.01, 0}));
    CHECK_FALSE(camera_sees(cam, {-5, 0}));
}

TEST_CASE("angular deviation") {
    const Camera cam = camera_at({0, 0}, 0.0);
    CHECK(angular_deviation_deg(cam, {-1, 0}) == doctest::Approx(0.0));
    CHECK(angular_deviation_deg(cam, {0, 1}) == doctest::Approx(90.0));
    CHECK(angular_deviation_deg(cam, {1, 0}) == doctest::Approx(180.0));
    CHECK(angular_deviation_deg(cam, direction_from_azimuth(135.0)) == doctest::Approx(45.0));
}

TEST_CASE("geometric observation of a lone person walking at the camera") {
    const Camera cam = camera_at({0, 0}, 0.0);
    const Agent a = agent_at(1, {5, 0}, {-1, 0});
    const std::vector<Agent> all{a};
    const auto s = observe(cam, a, all, DetectionWeights{}, NormalizationBounds{});
    REQUIRE(s);
    CHECK(s->a_deg == doctest::Approx(0.0));
    CHECK(s->d_m == doctest::Approx(5.0));
    CHECK(s->n_count == 1);
    CHECK(s->p == doctest::Approx((1.0 + 4.0 / 18.0 + 1.0 / 18.0) / 3.0).epsilon(1e-12));
    CHECK(std::abs(s->p - 0.425926) < 1e-6);
    CHECK(s->camera_id == "cam");
}

TEST_CASE("crowd count covers everyone in view and is capped") {
    const Camera cam = camera_at({0, 0}, 0.0);
    std::vector<Agent> all;
    for (int i = 0; i < 25; ++i) all.push_back(agent_at(i, {2.0 + 0.5 * i, 0.1}, {-1, 0}));
    all.push_back(agent_at(99, {-3, 0}, {1, 0}));  // behind the camera
    Agent gone = agent_at(100, {3, 0}, {1, 0});
    gone.phase = AgentPhase::Departed;
    all.push_back(gone);
    const auto s = observe(cam, all[0], all, DetectionWeights{}, NormalizationBounds{});
    REQUIRE(s);
    CHECK(s->n_count == 18);

    std::vector<Agent> few(all.begin(), all.begin() + 3);
    few.push_back(all[25]);
    few.push_back(gone);
    CHECK(observe(cam, few[0], few, DetectionWeights{}, NormalizationBounds{})->n_count == 3);
    CHECK_FALSE(observe(cam, all[25], all, DetectionWeights{}, NormalizationBounds{}));
}

TEST_CASE("stochastic observation draws from the sampler") {
    const Camera cam = camera_at({0, 0}, 0.0);
    StochasticSampler s;
    RngStream rng(3, "obs");
    for (int i = 0; i < 1000; ++i) {
        const auto o = observe_stochastic(cam, s, rng, DetectionWeights{}, NormalizationBounds{});
        CHECK(o.a_deg >= 0.0);
        CHECK(o.d_m >= 0.0);
        CHECK(o.n_count >= 1);
        CHECK(o.n_count <= 18);
        CHECK(o.p == doctest::Approx(detection_probability(o.a_deg, o.d_m, o.n_count, {}, {})));
    }
}

TEST_CASE("trajectory verdict keeps per-camera maxima") {
    const std::vector<ObservationSample> samples{{"b", 0, 0, 0, 1, 0.3}, {"a", 1, 0, 0, 1, 0.2},
                                                 {"b", 2, 0, 0, 1, 0.46}, {"a", 3, 0, 0, 1, 0.1}};
    const auto v = suspect_trajectory_verdict(samples, DetectionThreshold{});
    REQUIRE(v.per_camera_max.size() == 2);
    CHECK(v.per_camera_max[0].camera_id == "a");
    CHECK(v.per_camera_max[0].max_p == 0.2);
    CHECK(v.per_camera_max[1].max_p == 0.46);
    CHECK(v.detected);
    CHECK_FALSE(suspect_trajectory_verdict({}, DetectionThreshold{}).detected);
}

TEST_CASE("agents are conserved and kinematics add up") {
    SimConfig cfg = base_config(7);
    cfg.drain = true;
    const SimOutput out = run_simulation(default_layout(), cfg, 3600.0);
    const auto& c = out.passenger_counts;
    CHECK(c.spawned == static_cast<int>(out.trajectories.size()));
    CHECK(c.spawned == c.entrance_spawned + c.exit_flow_spawned + c.suspects_spawned);
    CHECK(c.in_transit == 0);
    CHECK(c.departed == c.spawned);
    int suspects_drawn = 0;
    for (const int n : out.suspects_per_hour_drawn) suspects_drawn += n;
    CHECK(c.suspects_spawned == suspects_drawn);

    int services = 0;
    for (const auto& t : out.trajectories) {
        REQUIRE(t.completed());
        services += static_cast<int>(t.services.size());
        CHECK(t.walked_m == doctest::Approx(route_length(default_layout(), t.route)));
        const double moving = *t.end_time - t.spawn_time - t.queue_wait_s - t.service_s - t.dwell_s;
        CHECK(t.walked_m / cfg.walking_speed == doctest::Approx(moving).epsilon(1e-9));
        CHECK(t.queue_wait_s >= 0.0);
        for (const auto& s : t.services) {
            CHECK(s.start >= s.arrive);
            CHECK(s.end - s.start >= (s.kind == StepAction::Gate ? 1.0 : 6.0));
        }
        if (t.kind == AgentKind::Suspect) CHECK(t.scenario >= 1);
    }
    CHECK(c.served == services);
}

TEST_CASE("each service point serves one person at a time in arrival order") {
    SimConfig cfg = base_config(11);
    cfg.drain = true;
    // Heavier load so queues actually form.
    cfg.traffic.at(Period::Morning).entrance_per_min = {20.0, 2.0, 0.0, std::nullopt};
    const SimOutput out = run_simulation(default_layout(), cfg, 1800.0);
    std::map<std::string, std::vector<ServiceRecord>> by_node;
    double total_wait = 0.0;
    for (const auto& t : out.trajectories) {
        for (const auto& s : t.services) by_node[s.node].push_back(s);
        total_wait += t.queue_wait_s;
    }
    CHECK(total_wait > 0.0);
    for (auto& [node, recs] : by_node) {
        std::stable_sort(recs.begin(), recs.end(), [](const auto& a, const auto& b) { return a.arrive < b.arrive; });
        for (std::size_t i = 1; i < recs.size(); ++i) {
            CAPTURE(node);
            CHECK(recs[i].start >= recs[i - 1].end - 1e-9);
            CHECK(recs[i].start >= recs[i - 1].start);
        }
    }
}

TEST_CASE("six hour morning run loses nobody") {
    SimConfig cfg = base_config(3);
    const SimOutput out = run_simulation(default_layout(), cfg, 6 * 3600.0);
    const auto& c = out.passenger_counts;
    int unfinished = 0;
    for (const auto& t : out.trajectories) unfinished += !t.completed();
    CHECK(c.spawned == c.departed + c.in_transit);
    CHECK(c.in_transit == unfinished);
    CHECK(out.suspects_per_hour_drawn.size() == 6);
}

TEST_CASE("same seed gives identical output, a different seed does not") {
    SimConfig cfg = base_config(42);
    const auto a = to_json(run_simulation(default_layout(), cfg, 1800.0)).dump();
    const auto b = to_json(run_simulation(default_layout(), cfg, 1800.0)).dump();
    CHECK(a == b);
    cfg.seed = 43;
    CHECK(to_json(run_simulation(default_layout(), cfg, 1800.0)).dump() != a);
}

TEST_CASE("entrance arrivals follow the per-minute rate") {
    SimConfig cfg = base_config();
    double sum = 0.0;
    const int reps = 30;
    for (int r = 0; r < reps; ++r) {
        cfg.seed = 1000 + r;
        sum += run_simulation(default_layout(), cfg, 3600.0).passenger_counts.entrance_spawned;
    }
    // Sum of 60 rounded N(7, 1.5^2) counts: mean 420, sd about 1.5 * sqrt(60).
    const double se = 1.5 * std::sqrt(60.0) / std::sqrt(static_cast<double>(reps));
    CHECK(std::abs(sum / reps - 420.0) < 4 * se);
}

TEST_CASE("restricting suspect scenarios") {
    SimConfig cfg = base_config(5);
    cfg.suspect_scenarios = {2};
    cfg.drain = true;
    const auto out = run_simulation(default_layout(), cfg, 3600.0);
    int suspects = 0;
    for (const auto& t : out.trajectories) {
        if (t.kind != AgentKind::Suspect) continue;
        ++suspects;
        CHECK(t.scenario == 2);
        CHECK(std::any_of(t.services.begin(), t.services.end(),
                          [](const ServiceRecord& s) { return s.kind == StepAction::TicketMachine; }));
    }
    CHECK(suspects > 0);
}

TEST_CASE("geometric samples are consistent with the detection model") {
    SimConfig cfg = base_config(8, "Model11");
    cfg.drain = true;
    const auto out = run_simulation(default_layout(), cfg, 3600.0);
    std::set<std::string> ids;
    for (const auto& c : cfg.preset.cameras) ids.insert(c.id);
    int observed = 0;
    for (const auto& t : out.trajectories) {
        if (t.kind != AgentKind::Suspect) continue;
        for (const auto& s : t.samples) {
            ++observed;
            CHECK(ids.count(s.camera_id) == 1);
            CHECK(s.n_count >= 1);
            CHECK(s.d_m >= 1.0);
            CHECK(s.d_m <= 19.0);
            CHECK(s.p == doctest::Approx(detection_probability(s.a_deg, s.d_m, s.n_count, cfg.weights, cfg.bounds)));
        }
        const auto v = suspect_trajectory_verdict(t.samples, cfg.threshold);
        CHECK(v.detected == t.detected);
        REQUIRE(v.per_camera_max.size() == t.per_camera_max.size());
        for (std::size_t i = 0; i < v.per_camera_max.size(); ++i) {
            CHECK(v.per_camera_max[i].camera_id == t.per_camera_max[i].camera_id);
            CHECK(v.per_camera_max[i].max_p == t.per_camera_max[i].max_p);
        }
    }
    CHECK(observed > 0);
}

TEST_CASE("regular passengers are not sampled unless asked") {
    SimConfig cfg = base_config(4);
    auto out = run_simulation(default_layout(), cfg, 900.0);
    for (const auto& t : out.trajectories) {
        if (t.kind == AgentKind::Regular) CHECK(t.samples.empty());
    }
    cfg.record_regular_samples = true;
    out = run_simulation(default_layout(), cfg, 900.0);
    CHECK(std::any_of(out.trajectories.begin(), out.trajectories.end(), [](const Trajectory& t) {
        return t.kind == AgentKind::Regular && !t.samples.empty();
    }));
}

TEST_CASE("frames are delivered only while a suspect is inside") {
    SimConfig cfg = base_config(6);
    int frames = 0;
    double last = -1.0;
    const auto out = run_simulation(default_layout(), cfg, 1800.0, [&](const Frame& f) {
        ++frames;
        CHECK(f.time > last);
        last = f.time;
        CHECK(std::any_of(f.agents.begin(), f.agents.end(), [](const AgentSnapshot& a) { return a.suspect; }));
        CHECK(std::fmod(f.time, cfg.sample_interval) == doctest::Approx(0.0));
    });
    if (out.passenger_counts.suspects_spawned > 0) CHECK(frames > 0);
}

TEST_CASE("the same camera sees the same suspect identically in every preset (stochastic mode)") {
    SimConfig small = base_config(21, "Base");
    SimConfig big = base_config(21, "Model11");
    small.mode = big.mode = ObservationMode::Stochastic;
    const auto a = run_simulation(default_layout(), small, 3600.0);
    const auto b = run_simulation(default_layout(), big, 3600.0);
    REQUIRE(a.trajectories.size() == b.trajectories.size());
    for (std::size_t i = 0; i < a.trajectories.size(); ++i) {
        const auto& ta = a.trajectories[i];
        const auto& tb = b.trajectories[i];
        if (ta.kind != AgentKind::Suspect) continue;
        CHECK(ta.per_camera_max.size() == 6);
        CHECK(tb.per_camera_max.size() == 11);
        for (const auto& m : ta.per_camera_max) {
            const auto it = std::find_if(tb.per_camera_max.begin(), tb.per_camera_max.end(),
                                         [&](const CameraMax& x) { return x.camera_id == m.camera_id; });
            REQUIRE(it != tb.per_camera_max.end());
            CHECK(it->max_p == m.max_p);
        }
        if (ta.detected) CHECK(tb.detected);
    }
}

TEST_CASE("Bernoulli hook") {
    SimConfig cfg = base_config(2);
    cfg.mode = ObservationMode::Stochastic;
    cfg.bernoulli_p = 1.0;
    for (const auto& t : run_simulation(default_layout(), cfg, 3600.0).trajectories) {
        if (t.kind == AgentKind::Suspect) CHECK(t.detected);
    }
    cfg.bernoulli_p = 0.0;
    for (const auto& t : run_simulation(default_layout(), cfg, 3600.0).trajectories) {
        if (t.kind == AgentKind::Suspect) CHECK_FALSE(t.detected);
    }
    cfg.bernoulli_p = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("corridor suspects walk straight at the end-wall camera") {
    SimConfig cfg;
    cfg.seed = 1;
    cfg.preset = corridor_layout().presets.front();
    cfg.preset.cameras[0].pan_azimuth = 180.0;
    cfg.suspect_scenarios = {3};
    cfg.drain = true;
    const auto out = run_simulation(corridor_layout(), cfg, 3600.0);
    int suspects = 0;
    for (const auto& t : out.trajectories) {
        if (t.kind != AgentKind::Suspect) continue;
        ++suspects;
        for (const auto& s : t.samples) CHECK(s.a_deg == doctest::Approx(0.0).epsilon(1e-9));
    }
    CHECK(suspects > 0);
}

TEST_CASE("simulation output JSON") {
    SimConfig cfg = base_config(1);
    const auto j = to_json(run_simulation(default_layout(), cfg, 600.0));
    CHECK(j.at("rng_seed") == 1);
    CHECK(j.at("passenger_counts").contains("spawned"));
    REQUIRE(j.at("trajectories").size() > 0);
    const auto& t = j.at("trajectories")[0];
    for (const char* key : {"agent_id", "kind", "route", "spawn_time", "detected", "per_camera_max"}) {
        CHECK(t.contains(key));
    }
}
