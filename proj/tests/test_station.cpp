#include <doctest.h>

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <functional>
#include <limits>

#include "test_support.hpp"
#include "twinwatch/errors.hpp"
#include "twinwatch/station.hpp"

using namespace twinwatch;
using twinwatch::testing::data_path;
using twinwatch::testing::default_layout;
using twinwatch::testing::layout_json;
using json = nlohmann::json;

namespace {

std::string strip_ws(const std::string& s) {
    std::string out;
    for (const char c : s) {
        if (!std::isspace(static_cast<unsigned char>(c))) out += c;
    }
    return out;
}

// Message of the ValidationError thrown by fn, or "" when nothing is thrown.
std::string validation_message(const std::function<void()>& fn, std::string* field = nullptr) {
    try {
        fn();
    } catch (const ValidationError& e) {
        if (field) *field = e.field();
        return e.what();
    }
    return "";
}

// Every simple path between two nodes, by depth-first enumeration.
void all_simple_paths(const StationLayout& l, int at, int goal, std::vector<int>& path, std::vector<bool>& used,
                      std::vector<std::vector<int>>& out) {
    if (at == goal) {
        out.push_back(path);
        return;
    }
    for (const auto& [next, len] : l.neighbours(at)) {
        (void)len;
        if (used[static_cast<std::size_t>(next)]) continue;
        used[static_cast<std::size_t>(next)] = true;
        path.push_back(next);
        all_simple_paths(l, next, goal, path, used, out);
        path.pop_back();
        used[static_cast<std::size_t>(next)] = false;
    }
}

// Shortest simple path by exhaustive search; ties go to the smaller id sequence.
std::vector<std::string> brute_force_route(const StationLayout& l, const std::string& from, const std::string& to) {
    const int s = l.node_index(from);
    const int g = l.node_index(to);
    std::vector<int> path{s};
    std::vector<bool> used(l.nav_nodes.size(), false);
    used[static_cast<std::size_t>(s)] = true;
    std::vector<std::vector<int>> paths;
    all_simple_paths(l, s, g, path, used, paths);
    double best_len = std::numeric_limits<double>::infinity();
    std::vector<std::string> best;
    for (const auto& p : paths) {
        std::vector<std::string> ids;
        for (const int i : p) ids.push_back(l.nav_nodes[static_cast<std::size_t>(i)].id);
        const double len = route_length(l, ids);
        if (len < best_len - 1e-9 || (std::abs(len - best_len) <= 1e-9 && ids < best)) {
            best_len = std::min(best_len, len);
            best = ids;
        }
    }
    return best;
}

json square_graph() {
    // a(0,0) b(0,1) c(1,0) d(1,1): two equally long routes a-b-d and a-c-d.
    json j = layout_json("corridor");
    j["bounds"] = {{"min", {{"x", 0.0}, {"y", 0.0}}}, {"max", {{"x", 2.0}, {"y", 2.0}}}};
    j["nav_nodes"] = json::array({{{"id", "a"}, {"x", 0.0}, {"y", 0.0}},
                                  {{"id", "b"}, {"x", 0.0}, {"y", 1.0}},
                                  {{"id", "c"}, {"x", 1.0}, {"y", 0.0}},
                                  {{"id", "d"}, {"x", 1.0}, {"y", 1.0}}});
    j["nav_edges"] = json::array({{{"from", "a"}, {"to", "c"}, {"length", 1.0}},
                                  {{"from", "a"}, {"to", "b"}, {"length", 1.0}},
                                  {{"from", "c"}, {"to", "d"}, {"length", 1.0}},
                                  {{"from", "b"}, {"to", "d"}, {"length", 1.0}}});
    j["zones"] = json::array();
    j["service_points"] = {{"gates", {{"count", 0}, {"nodes", json::array()}}},
                           {"ticket_machines", {{"count", 0}, {"nodes", json::array()}}}};
    j["camera_mounts"] = json::array({{{"id", "wall"}, {"a", {{"x", 0.0}, {"y", 2.0}}}, {"b", {{"x", 2.0}, {"y", 2.0}}}}});
    j["presets"] = json::array();
    return j;
}

}  // namespace

TEST_CASE("shipped default layout loads and carries the four nested presets") {
    const auto& l = default_layout();
    CHECK(l.name == "default_station");
    CHECK(l.bounds.width() == 60.0);
    CHECK(l.bounds.height() == 30.0);
    CHECK(l.zone_count(ZoneKind::Entrance) == 2);
    CHECK(l.zone_count(ZoneKind::Platform) == 2);
    CHECK(l.service_points.gates.count == 4);
    CHECK(l.service_points.ticket_machines.count == 3);

    std::vector<std::string> previous;
    for (const auto& name : builtin_preset_names()) {
        const auto preset = builtin_preset(name, l);
        CHECK(static_cast<int>(preset.cameras.size()) == builtin_preset_size(name));
        auto ids = preset.camera_ids();
        std::sort(ids.begin(), ids.end());
        CHECK(std::includes(ids.begin(), ids.end(), previous.begin(), previous.end()));
        previous = ids;
        for (const auto& c : preset.cameras) CHECK(l.mount_for(c.position) != nullptr);
    }
    CHECK(builtin_preset_size("Base") == 6);
    CHECK(builtin_preset_size("Model11") == 11);
}

TEST_CASE("preset display names follow the accuracy table rows") {
    CHECK(preset_display_name("Base") == "Base Model");
    CHECK(preset_display_name("Model7") == "Model 7");
    CHECK(preset_display_name("Model11") == "Model 11");
}

TEST_CASE("unknown preset names the preset field") {
    std::string field;
    const auto msg = validation_message([] { builtin_preset("Model8", default_layout()); }, &field);
    CHECK(field == "preset");
    CHECK(msg.find("Model8") != std::string::npos);
}

TEST_CASE("canonical layout files survive a load/save round trip") {
    for (const char* name : {"default_station", "corridor"}) {
        const std::string path = data_path(std::string("layouts/") + name + ".json");
        const std::string original = twinwatch::testing::read_text(path);
        const auto layout = load_layout(path);
        CHECK(strip_ws(layout_to_string(layout)) == strip_ws(original));

        const auto tmp = std::filesystem::temp_directory_path() / (std::string("twinwatch_rt_") + name + ".json");
        save_layout(layout, tmp);
        CHECK(strip_ws(twinwatch::testing::read_text(tmp.string())) == strip_ws(original));
        CHECK(layout_hash(load_layout(tmp)) == layout_hash(layout));
        std::filesystem::remove(tmp);
    }
}

TEST_CASE("edge to a missing node is rejected and the node is named") {
    json j = layout_json();
    j["nav_edges"][0]["to"] = "n99";
    std::string field;
    const auto msg = validation_message([&] { layout_from_json(j); }, &field);
    CHECK(msg.find("n99") != std::string::npos);
    CHECK(field == "n99");
}

TEST_CASE("edge length must match the node distance") {
    json j = layout_json();
    j["nav_edges"][0]["length"] = j["nav_edges"][0]["length"].get<double>() + 0.5;
    CHECK_THROWS_AS(layout_from_json(j), ValidationError);

    // Rounding noise well under the tolerance is accepted.
    json k = layout_json();
    k["nav_edges"][0]["length"] = k["nav_edges"][0]["length"].get<double>() + 1e-9;
    CHECK_NOTHROW(layout_from_json(k));
}

TEST_CASE("layout invariants") {
    SUBCASE("node outside bounds") {
        json j = layout_json();
        j["nav_nodes"][0]["x"] = 100.0;
        CHECK_THROWS_AS(layout_from_json(j), ValidationError);
    }
    SUBCASE("disconnected graph") {
        json j = layout_json();
        j["nav_nodes"].push_back({{"id", "island"}, {"x", 1.0}, {"y", 1.0}});
        std::string field;
        validation_message([&] { layout_from_json(j); }, &field);
        CHECK(field == "island");
    }
    SUBCASE("service count disagrees with node list") {
        json j = layout_json();
        j["service_points"]["gates"]["count"] = 5;
        CHECK_THROWS_AS(layout_from_json(j), ValidationError);
    }
    SUBCASE("camera off every mount") {
        json j = layout_json();
        j["presets"][0]["cameras"][0]["position"] = {{"x", 30.0}, {"y", 15.0}};
        CHECK_THROWS_AS(layout_from_json(j), ValidationError);
    }
    SUBCASE("same camera id with two poses") {
        json j = layout_json();
        j["presets"][1]["cameras"][0]["pan_azimuth"] = 10.0;
        CHECK_THROWS_AS(layout_from_json(j), ValidationError);
    }
    SUBCASE("built-in preset with the wrong camera count") {
        json j = layout_json();
        j["presets"][0]["cameras"].erase(0);
        CHECK_THROWS_AS(layout_from_json(j), ValidationError);
    }
    SUBCASE("presets not nested") {
        json j = layout_json();
        // Swap one Model7 camera for a fresh one so Base is no longer a subset.
        auto cam = j["presets"][1]["cameras"][0];
        cam["id"] = "fresh";
        j["presets"][1]["cameras"][0] = cam;
        CHECK_THROWS_AS(layout_from_json(j), ValidationError);
    }
    SUBCASE("pan outside [0, 360)") {
        Camera c;
        c.id = "c";
        c.pan_azimuth = 360.0;
        CHECK_THROWS_AS(validate_camera(c), ValidationError);
    }
    SUBCASE("malformed JSON types") {
        json j = layout_json();
        j["nav_nodes"][0]["x"] = "east";
        CHECK_THROWS_AS(layout_from_json(j), ParseError);
    }
}

TEST_CASE("load_layout reports missing files as I/O errors") {
    CHECK_THROWS_AS(load_layout("/nonexistent/layout.json"), IoError);
}

TEST_CASE("shortest_route basics") {
    const auto& l = default_layout();
    CHECK(shortest_route(l, "e1", "e1") == std::vector<std::string>{"e1"});
    CHECK_THROWS_AS(shortest_route(l, "e1", "nowhere"), ValidationError);

    const auto route = shortest_route(l, "e1", "pl1");
    const auto gates = l.zone_nodes(ZoneKind::GateLine);
    const bool via_gate = std::any_of(route.begin(), route.end(), [&](const std::string& n) {
        return std::find(gates.begin(), gates.end(), n) != gates.end();
    });
    CHECK(via_gate);
    CHECK(route == brute_force_route(l, "e1", "pl1"));
}

TEST_CASE("shortest_route matches exhaustive search for every node pair") {
    const auto& l = default_layout();
    for (const auto& a : l.nav_nodes) {
        for (const auto& b : l.nav_nodes) {
            const auto fast = shortest_route(l, a.id, b.id);
            const auto slow = brute_force_route(l, a.id, b.id);
            CAPTURE(a.id);
            CAPTURE(b.id);
            CHECK(route_length(l, fast) == doctest::Approx(route_length(l, slow)).epsilon(1e-12));
            CHECK(fast == slow);
        }
    }
}

TEST_CASE("equal-length routes break ties by node id") {
    const auto l = layout_from_json(square_graph());
    CHECK(shortest_route(l, "a", "d") == std::vector<std::string>{"a", "b", "d"});
    CHECK(shortest_route(l, "d", "a") == std::vector<std::string>{"d", "b", "a"});
}

TEST_CASE("camera JSON round trip") {
    Camera c{"x", {1.5, 2.0}, 3.0, 45.0, 60.0, 0.5, 12.0};
    CHECK(camera_from_json(camera_to_json(c)) == c);
}
