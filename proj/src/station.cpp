#include "twinwatch/station.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <queue>
#include <set>
#include <sstream>

#include "twinwatch/errors.hpp"
#include "twinwatch/hash.hpp"

namespace twinwatch {

using nlohmann::json;

namespace {

constexpr double kEdgeTolerance = 1e-6;
constexpr double kMountTolerance = 1e-6;

struct ZoneKindName {
    ZoneKind kind;
    std::string_view name;
};

constexpr ZoneKindName kZoneKindNames[] = {
    {ZoneKind::Entrance, "entrance"},        {ZoneKind::Concourse, "concourse"},
    {ZoneKind::GateLine, "gate_line"},       {ZoneKind::TicketMachines, "ticket_machines"},
    {ZoneKind::Platform, "platform"},        {ZoneKind::Exit, "exit"},
};

json point_to_json(Point2D p) { return json{{"x", p.x}, {"y", p.y}}; }

Point2D point_from_json(const json& j) {
    return {j.at("x").get<double>(), j.at("y").get<double>()};
}

json rect_to_json(const Rect& r) {
    return json{{"min", point_to_json(r.min)}, {"max", point_to_json(r.max)}};
}

Rect rect_from_json(const json& j) {
    return {point_from_json(j.at("min")), point_from_json(j.at("max"))};
}

bool finite(Point2D p) { return std::isfinite(p.x) && std::isfinite(p.y); }

}  // namespace

std::string_view to_string(ZoneKind kind) {
    for (const auto& entry : kZoneKindNames) {
        if (entry.kind == kind) return entry.name;
    }
    return "unknown";
}

ZoneKind zone_kind_from_string(std::string_view name) {
    for (const auto& entry : kZoneKindNames) {
        if (entry.name == name) return entry.kind;
    }
    throw ValidationError("zones.kind", "unknown zone kind '" + std::string(name) + "'");
}

void validate_camera(const Camera& camera) {
    const std::string where = "camera '" + camera.id + "'";
    if (camera.id.empty()) throw ValidationError("cameras.id", "camera id must not be empty");
    if (!finite(camera.position)) {
        throw ValidationError("cameras.position", where + ": position must be finite");
    }
    if (!std::isfinite(camera.pan_azimuth) || camera.pan_azimuth < 0.0 ||
        camera.pan_azimuth >= 360.0) {
        throw ValidationError("cameras.pan_azimuth", where + ": pan_azimuth must lie in [0, 360)");
    }
    if (!(camera.fov_deg > 0.0 && camera.fov_deg < 180.0)) {
        throw ValidationError("cameras.fov_deg", where + ": fov_deg must lie in (0, 180)");
    }
    if (!(camera.min_range_m > 0.0 && camera.min_range_m < camera.max_range_m) ||
        !std::isfinite(camera.max_range_m)) {
        throw ValidationError("cameras.range",
                              where + ": require 0 < min_range_m < max_range_m");
    }
    if (!(camera.mount_height > 0.0) || !std::isfinite(camera.mount_height)) {
        throw ValidationError("cameras.mount_height", where + ": mount_height must be positive");
    }
}

int builtin_preset_size(std::string_view name) {
    if (name == "Base") return 6;
    if (name == "Model7") return 7;
    if (name == "Model9") return 9;
    if (name == "Model11") return 11;
    return -1;
}

std::string preset_display_name(std::string_view name) {
    if (name == "Base") return "Base Model";
    if (name == "Model7") return "Model 7";
    if (name == "Model9") return "Model 9";
    if (name == "Model11") return "Model 11";
    return std::string(name);
}

std::vector<std::string> CameraPreset::camera_ids() const {
    std::vector<std::string> ids;
    ids.reserve(cameras.size());
    for (const auto& c : cameras) ids.push_back(c.id);
    return ids;
}

json camera_to_json(const Camera& camera) {
    return json{{"id", camera.id},
                {"position", point_to_json(camera.position)},
                {"mount_height", camera.mount_height},
                {"pan_azimuth", camera.pan_azimuth},
                {"fov_deg", camera.fov_deg},
                {"min_range_m", camera.min_range_m},
                {"max_range_m", camera.max_range_m}};
}

Camera camera_from_json(const json& j) {
    Camera c;
    c.id = j.at("id").get<std::string>();
    c.position = point_from_json(j.at("position"));
    c.mount_height = j.value("mount_height", c.mount_height);
    c.pan_azimuth = j.value("pan_azimuth", c.pan_azimuth);
    c.fov_deg = j.value("fov_deg", c.fov_deg);
    c.min_range_m = j.value("min_range_m", c.min_range_m);
    c.max_range_m = j.value("max_range_m", c.max_range_m);
    return c;
}

void StationLayout::validate_and_index() {
    if (name.empty()) throw ValidationError("name", "layout name must not be empty");
    if (!finite(bounds.min) || !finite(bounds.max) || !(bounds.width() > 0.0) ||
        !(bounds.height() > 0.0)) {
        throw ValidationError("bounds", "bounds must be a non-empty finite rectangle");
    }

    node_lookup_.clear();
    for (std::size_t i = 0; i < nav_nodes.size(); ++i) {
        const auto& n = nav_nodes[i];
        if (n.id.empty()) throw ValidationError("nav_nodes", "node id must not be empty");
        if (!finite(n.position) || !bounds.contains(n.position)) {
            throw ValidationError(n.id, "node '" + n.id + "' lies outside the layout bounds");
        }
        if (!node_lookup_.emplace(n.id, static_cast<int>(i)).second) {
            throw ValidationError(n.id, "duplicate node id '" + n.id + "'");
        }
    }
    if (nav_nodes.empty()) throw ValidationError("nav_nodes", "layout has no navigation nodes");

    adjacency_.assign(nav_nodes.size(), {});
    for (const auto& e : nav_edges) {
        for (const auto* end : {&e.from, &e.to}) {
            if (!has_node(*end)) {
                throw ValidationError(*end, "edge " + e.from + "-" + e.to +
                                                " references missing node '" + *end + "'");
            }
        }
        const double euclid = distance(node_position(e.from), node_position(e.to));
        if (!(e.length > 0.0) || std::abs(e.length - euclid) > kEdgeTolerance) {
            std::ostringstream msg;
            msg.precision(17);
            msg << "edge " << e.from << "-" << e.to << " has length " << e.length
                << " but its endpoints are " << euclid << " m apart";
            throw ValidationError(e.from + "-" + e.to, msg.str());
        }
        const int a = node_index(e.from);
        const int b = node_index(e.to);
        adjacency_[static_cast<std::size_t>(a)].emplace_back(b, e.length);
        adjacency_[static_cast<std::size_t>(b)].emplace_back(a, e.length);
    }
    for (auto& list : adjacency_) {
        std::sort(list.begin(), list.end(), [this](const auto& l, const auto& r) {
            const auto& li = nav_nodes[static_cast<std::size_t>(l.first)].id;
            const auto& ri = nav_nodes[static_cast<std::size_t>(r.first)].id;
            return li != ri ? li < ri : l.second < r.second;
        });
    }

    // connectivity
    std::vector<char> seen(nav_nodes.size(), 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
        const int u = stack.back();
        stack.pop_back();
        for (const auto& [v, len] : neighbours(u)) {
            if (!seen[static_cast<std::size_t>(v)]) {
                seen[static_cast<std::size_t>(v)] = 1;
                stack.push_back(v);
            }
        }
    }
    for (std::size_t i = 0; i < seen.size(); ++i) {
        if (!seen[i]) {
            throw ValidationError(nav_nodes[i].id, "navigation graph is disconnected: node '" +
                                                       nav_nodes[i].id + "' is unreachable");
        }
    }

    std::set<std::string, std::less<>> zone_ids;
    for (const auto& z : zones) {
        if (!zone_ids.insert(z.id).second) {
            throw ValidationError(z.id, "duplicate zone id '" + z.id + "'");
        }
        if (z.nodes.empty()) {
            throw ValidationError(z.id, "zone '" + z.id + "' references no navigation node");
        }
        for (const auto& n : z.nodes) {
            if (!has_node(n)) {
                throw ValidationError(n, "zone '" + z.id + "' references missing node '" + n + "'");
            }
        }
    }

    auto check_group = [this](const ServicePointGroup& g, const std::string& label) {
        if (g.count != static_cast<int>(g.nodes.size())) {
            throw ValidationError("service_points." + label,
                                  label + " count does not match its node list");
        }
        for (const auto& n : g.nodes) {
            if (!has_node(n)) {
                throw ValidationError(n, label + " references missing node '" + n + "'");
            }
        }
    };
    check_group(service_points.gates, "gates");
    check_group(service_points.ticket_machines, "ticket_machines");

    std::set<std::string, std::less<>> mount_ids;
    for (const auto& m : camera_mounts) {
        if (!mount_ids.insert(m.id).second) {
            throw ValidationError(m.id, "duplicate camera mount id '" + m.id + "'");
        }
        if (!finite(m.a) || !finite(m.b) || m.a == m.b) {
            throw ValidationError(m.id, "camera mount '" + m.id + "' is degenerate");
        }
    }

    std::map<std::string, Camera, std::less<>> camera_by_id;
    std::set<std::string, std::less<>> preset_names;
    for (const auto& p : presets) {
        if (!preset_names.insert(p.name).second) {
            throw ValidationError(p.name, "duplicate preset '" + p.name + "'");
        }
        std::set<std::string, std::less<>> ids;
        for (const auto& c : p.cameras) {
            validate_camera(c);
            if (!ids.insert(c.id).second) {
                throw ValidationError(c.id, "preset '" + p.name + "' repeats camera '" + c.id + "'");
            }
            if (mount_for(c.position) == nullptr) {
                throw ValidationError(c.id, "camera '" + c.id + "' is not on any camera mount");
            }
            auto [it, fresh] = camera_by_id.emplace(c.id, c);
            if (!fresh && !(it->second == c)) {
                throw ValidationError(c.id, "camera '" + c.id + "' has different poses in different presets");
            }
        }
        const int expected = builtin_preset_size(p.name);
        if (expected >= 0 && static_cast<int>(p.cameras.size()) != expected) {
            throw ValidationError(p.name, "preset '" + p.name + "' must have " +
                                              std::to_string(expected) + " cameras");
        }
    }

    // nesting of the built-in presets
    const CameraPreset* previous = nullptr;
    for (const auto& name_ref : builtin_preset_names()) {
        const CameraPreset* current = find_preset(name_ref);
        if (current == nullptr) continue;
        if (previous != nullptr) {
            const auto ids = current->camera_ids();
            for (const auto& id : previous->camera_ids()) {
                if (std::find(ids.begin(), ids.end(), id) == ids.end()) {
                    throw ValidationError(current->name, "preset '" + current->name +
                                                             "' does not contain camera '" + id +
                                                             "' of preset '" + previous->name + "'");
                }
            }
        }
        previous = current;
    }
}

bool StationLayout::has_node(std::string_view id) const { return node_lookup_.find(id) != node_lookup_.end(); }

int StationLayout::node_index(std::string_view id) const {
    const auto it = node_lookup_.find(id);
    return it == node_lookup_.end() ? -1 : it->second;
}

const NavNode& StationLayout::node(std::string_view id) const {
    const int idx = node_index(id);
    if (idx < 0) throw ValidationError(std::string(id), "unknown node '" + std::string(id) + "'");
    return nav_nodes[static_cast<std::size_t>(idx)];
}

std::vector<std::string> StationLayout::zone_nodes(ZoneKind kind) const {
    std::vector<std::string> out;
    for (const auto& z : zones) {
        if (z.kind != kind) continue;
        for (const auto& n : z.nodes) {
            if (std::find(out.begin(), out.end(), n) == out.end()) out.push_back(n);
        }
    }
    return out;
}

int StationLayout::zone_count(ZoneKind kind) const {
    return static_cast<int>(std::count_if(zones.begin(), zones.end(),
                                          [kind](const Zone& z) { return z.kind == kind; }));
}

const MountSegment* StationLayout::mount(std::string_view id) const {
    for (const auto& m : camera_mounts) {
        if (m.id == id) return &m;
    }
    return nullptr;
}

const MountSegment* StationLayout::mount_for(Point2D p) const {
    for (const auto& m : camera_mounts) {
        if (distance_to_segment(p, m.a, m.b) <= kMountTolerance) return &m;
    }
    return nullptr;
}

const CameraPreset* StationLayout::find_preset(std::string_view preset_name) const {
    for (const auto& p : presets) {
        if (p.name == preset_name) return &p;
    }
    return nullptr;
}

StationLayout layout_from_json(const json& j) {
    StationLayout layout;
    try {
        if (!j.is_object()) throw ParseError("layout document must be a JSON object");
        const int version = j.at("format_version").get<int>();
        if (version != StationLayout::kFormatVersion) {
            throw ValidationError("format_version",
                                  "unsupported layout format_version " + std::to_string(version));
        }
        layout.name = j.at("name").get<std::string>();
        layout.bounds = rect_from_json(j.at("bounds"));
        for (const auto& z : j.at("zones")) {
            Zone zone;
            zone.id = z.at("id").get<std::string>();
            zone.kind = zone_kind_from_string(z.at("kind").get<std::string>());
            zone.area = rect_from_json(z.at("area"));
            zone.nodes = z.at("nodes").get<std::vector<std::string>>();
            layout.zones.push_back(std::move(zone));
        }
        for (const auto& n : j.at("nav_nodes")) {
            layout.nav_nodes.push_back({n.at("id").get<std::string>(), point_from_json(n)});
        }
        for (const auto& e : j.at("nav_edges")) {
            layout.nav_edges.push_back({e.at("from").get<std::string>(),
                                        e.at("to").get<std::string>(),
                                        e.at("length").get<double>()});
        }
        const auto& sp = j.at("service_points");
        for (auto [key, group] : {std::pair{"gates", &layout.service_points.gates},
                                  std::pair{"ticket_machines", &layout.service_points.ticket_machines}}) {
            group->count = sp.at(key).at("count").get<int>();
            group->nodes = sp.at(key).at("nodes").get<std::vector<std::string>>();
        }
        for (const auto& m : j.at("camera_mounts")) {
            layout.camera_mounts.push_back({m.at("id").get<std::string>(), point_from_json(m.at("a")),
                                            point_from_json(m.at("b"))});
        }
        for (const auto& p : j.at("presets")) {
            CameraPreset preset;
            preset.name = p.at("name").get<std::string>();
            for (const auto& c : p.at("cameras")) preset.cameras.push_back(camera_from_json(c));
            layout.presets.push_back(std::move(preset));
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed layout: ") + e.what());
    }
    layout.validate_and_index();
    return layout;
}

json layout_to_json(const StationLayout& layout) {
    json j;
    j["format_version"] = StationLayout::kFormatVersion;
    j["name"] = layout.name;
    j["bounds"] = rect_to_json(layout.bounds);
    j["zones"] = json::array();
    for (const auto& z : layout.zones) {
        j["zones"].push_back(json{{"id", z.id},
                                  {"kind", std::string(to_string(z.kind))},
                                  {"area", rect_to_json(z.area)},
                                  {"nodes", z.nodes}});
    }
    j["nav_nodes"] = json::array();
    for (const auto& n : layout.nav_nodes) {
        j["nav_nodes"].push_back(json{{"id", n.id}, {"x", n.position.x}, {"y", n.position.y}});
    }
    j["nav_edges"] = json::array();
    for (const auto& e : layout.nav_edges) {
        j["nav_edges"].push_back(json{{"from", e.from}, {"to", e.to}, {"length", e.length}});
    }
    const auto& sp = layout.service_points;
    j["service_points"] = json{
        {"gates", json{{"count", sp.gates.count}, {"nodes", sp.gates.nodes}}},
        {"ticket_machines", json{{"count", sp.ticket_machines.count}, {"nodes", sp.ticket_machines.nodes}}}};
    j["camera_mounts"] = json::array();
    for (const auto& m : layout.camera_mounts) {
        j["camera_mounts"].push_back(json{{"id", m.id}, {"a", point_to_json(m.a)}, {"b", point_to_json(m.b)}});
    }
    j["presets"] = json::array();
    for (const auto& p : layout.presets) {
        json cams = json::array();
        for (const auto& c : p.cameras) cams.push_back(camera_to_json(c));
        j["presets"].push_back(json{{"name", p.name}, {"cameras", cams}});
    }
    return j;
}

StationLayout load_layout(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open layout file '" + path.string() + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError("layout file '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return layout_from_json(j);
}

std::string layout_to_string(const StationLayout& layout) { return layout_to_json(layout).dump(2) + "\n"; }

void save_layout(const StationLayout& layout, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write layout file '" + path.string() + "'");
    out << layout_to_string(layout);
    if (!out) throw IoError("failed writing layout file '" + path.string() + "'");
}

std::uint64_t layout_hash(const StationLayout& layout) { return fnv1a64(layout_to_string(layout)); }

CameraPreset builtin_preset(std::string_view name, const StationLayout& layout) {
    // Extra presets a layout ships (the corridor's "single") resolve too.
    if (const CameraPreset* own = layout.find_preset(name); own != nullptr) return *own;
    if (builtin_preset_size(name) < 0) {
        throw ValidationError("preset", "unknown preset '" + std::string(name) +
                                            "' (expected Base, Model7, Model9 or Model11)");
    }
    const CameraPreset* preset = layout.find_preset(name);
    if (preset == nullptr) {
        throw ValidationError("preset", "layout '" + layout.name + "' does not define preset '" +
                                            std::string(name) + "'");
    }
    return *preset;
}

std::vector<std::string> shortest_route(const StationLayout& layout, std::string_view from,
                                        std::string_view to) {
    const int src = layout.node_index(from);
    const int dst = layout.node_index(to);
    if (src < 0) throw ValidationError(std::string(from), "unknown node '" + std::string(from) + "'");
    if (dst < 0) throw ValidationError(std::string(to), "unknown node '" + std::string(to) + "'");

    // Distances to the destination, then a greedy walk that picks the smallest
    // id among neighbours lying on some shortest path.
    const std::size_t n = layout.nav_nodes.size();
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dist(n, inf);
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
    dist[static_cast<std::size_t>(dst)] = 0.0;
    open.emplace(0.0, dst);
    while (!open.empty()) {
        const auto [d, u] = open.top();
        open.pop();
        if (d > dist[static_cast<std::size_t>(u)]) continue;
        for (const auto& [v, len] : layout.neighbours(u)) {
            const double nd = d + len;
            if (nd < dist[static_cast<std::size_t>(v)]) {
                dist[static_cast<std::size_t>(v)] = nd;
                open.emplace(nd, v);
            }
        }
    }
    if (dist[static_cast<std::size_t>(src)] == inf) {
        throw ValidationError(std::string(from), "no path from '" + std::string(from) + "' to '" +
                                                     std::string(to) + "'");
    }

    std::vector<std::string> path{layout.nav_nodes[static_cast<std::size_t>(src)].id};
    int u = src;
    while (u != dst) {
        const double du = dist[static_cast<std::size_t>(u)];
        const double eps = 1e-9 * (1.0 + du);
        int next = -1;
        for (const auto& [v, len] : layout.neighbours(u)) {
            if (std::abs(len + dist[static_cast<std::size_t>(v)] - du) <= eps &&
                dist[static_cast<std::size_t>(v)] < du) {
                next = v;
                break;
            }
        }
        u = next;
        path.push_back(layout.nav_nodes[static_cast<std::size_t>(u)].id);
    }
    return path;
}

double route_length(const StationLayout& layout, const std::vector<std::string>& route) {
    double total = 0.0;
    for (std::size_t i = 1; i < route.size(); ++i) {
        total += distance(layout.node_position(route[i - 1]), layout.node_position(route[i]));
    }
    return total;
}

}  // namespace twinwatch
