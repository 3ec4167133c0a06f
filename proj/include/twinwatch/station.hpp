#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "twinwatch/geometry.hpp"

namespace twinwatch {

enum class ZoneKind { Entrance, Concourse, GateLine, TicketMachines, Platform, Exit };

std::string_view to_string(ZoneKind kind);
ZoneKind zone_kind_from_string(std::string_view name);

struct Zone {
    std::string id;
    ZoneKind kind = ZoneKind::Concourse;
    Rect area;
    std::vector<std::string> nodes;
};

struct NavNode {
    std::string id;
    Point2D position;
};

struct NavEdge {
    std::string from;
    std::string to;
    double length = 0.0;
};

struct ServicePointGroup {
    int count = 0;
    std::vector<std::string> nodes;
};

struct ServicePoints {
    ServicePointGroup gates;
    ServicePointGroup ticket_machines;
};

/// Wall segment on which cameras may be placed.
struct MountSegment {
    std::string id;
    Point2D a;
    Point2D b;

    Point2D at(double t) const { return a + (b - a) * t; }
};

struct Camera {
    std::string id;
    Point2D position;
    double mount_height = 2.5;
    double pan_azimuth = 0.0;  // degrees, counter-clockwise from +x
    double fov_deg = 50.0;
    double min_range_m = 1.0;
    double max_range_m = 19.0;

    Point2D axis() const { return direction_from_azimuth(pan_azimuth); }

    friend bool operator==(const Camera&, const Camera&) = default;
};

/// Throws ValidationError if the camera's own invariants are broken.
void validate_camera(const Camera& camera);

inline const std::vector<std::string>& builtin_preset_names() {
    static const std::vector<std::string> names{"Base", "Model7", "Model9", "Model11"};
    return names;
}

/// Number of cameras each built-in preset must carry.
int builtin_preset_size(std::string_view name);

/// Table-style label ("Base Model", "Model 7", ...).
std::string preset_display_name(std::string_view name);

struct CameraPreset {
    std::string name;
    std::vector<Camera> cameras;

    std::vector<std::string> camera_ids() const;
};

class StationLayout {
public:
    static constexpr int kFormatVersion = 1;

    std::string name;
    Rect bounds;
    std::vector<Zone> zones;
    std::vector<NavNode> nav_nodes;
    std::vector<NavEdge> nav_edges;
    ServicePoints service_points;
    std::vector<MountSegment> camera_mounts;
    std::vector<CameraPreset> presets;

    /// Checks every invariant and builds lookup indices. Throws ValidationError
    /// naming the offending element.
    void validate_and_index();

    bool has_node(std::string_view id) const;
    int node_index(std::string_view id) const;  // -1 when absent
    const NavNode& node(std::string_view id) const;
    Point2D node_position(std::string_view id) const { return node(id).position; }

    /// Neighbours of a node as (node index, edge length), sorted by neighbour id.
    const std::vector<std::pair<int, double>>& neighbours(int index) const {
        return adjacency_[static_cast<std::size_t>(index)];
    }

    std::vector<std::string> zone_nodes(ZoneKind kind) const;
    int zone_count(ZoneKind kind) const;

    const MountSegment* mount(std::string_view id) const;
    /// Mount segment the point lies on (within 1e-6 m), if any.
    const MountSegment* mount_for(Point2D p) const;

    const CameraPreset* find_preset(std::string_view name) const;

private:
    std::map<std::string, int, std::less<>> node_lookup_;
    std::vector<std::vector<std::pair<int, double>>> adjacency_;
};

StationLayout layout_from_json(const nlohmann::json& j);
nlohmann::json layout_to_json(const StationLayout& layout);

/// Reads and validates a layout file. Throws IoError, ParseError or ValidationError.
StationLayout load_layout(const std::filesystem::path& path);
void save_layout(const StationLayout& layout, const std::filesystem::path& path);

/// Canonical text form; `save_layout` writes exactly this.
std::string layout_to_string(const StationLayout& layout);

/// Stable FNV-1a hash of the canonical layout text.
std::uint64_t layout_hash(const StationLayout& layout);

/// Preset by name from the layout; throws ValidationError("preset") for names
/// the layout does not define.
CameraPreset builtin_preset(std::string_view name, const StationLayout& layout);

/// Minimum-length path. Among equal-length paths the lexicographically smallest
/// node-id sequence wins. Throws ValidationError when no path exists.
std::vector<std::string> shortest_route(const StationLayout& layout, std::string_view from,
                                        std::string_view to);

double route_length(const StationLayout& layout, const std::vector<std::string>& route);

nlohmann::json camera_to_json(const Camera& camera);
Camera camera_from_json(const nlohmann::json& j);

}  // namespace twinwatch
