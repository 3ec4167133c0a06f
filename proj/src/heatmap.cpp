#include "twinwatch/heatmap.hpp"

#include <algorithm>
#include <cmath>

#include "twinwatch/errors.hpp"
#include "twinwatch/sim.hpp"

namespace twinwatch {

HeatmapGrid compute_heatmap(const Rect& area, const std::vector<Camera>& cameras, double cell_size,
                            const DetectionWeights& weights, const NormalizationBounds& bounds) {
    if (!(cell_size > 0.0) || !std::isfinite(cell_size)) {
        throw ValidationError("cell_size", "cell_size must be a positive number of metres");
    }
    weights.validate();
    bounds.validate();
    for (const auto& c : cameras) validate_camera(c);

    HeatmapGrid grid;
    grid.origin = area.min;
    grid.cell_size = cell_size;
    // Small slack so 60 / 0.5 does not become 121 through rounding noise.
    grid.width = static_cast<int>(std::ceil(area.width() / cell_size - 1e-9));
    grid.height = static_cast<int>(std::ceil(area.height() / cell_size - 1e-9));
    const double max_cells = 4e6;
    if (static_cast<double>(grid.width) * grid.height > max_cells) {
        throw ValidationError("cell_size", "grid would exceed four million cells");
    }
    grid.values.assign(static_cast<std::size_t>(grid.width) * grid.height, 0.0);

    std::vector<Point2D> headings;
    for (int k = 0; k < 8; ++k) headings.push_back(direction_from_azimuth(45.0 * k));

    for (int row = 0; row < grid.height; ++row) {
        for (int col = 0; col < grid.width; ++col) {
            const Point2D centre = grid.cell_center(col, row);
            double best = 0.0;
            for (const auto& cam : cameras) {
                const auto d = camera_sees(cam, centre);
                if (!d) continue;
                for (const auto& h : headings) {
                    best = std::max(best, detection_probability(angular_deviation_deg(cam, h), *d, 1, weights, bounds));
                }
            }
            grid.values[static_cast<std::size_t>(row) * grid.width + col] = best;
        }
    }
    return grid;
}

nlohmann::json to_json(const HeatmapGrid& grid) {
    return {{"origin", {{"x", grid.origin.x}, {"y", grid.origin.y}}},
            {"cell_size", grid.cell_size},
            {"width", grid.width},
            {"height", grid.height},
            {"values", grid.values}};
}

}  // namespace twinwatch
