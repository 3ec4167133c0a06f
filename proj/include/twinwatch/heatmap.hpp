#pragma once

#include <vector>

#include <nlohmann/json.hpp>

#include "twinwatch/detection.hpp"
#include "twinwatch/station.hpp"

namespace twinwatch {

/// Best detection probability a lone person could get at each cell centre.
struct HeatmapGrid {
    Point2D origin;
    double cell_size = 0.5;
    int width = 0;   // cells along x
    int height = 0;  // cells along y
    std::vector<double> values;  // row-major, row 0 at origin.y

    double at(int col, int row) const { return values[static_cast<std::size_t>(row) * width + col]; }
    Point2D cell_center(int col, int row) const {
        return {origin.x + (col + 0.5) * cell_size, origin.y + (row + 0.5) * cell_size};
    }
};

/// For every cell a probe person stands at the centre facing each of the eight
/// compass directions; each camera keeps its best heading, then the best camera
/// wins. Cells no camera sees stay 0.
HeatmapGrid compute_heatmap(const Rect& area, const std::vector<Camera>& cameras, double cell_size = 0.5,
                            const DetectionWeights& weights = {}, const NormalizationBounds& bounds = {});

nlohmann::json to_json(const HeatmapGrid& grid);

}  // namespace twinwatch
