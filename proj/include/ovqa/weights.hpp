#pragma once

#include <optional>
#include <vector>

#include "ovqa/frame.hpp"
#include "ovqa/geometry.hpp"
#include "ovqa/projection.hpp"
#include "ovqa/traces.hpp"

namespace ovqa {

// Standard deviation of the gaze Gaussian, in normalized viewport
// coordinate units.
struct GazeParams {
  double sigma = 0.1;
};

// Binary viewport mask of one subject: 1 for pixels whose sphere direction
// falls inside the viewport frustum, 0 elsewhere.
WeightMap i_hm_map(const Pose& pose, const Fov& fov, const DirectionGrid& grid);
WeightMap i_hm_map(const Pose& pose, const Fov& fov, const VideoMeta& meta);

// Population map: pixel-wise sum of the subject masks divided by the grand
// total, so the result sums to 1.
WeightMap o_hm_map(const std::vector<WeightMap>& maps);

// Gaze map: exp(-|e_p - e_i|^2 / (2 sigma^2)) over viewport pixels, where
// e_p is the pixel position in normalized viewport coordinates; 0 outside
// the viewport.
WeightMap i_em_map(const Pose& pose, const GazeSample& gaze, const GazeParams& params,
                   const Fov& fov, const DirectionGrid& grid);
WeightMap i_em_map(const Pose& pose, const GazeSample& gaze, const GazeParams& params,
                   const Fov& fov, const VideoMeta& meta);

// Pixel-wise mean of equally sized maps (EM aggregation).
WeightMap mean_map(const std::vector<WeightMap>& maps);

// Pearson correlation between two maps; empty when either side has zero
// variance.
std::optional<double> map_pearson(const WeightMap& a, const WeightMap& b);

// Per-frame Pearson correlation between two groups' aggregated maps.
// Element i correlates group_a[i] with group_b[i]; zero-variance frames
// come back empty and are excluded from mean_defined().
std::vector<std::optional<double>> split_half_consistency(
    const std::vector<WeightMap>& group_a, const std::vector<WeightMap>& group_b);

double mean_defined(const std::vector<std::optional<double>>& values);

// Solid-angle weighted fraction of the sphere covered by the union of the
// given viewport masks. The masks are ERP rasters; rows are weighted by the
// cosine of their latitude.
double viewport_coverage(const std::vector<WeightMap>& maps);

}  // namespace ovqa
