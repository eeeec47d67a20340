#include "ovqa/weights.hpp"

#include <cmath>
#include <stdexcept>

namespace ovqa {

namespace {

void check_same_shape(const std::vector<WeightMap>& maps) {
  if (maps.empty()) throw std::invalid_argument("need at least one weight map");
  for (const auto& m : maps) {
    if (m.width != maps.front().width || m.height != maps.front().height) {
      throw std::invalid_argument("weight maps differ in size");
    }
  }
}

}  // namespace

WeightMap i_hm_map(const Pose& pose, const Fov& fov, const DirectionGrid& grid) {
  const Frustum frustum(pose, fov);
  WeightMap map(grid.width, grid.height);
  for (std::size_t i = 0; i < grid.directions.size(); ++i) {
    if (grid.valid[i] && frustum.contains(grid.directions[i])) {
      map.values[i] = 1.0f;
    }
  }
  return map;
}

WeightMap i_hm_map(const Pose& pose, const Fov& fov, const VideoMeta& meta) {
  return i_hm_map(pose, fov, DirectionGrid::make(meta.width, meta.height, meta.projection));
}

WeightMap o_hm_map(const std::vector<WeightMap>& maps) {
  check_same_shape(maps);
  const std::size_t n = maps.front().values.size();
  std::vector<double> sum(n, 0.0);
  for (const auto& m : maps) {
    for (std::size_t i = 0; i < n; ++i) sum[i] += m.values[i];
  }
  double total = 0.0;
  for (double v : sum) total += v;
  if (!(total > 0.0)) throw std::invalid_argument("o_hm_map: total mass is zero");

  WeightMap out(maps.front().width, maps.front().height);
  for (std::size_t i = 0; i < n; ++i) {
    out.values[i] = static_cast<float>(sum[i] / total);
  }
  return out;
}

WeightMap i_em_map(const Pose& pose, const GazeSample& gaze, const GazeParams& params,
                   const Fov& fov, const DirectionGrid& grid) {
  if (!(params.sigma > 0.0 && std::isfinite(params.sigma))) {
    throw std::invalid_argument("gaze sigma must be positive and finite");
  }
  const Frustum frustum(pose, fov);
  const double inv_two_sigma_sq = 1.0 / (2.0 * params.sigma * params.sigma);
  WeightMap map(grid.width, grid.height);
  for (std::size_t i = 0; i < grid.directions.size(); ++i) {
    if (!grid.valid[i]) continue;
    const Vec3& d = grid.directions[i];
    if (!frustum.contains(d)) continue;
    const auto uv = frustum.to_viewport(d);
    const double du = (*uv)[0] - gaze.u;
    const double dv = (*uv)[1] - gaze.v;
    map.values[i] = static_cast<float>(std::exp(-(du * du + dv * dv) * inv_two_sigma_sq));
  }
  return map;
}

WeightMap i_em_map(const Pose& pose, const GazeSample& gaze, const GazeParams& params,
                   const Fov& fov, const VideoMeta& meta) {
  return i_em_map(pose, gaze, params, fov,
                  DirectionGrid::make(meta.width, meta.height, meta.projection));
}

WeightMap mean_map(const std::vector<WeightMap>& maps) {
  check_same_shape(maps);
  const std::size_t n = maps.front().values.size();
  WeightMap out(maps.front().width, maps.front().height);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (const auto& m : maps) s += m.values[i];
    out.values[i] = static_cast<float>(s / maps.size());
  }
  return out;
}

std::optional<double> map_pearson(const WeightMap& a, const WeightMap& b) {
  if (a.width != b.width || a.height != b.height) {
    throw std::invalid_argument("map_pearson: size mismatch");
  }
  const std::size_t n = a.values.size();
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a.values[i];
    mb += b.values[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a.values[i] - ma;
    const double db = b.values[i] - mb;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  if (!(va > 0.0) || !(vb > 0.0)) return std::nullopt;
  return cov / std::sqrt(va * vb);
}

std::vector<std::optional<double>> split_half_consistency(
    const std::vector<WeightMap>& group_a, const std::vector<WeightMap>& group_b) {
  if (group_a.size() != group_b.size()) {
    throw std::invalid_argument("split_half_consistency: frame count mismatch");
  }
  std::vector<std::optional<double>> out;
  out.reserve(group_a.size());
  for (std::size_t i = 0; i < group_a.size(); ++i) {
    out.push_back(map_pearson(group_a[i], group_b[i]));
  }
  return out;
}

double mean_defined(const std::vector<std::optional<double>>& values) {
  double sum = 0.0;
  int count = 0;
  for (const auto& v : values) {
    if (v) {
      sum += *v;
      ++count;
    }
  }
  if (count == 0) throw std::runtime_error("no defined correlations to average");
  return sum / count;
}

double viewport_coverage(const std::vector<WeightMap>& maps) {
  check_same_shape(maps);
  const int w = maps.front().width;
  const int h = maps.front().height;
  double covered = 0.0;
  double total = 0.0;
  for (int y = 0; y < h; ++y) {
    const double lat = deg_to_rad((0.5 - (y + 0.5) / h) * 180.0);
    const double weight = std::cos(lat);
    for (int x = 0; x < w; ++x) {
      total += weight;
      for (const auto& m : maps) {
        if (m.at(x, y) > 0.0f) {
          covered += weight;
          break;
        }
      }
    }
  }
  return covered / total;
}

}  // namespace ovqa
