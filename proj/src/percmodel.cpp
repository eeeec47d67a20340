#include "ovqa/percmodel.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "ovqa/errors.hpp"

namespace ovqa {

namespace {

void check_equal_dims(int aw, int ah, int bw, int bh, const char* what) {
  if (aw != bw || ah != bh) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch");
  }
}

// Mirror index into [0, n): -1 -> 0, n -> n-1.
inline int reflect(int i, int n) {
  if (i < 0) return -i - 1;
  if (i >= n) return 2 * n - i - 1;
  return i;
}

constexpr int kSobelX[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
constexpr int kSobelY[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};

// Difference form of the Sobel taps: paired subtraction cancels exactly on
// constant maps, so flat regions contribute a true zero to the smoothness
// term.
SensitivityMap sobel_apply(const SensitivityMap& m, bool horizontal) {
  static constexpr double kSmooth[3] = {1.0, 2.0, 1.0};
  SensitivityMap out(m.width, m.height);
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      double acc = 0.0;
      for (int t = -1; t <= 1; ++t) {
        if (horizontal) {
          const int yy = reflect(y + t, m.height);
          acc += kSmooth[t + 1] * (m.at(reflect(x + 1, m.width), yy) -
                                   m.at(reflect(x - 1, m.width), yy));
        } else {
          const int xx = reflect(x + t, m.width);
          acc += kSmooth[t + 1] * (m.at(xx, reflect(y + 1, m.height)) -
                                   m.at(xx, reflect(y - 1, m.height)));
        }
      }
      out.at(x, y) = acc;
    }
  }
  return out;
}

// Adjoint of sobel_apply under the same reflective border.
SensitivityMap sobel_adjoint(const SensitivityMap& field, const int kernel[3][3]) {
  SensitivityMap out(field.width, field.height);
  for (int y = 0; y < field.height; ++y) {
    for (int x = 0; x < field.width; ++x) {
      const double f = field.at(x, y);
      if (f == 0.0) continue;
      for (int dy = -1; dy <= 1; ++dy) {
        const int yy = reflect(y + dy, field.height);
        for (int dx = -1; dx <= 1; ++dx) {
          const int xx = reflect(x + dx, field.width);
          out.at(xx, yy) += kernel[dy + 1][dx + 1] * f;
        }
      }
    }
  }
  return out;
}

// Bilinear grid-to-raster upsampling tap for one output coordinate.
struct UpsampleTap {
  int i0, i1;
  double w1;  // weight of i1; i0 gets (1 - w1)
};

std::vector<UpsampleTap> upsample_taps(int out_size, int grid_size) {
  std::vector<UpsampleTap> taps(out_size);
  for (int p = 0; p < out_size; ++p) {
    double g = (p + 0.5) * grid_size / out_size - 0.5;
    g = std::clamp(g, 0.0, grid_size - 1.0);
    const int i0 = static_cast<int>(g);
    taps[p] = {i0, std::min(i0 + 1, grid_size - 1), g - i0};
  }
  return taps;
}

}  // namespace

ErrorMap make_error_map(const FramePlane& ref, const FramePlane& imp) {
  check_equal_dims(ref.width, ref.height, imp.width, imp.height, "error map");
  ErrorMap out(ref.width, ref.height);
  for (std::size_t i = 0; i < ref.samples.size(); ++i) {
    out.values[i] = static_cast<float>(
        std::abs(static_cast<int>(ref.samples[i]) - imp.samples[i]) / 255.0);
  }
  return out;
}

std::vector<PreprocessedFrame> preprocess(FrameSource& ref, FrameSource& imp,
                                          const PreprocessConfig& config) {
  if (config.target_width < 1 || config.frame_interval < 1) {
    throw std::invalid_argument("preprocess: bad config");
  }
  if (ref.frame_count() != imp.frame_count()) {
    throw std::invalid_argument("preprocess: sequences differ in frame count");
  }
  std::vector<PreprocessedFrame> out;
  for (int idx = 0; idx < ref.frame_count(); idx += config.frame_interval) {
    FramePlane r = ref.frame(idx);
    FramePlane i = imp.frame(idx);
    check_equal_dims(r.width, r.height, i.width, i.height, "preprocess");
    if (r.width != config.target_width) {
      const int h = std::max(
          1, static_cast<int>(std::lround(static_cast<double>(r.height) *
                                          config.target_width / r.width)));
      r = resize_bilinear(r, config.target_width, h);
      i = resize_bilinear(i, config.target_width, h);
    }
    PreprocessedFrame f;
    f.error = make_error_map(r, i);
    f.ref = std::move(r);
    f.imp = std::move(i);
    f.source_index = idx;
    out.push_back(std::move(f));
  }
  return out;
}

std::vector<Patch> sample_patches(const FramePlane& frame, const ErrorMap& error,
                                  const WeightMap& hm, int n, std::uint64_t seed,
                                  int frame_index, bool* uniform_fallback) {
  check_equal_dims(frame.width, frame.height, error.width, error.height,
                   "sample_patches error map");
  check_equal_dims(frame.width, frame.height, hm.width, hm.height,
                   "sample_patches hm map");
  if (frame.width < kPatchSize || frame.height < kPatchSize) {
    throw std::invalid_argument("frame smaller than the patch size");
  }
  if (n < 1) throw std::invalid_argument("patch count must be positive");

  struct Candidate {
    int x0, y0;
    double weight;
  };
  std::vector<Candidate> candidates;
  for (int y0 = 0; y0 + kPatchSize <= frame.height; y0 += kPatchStride) {
    for (int x0 = 0; x0 + kPatchSize <= frame.width; x0 += kPatchStride) {
      double mass = 0.0;
      for (int y = y0; y < y0 + kPatchSize; ++y) {
        for (int x = x0; x < x0 + kPatchSize; ++x) mass += hm.at(x, y);
      }
      candidates.push_back({x0, y0, mass});
    }
  }
  if (n > static_cast<int>(candidates.size())) {
    throw std::invalid_argument("requested more patches than grid candidates");
  }

  double total = 0.0;
  for (const auto& c : candidates) total += c.weight;
  bool fallback = !(total > 0.0);
  if (fallback) {
    std::cerr << "sample_patches: HM map is all zero, sampling uniformly\n";
    for (auto& c : candidates) c.weight = 1.0;
  }
  if (uniform_fallback) *uniform_fallback = fallback;

  std::mt19937_64 rng(seed);
  std::vector<bool> taken(candidates.size(), false);
  std::vector<Patch> patches;
  patches.reserve(n);
  for (int draw = 0; draw < n; ++draw) {
    double remaining = 0.0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (!taken[i]) remaining += candidates[i].weight;
    }
    std::size_t pick = candidates.size();
    if (remaining > 0.0) {
      const double r = std::uniform_real_distribution<double>(0.0, remaining)(rng);
      double acc = 0.0;
      std::size_t last_open = candidates.size();
      for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (taken[i]) continue;
        last_open = i;
        acc += candidates[i].weight;
        if (r < acc) {
          pick = i;
          break;
        }
      }
      if (pick == candidates.size()) pick = last_open;  // r landed on the top edge
    } else {
      // Remaining mass exhausted; draw uniformly among the leftovers.
      std::vector<std::size_t> left;
      for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (!taken[i]) left.push_back(i);
      }
      pick = left[std::uniform_int_distribution<std::size_t>(0, left.size() - 1)(rng)];
    }
    taken[pick] = true;

    Patch patch;
    patch.frame_index = frame_index;
    patch.x0 = candidates[pick].x0;
    patch.y0 = candidates[pick].y0;
    patch.hm_weight = candidates[pick].weight;
    patch.pixels = FramePlane(kPatchSize, kPatchSize);
    for (int y = 0; y < kPatchSize; ++y) {
      for (int x = 0; x < kPatchSize; ++x) {
        patch.pixels.at(x, y) = frame.at(patch.x0 + x, patch.y0 + y);
      }
    }
    patches.push_back(std::move(patch));
  }
  return patches;
}

std::vector<double> em_weight_vector(std::vector<Patch>& patches, const WeightMap& em,
                                     bool* uniform_fallback) {
  if (patches.empty()) throw std::invalid_argument("em_weight_vector: no patches");
  std::vector<double> sums(patches.size(), 0.0);
  for (std::size_t k = 0; k < patches.size(); ++k) {
    const Patch& p = patches[k];
    if (p.x0 + kPatchSize > em.width || p.y0 + kPatchSize > em.height) {
      throw std::invalid_argument("em_weight_vector: patch outside the EM map");
    }
    double mass = 0.0;
    for (int y = p.y0; y < p.y0 + kPatchSize; ++y) {
      for (int x = p.x0; x < p.x0 + kPatchSize; ++x) mass += em.at(x, y);
    }
    sums[k] = mass;
    patches[k].em_weight = mass;
  }
  double total = 0.0;
  for (double s : sums) total += s;
  const bool fallback = !(total > 0.0);
  if (uniform_fallback) *uniform_fallback = fallback;
  if (fallback) {
    std::cerr << "em_weight_vector: zero EM mass over patches, using uniform weights\n";
    std::fill(sums.begin(), sums.end(), 1.0 / patches.size());
    return sums;
  }
  for (double& s : sums) s /= total;
  return sums;
}

ScorerInput patch_input(const Patch& patch, const ErrorMap& frame_error) {
  if (patch.x0 + patch.pixels.width > frame_error.width ||
      patch.y0 + patch.pixels.height > frame_error.height) {
    throw std::invalid_argument("patch_input: patch outside the error map");
  }
  ScorerInput input;
  input.pixels = patch.pixels;
  input.error = ErrorMap(patch.pixels.width, patch.pixels.height);
  for (int y = 0; y < input.error.height; ++y) {
    for (int x = 0; x < input.error.width; ++x) {
      input.error.at(x, y) = frame_error.at(patch.x0 + x, patch.y0 + y);
    }
  }
  return input;
}

// ---------------------------------------------------------------------------
// AffineStatScorer
// ---------------------------------------------------------------------------

AffineStatScorer::AffineStatScorer(int grid_width, int grid_height)
    : grid_width_(grid_width), grid_height_(grid_height) {
  if (grid_width < 1 || grid_height < 1) {
    throw std::invalid_argument("scorer grid must be at least 1x1");
  }
}

int AffineStatScorer::param_count() const { return 4 + grid_width_ * grid_height_; }

void AffineStatScorer::init_params(std::span<double> params, std::uint64_t seed) const {
  if (static_cast<int>(params.size()) != param_count()) {
    throw std::invalid_argument("init_params: wrong parameter count");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> small(0.0, 0.05);
  for (int i = 0; i < 4; ++i) params[i] = small(rng);
  std::normal_distribution<double> grid(0.0, 0.2);
  for (std::size_t i = 4; i < params.size(); ++i) params[i] = grid(rng);
}

ScorerOutput AffineStatScorer::evaluate(const ScorerInput& input,
                                        std::span<const double> params) const {
  const ErrorMap& e = input.error;
  if (e.width < 1 || e.height < 1) throw std::invalid_argument("empty error raster");
  const std::size_t hw = e.values.size();

  double mean = 0.0;
  double maxv = 0.0;
  for (float v : e.values) {
    mean += v;
    maxv = std::max(maxv, static_cast<double>(v));
  }
  mean /= static_cast<double>(hw);

  const auto tx = upsample_taps(e.width, grid_width_);
  const auto ty = upsample_taps(e.height, grid_height_);
  const std::span<const double> grid = params.subspan(4);

  ScorerOutput out;
  out.map = SensitivityMap(e.width, e.height);
  double weighted = 0.0;
  for (int y = 0; y < e.height; ++y) {
    const auto& t1 = ty[y];
    for (int x = 0; x < e.width; ++x) {
      const auto& t0 = tx[x];
      const double top = (1.0 - t0.w1) * grid[t1.i0 * grid_width_ + t0.i0] +
                         t0.w1 * grid[t1.i0 * grid_width_ + t0.i1];
      const double bot = (1.0 - t0.w1) * grid[t1.i1 * grid_width_ + t0.i0] +
                         t0.w1 * grid[t1.i1 * grid_width_ + t0.i1];
      const double m = (1.0 - t1.w1) * top + t1.w1 * bot;
      out.map.at(x, y) = m;
      weighted += m * e.at(x, y);
    }
  }
  weighted /= static_cast<double>(hw);

  out.score = params[0] * mean + params[1] * maxv + params[2] * weighted + params[3];
  return out;
}

void AffineStatScorer::accumulate_gradient(const ScorerInput& input,
                                           std::span<const double> params,
                                           double d_score, const SensitivityMap& d_map,
                                           std::span<double> grad) const {
  const ErrorMap& e = input.error;
  const std::size_t hw = e.values.size();
  check_equal_dims(e.width, e.height, d_map.width, d_map.height, "scorer gradient");

  double mean = 0.0;
  double maxv = 0.0;
  for (float v : e.values) {
    mean += v;
    maxv = std::max(maxv, static_cast<double>(v));
  }
  mean /= static_cast<double>(hw);

  const auto tx = upsample_taps(e.width, grid_width_);
  const auto ty = upsample_taps(e.height, grid_height_);
  const std::span<const double> grid = params.subspan(4);

  double weighted = 0.0;
  for (int y = 0; y < e.height; ++y) {
    const auto& t1 = ty[y];
    for (int x = 0; x < e.width; ++x) {
      const auto& t0 = tx[x];
      const double top = (1.0 - t0.w1) * grid[t1.i0 * grid_width_ + t0.i0] +
                         t0.w1 * grid[t1.i0 * grid_width_ + t0.i1];
      const double bot = (1.0 - t0.w1) * grid[t1.i1 * grid_width_ + t0.i0] +
                         t0.w1 * grid[t1.i1 * grid_width_ + t0.i1];
      weighted += ((1.0 - t1.w1) * top + t1.w1 * bot) * e.at(x, y);
    }
  }
  weighted /= static_cast<double>(hw);

  grad[0] += d_score * mean;
  grad[1] += d_score * maxv;
  grad[2] += d_score * weighted;
  grad[3] += d_score;

  // The sensitivity map and the weighted-error statistic share the same
  // upsampled field; both chains scatter through the bilinear taps.
  const double w_weighted = params[2];
  std::span<double> grid_grad = grad.subspan(4);
  for (int y = 0; y < e.height; ++y) {
    const auto& t1 = ty[y];
    for (int x = 0; x < e.width; ++x) {
      const auto& t0 = tx[x];
      const double f =
          d_score * w_weighted * e.at(x, y) / static_cast<double>(hw) + d_map.at(x, y);
      if (f == 0.0) continue;
      grid_grad[t1.i0 * grid_width_ + t0.i0] += (1.0 - t1.w1) * (1.0 - t0.w1) * f;
      grid_grad[t1.i0 * grid_width_ + t0.i1] += (1.0 - t1.w1) * t0.w1 * f;
      grid_grad[t1.i1 * grid_width_ + t0.i0] += t1.w1 * (1.0 - t0.w1) * f;
      grid_grad[t1.i1 * grid_width_ + t0.i1] += t1.w1 * t0.w1 * f;
    }
  }
}

std::string AffineStatScorer::manifest() const {
  std::ostringstream out;
  out << "scorer.affine_stats 4\n";
  out << "scorer.grid " << grid_height_ << " " << grid_width_ << "\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Aggregation head
// ---------------------------------------------------------------------------

double head_forward(double s0, std::span<const double> params) {
  double out = params[3 * kHeadWidth];
  for (int j = 0; j < kHeadWidth; ++j) {
    const double a = params[j] * s0 + params[kHeadWidth + j];
    if (a > 0.0) out += params[2 * kHeadWidth + j] * a;
  }
  return out;
}

double head_backward(double s0, std::span<const double> params, double d_out,
                     double& d_s0, std::span<double> d_params) {
  double out = params[3 * kHeadWidth];
  d_s0 = 0.0;
  d_params[3 * kHeadWidth] += d_out;
  for (int j = 0; j < kHeadWidth; ++j) {
    const double a = params[j] * s0 + params[kHeadWidth + j];
    const double h = a > 0.0 ? a : 0.0;
    out += params[2 * kHeadWidth + j] * h;
    d_params[2 * kHeadWidth + j] += d_out * h;
    if (a > 0.0) {
      const double d_a = d_out * params[2 * kHeadWidth + j];
      d_params[j] += d_a * s0;
      d_params[kHeadWidth + j] += d_a;
      d_s0 += d_a * params[j];
    }
  }
  return out;
}

void head_identity_init(std::span<double> params) {
  std::fill(params.begin(), params.end(), 0.0);
  params[0] = 1.0;                // first unit passes the value
  params[2 * kHeadWidth] = 1.0;   // output sums it back
}

double aggregate(std::span<const double> local_scores, std::span<const double> weights,
                 std::span<const double> head_params) {
  if (local_scores.size() != weights.size()) {
    throw std::invalid_argument("aggregate: score/weight length mismatch");
  }
  double s0 = 0.0;
  for (std::size_t i = 0; i < local_scores.size(); ++i) {
    s0 += local_scores[i] * weights[i];
  }
  return head_forward(s0, head_params);
}

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

SensitivityMap sobel_horizontal(const SensitivityMap& m) { return sobel_apply(m, true); }
SensitivityMap sobel_vertical(const SensitivityMap& m) { return sobel_apply(m, false); }

double tv_penalty(const SensitivityMap& m, double exponent) {
  const SensitivityMap gx = sobel_apply(m, true);
  const SensitivityMap gy = sobel_apply(m, false);
  double total = 0.0;
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    const double s = gx.values[i] * gx.values[i] + gy.values[i] * gy.values[i];
    if (s > 0.0) total += std::pow(s, exponent);
  }
  return total;
}

SensitivityMap tv_penalty_gradient(const SensitivityMap& m, double exponent) {
  const SensitivityMap gx = sobel_apply(m, true);
  const SensitivityMap gy = sobel_apply(m, false);
  SensitivityMap fx(m.width, m.height);
  SensitivityMap fy(m.width, m.height);
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    const double s = gx.values[i] * gx.values[i] + gy.values[i] * gy.values[i];
    if (s > 0.0) {
      const double outer = exponent * std::pow(s, exponent - 1.0);
      fx.values[i] = outer * 2.0 * gx.values[i];
      fy.values[i] = outer * 2.0 * gy.values[i];
    }
  }
  SensitivityMap grad = sobel_adjoint(fx, kSobelX);
  const SensitivityMap grad_y = sobel_adjoint(fy, kSobelY);
  for (std::size_t i = 0; i < grad.values.size(); ++i) {
    grad.values[i] += grad_y.values[i];
  }
  return grad;
}

LossBreakdown loss(std::span<const double> predicted, std::span<const double> target,
                   const std::vector<SensitivityMap>& maps,
                   std::span<const double> beta, const LossParams& params) {
  if (predicted.empty() || predicted.size() != target.size()) {
    throw std::invalid_argument("loss: bad prediction batch");
  }
  if (maps.empty()) throw std::invalid_argument("loss: no sensitivity maps");
  for (const auto& m : maps) {
    check_equal_dims(m.width, m.height, maps.front().width, maps.front().height,
                     "loss maps");
  }

  LossBreakdown b;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double d = predicted[i] - target[i];
    b.mse += d * d;
  }
  const double nhw = static_cast<double>(maps.size()) * maps.front().width *
                     maps.front().height;
  for (const auto& m : maps) b.tv += tv_penalty(m, params.tv_exponent);
  b.tv /= nhw;
  for (double v : beta) b.l2 += v * v;
  b.total = params.lambda1 * b.mse + params.lambda2 * b.tv + params.lambda3 * b.l2;
  return b;
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

int Model::param_count() const { return scorer_.param_count() + kHeadParamCount; }

std::span<const double> Model::scorer_params(std::span<const double> beta) const {
  return beta.first(scorer_.param_count());
}

std::span<const double> Model::head_params(std::span<const double> beta) const {
  return beta.subspan(scorer_.param_count());
}

double Model::predict(const TrainItem& item, std::span<const double> beta) const {
  if (item.patches.empty() || item.patches.size() != item.weights.size()) {
    throw std::invalid_argument("predict: bad item");
  }
  const auto sp = scorer_params(beta);
  double s0 = 0.0;
  for (std::size_t k = 0; k < item.patches.size(); ++k) {
    s0 += scorer_.evaluate(item.patches[k], sp).score * item.weights[k];
  }
  return head_forward(s0, head_params(beta));
}

LossBreakdown Model::batch_loss(const std::vector<TrainItem>& items,
                                std::span<const double> beta,
                                const LossParams& params) const {
  if (items.empty()) throw std::invalid_argument("empty training batch");
  const auto sp = scorer_params(beta);
  std::vector<double> predictions(items.size());
  std::vector<double> targets(items.size());
  std::vector<SensitivityMap> maps;
  for (std::size_t b = 0; b < items.size(); ++b) {
    const TrainItem& item = items[b];
    double s0 = 0.0;
    for (std::size_t k = 0; k < item.patches.size(); ++k) {
      auto out = scorer_.evaluate(item.patches[k], sp);
      s0 += out.score * item.weights[k];
      maps.push_back(std::move(out.map));
    }
    predictions[b] = head_forward(s0, head_params(beta));
    targets[b] = item.target;
  }
  return loss(predictions, targets, maps, beta, params);
}

LossBreakdown Model::loss_and_gradient(const std::vector<TrainItem>& items,
                                       std::span<const double> beta,
                                       const LossParams& params,
                                       std::span<double> grad) const {
  if (items.empty()) throw std::invalid_argument("empty training batch");
  if (static_cast<int>(grad.size()) != param_count()) {
    throw std::invalid_argument("gradient buffer has the wrong size");
  }
  std::fill(grad.begin(), grad.end(), 0.0);

  const auto sp = scorer_params(beta);
  const auto hp = head_params(beta);
  std::span<double> scorer_grad = grad.first(scorer_.param_count());
  std::span<double> head_grad = grad.subspan(scorer_.param_count());

  // Forward pass, keeping every sensitivity map and inner product.
  std::vector<double> predictions(items.size());
  std::vector<double> targets(items.size());
  std::vector<double> inner(items.size());
  std::vector<std::vector<SensitivityMap>> item_maps(items.size());
  std::vector<SensitivityMap> all_maps;
  for (std::size_t b = 0; b < items.size(); ++b) {
    const TrainItem& item = items[b];
    if (item.patches.empty() || item.patches.size() != item.weights.size()) {
      throw std::invalid_argument("loss_and_gradient: bad item");
    }
    double s0 = 0.0;
    for (std::size_t k = 0; k < item.patches.size(); ++k) {
      auto out = scorer_.evaluate(item.patches[k], sp);
      s0 += out.score * item.weights[k];
      item_maps[b].push_back(out.map);
      all_maps.push_back(std::move(out.map));
    }
    inner[b] = s0;
    predictions[b] = head_forward(s0, hp);
    targets[b] = item.target;
  }

  const LossBreakdown breakdown = loss(predictions, targets, all_maps, beta, params);

  // L2 term.
  for (std::size_t i = 0; i < beta.size(); ++i) {
    grad[i] += 2.0 * params.lambda3 * beta[i];
  }

  const double nhw = static_cast<double>(all_maps.size()) * all_maps.front().width *
                     all_maps.front().height;
  const double tv_scale = params.lambda2 / nhw;

  for (std::size_t b = 0; b < items.size(); ++b) {
    const TrainItem& item = items[b];
    const double d_pred = 2.0 * params.lambda1 * (predictions[b] - targets[b]);
    double d_s0 = 0.0;
    head_backward(inner[b], hp, d_pred, d_s0, head_grad);
    for (std::size_t k = 0; k < item.patches.size(); ++k) {
      SensitivityMap d_map = tv_penalty_gradient(item_maps[b][k], params.tv_exponent);
      for (double& v : d_map.values) v *= tv_scale;
      scorer_.accumulate_gradient(item.patches[k], sp, d_s0 * item.weights[k], d_map,
                                  scorer_grad);
    }
  }
  return breakdown;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

TrainResult train(const std::vector<TrainItem>& items, const LocalScorer& scorer,
                  const TrainConfig& config) {
  if (items.empty()) throw std::invalid_argument("train: empty dataset");
  Model model(scorer);
  const int np = model.param_count();

  TrainResult result;
  result.loss_params = config.loss;
  result.beta.assign(np, 0.0);
  scorer.init_params(std::span<double>(result.beta).first(scorer.param_count()),
                     config.seed);
  {
    std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ull);
    std::normal_distribution<double> small(0.0, 0.1);
    for (int i = scorer.param_count(); i < np; ++i) result.beta[i] = small(rng);
  }

  std::vector<double> grad(np, 0.0);
  std::vector<double> m(np, 0.0);
  std::vector<double> v(np, 0.0);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const LossBreakdown lb =
        model.loss_and_gradient(items, result.beta, config.loss, grad);
    if (!std::isfinite(lb.total)) {
      char buf[160];
      std::snprintf(buf, sizeof(buf),
                    "non-finite loss at epoch %d (mse=%g tv=%g l2=%g)", epoch, lb.mse,
                    lb.tv, lb.l2);
      throw numeric_error(buf);
    }
    result.loss_history.push_back(lb.total);

    const double t = epoch + 1.0;
    const double bc1 = 1.0 - std::pow(config.adam_beta1, t);
    const double bc2 = 1.0 - std::pow(config.adam_beta2, t);
    for (int i = 0; i < np; ++i) {
      m[i] = config.adam_beta1 * m[i] + (1.0 - config.adam_beta1) * grad[i];
      v[i] = config.adam_beta2 * v[i] + (1.0 - config.adam_beta2) * grad[i] * grad[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      result.beta[i] -= config.learning_rate * mhat / (std::sqrt(vhat) + config.adam_epsilon);
    }
  }
  result.loss_history.push_back(model.batch_loss(items, result.beta, config.loss).total);
  return result;
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  TrainConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      bool blank = true;
      for (char c : line) blank &= std::isspace(static_cast<unsigned char>(c)) != 0;
      if (blank) continue;
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected key=value");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "learning_rate") cfg.learning_rate = std::stod(value);
      else if (key == "epochs") cfg.epochs = std::stoi(value);
      else if (key == "adam_beta1") cfg.adam_beta1 = std::stod(value);
      else if (key == "adam_beta2") cfg.adam_beta2 = std::stod(value);
      else if (key == "adam_epsilon") cfg.adam_epsilon = std::stod(value);
      else if (key == "seed") cfg.seed = std::stoull(value);
      else if (key == "lambda1") cfg.loss.lambda1 = std::stod(value);
      else if (key == "lambda2") cfg.loss.lambda2 = std::stod(value);
      else if (key == "lambda3") cfg.loss.lambda3 = std::stod(value);
      else if (key == "tv_exponent") cfg.loss.tv_exponent = std::stod(value);
      else throw std::runtime_error("unknown key: " + key);
    } catch (const std::invalid_argument&) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": bad value for " + key);
    }
  }
  return cfg;
}

void save_model_params(std::span<const double> beta, const std::string& manifest,
                       const std::string& bin_path, const std::string& manifest_path) {
  std::ofstream bin(bin_path, std::ios::binary);
  if (!bin) throw std::runtime_error("cannot create " + bin_path);
  for (double value : beta) {
    std::uint64_t bits;
    std::memcpy(&bits, &value, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    bin.write(reinterpret_cast<const char*>(b), 8);
  }
  std::ofstream man(manifest_path);
  if (!man) throw std::runtime_error("cannot create " + manifest_path);
  man << manifest;
}

std::vector<double> load_model_params(const std::string& bin_path) {
  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw std::runtime_error("cannot open " + bin_path);
  std::vector<double> out;
  unsigned char b[8];
  while (bin.read(reinterpret_cast<char*>(b), 8)) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double value;
    std::memcpy(&value, &bits, 8);
    out.push_back(value);
  }
  if (bin.gcount() != 0) throw std::runtime_error(bin_path + ": truncated value");
  return out;
}

}  // namespace ovqa
