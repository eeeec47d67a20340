#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ovqa/frame.hpp"

namespace ovqa {

// Normalized per-pixel error raster, |Y - Y'| / 255, values in [0, 1].
struct ErrorMap {
  int width = 0;
  int height = 0;
  std::vector<float> values;

  ErrorMap() = default;
  ErrorMap(int w, int h, float fill = 0.0f)
      : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {}
  float at(int x, int y) const {
    return values[static_cast<std::size_t>(y) * width + x];
  }
  float& at(int x, int y) {
    return values[static_cast<std::size_t>(y) * width + x];
  }
};

ErrorMap make_error_map(const FramePlane& ref, const FramePlane& imp);

// Per-pixel raster emitted by a local scorer; regularized by the smoothness
// term of the training loss.
struct SensitivityMap {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  SensitivityMap() = default;
  SensitivityMap(int w, int h, double fill = 0.0)
      : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {}
  double at(int x, int y) const {
    return values[static_cast<std::size_t>(y) * width + x];
  }
  double& at(int x, int y) {
    return values[static_cast<std::size_t>(y) * width + x];
  }
};

inline constexpr int kPatchSize = 112;
inline constexpr int kPatchStride = 56;

struct Patch {
  FramePlane pixels;  // kPatchSize x kPatchSize
  int frame_index = 0;
  int x0 = 0;
  int y0 = 0;
  double hm_weight = 0.0;
  double em_weight = 0.0;
};

// Frame access abstraction so whole sequences never need to sit in memory.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual int frame_count() const = 0;
  virtual FramePlane frame(int index) = 0;
};

class MemoryFrames final : public FrameSource {
 public:
  explicit MemoryFrames(std::vector<FramePlane> frames) : frames_(std::move(frames)) {}
  int frame_count() const override { return static_cast<int>(frames_.size()); }
  FramePlane frame(int index) override { return frames_.at(index); }

 private:
  std::vector<FramePlane> frames_;
};

struct PreprocessConfig {
  int target_width = 960;
  int frame_interval = 45;
};

struct PreprocessedFrame {
  FramePlane ref;
  FramePlane imp;
  ErrorMap error;
  int source_index = 0;
};

// Spatial downsampling to the target width (height scales, bilinear) and
// temporal subsampling at the configured interval, plus error maps.
std::vector<PreprocessedFrame> preprocess(FrameSource& ref, FrameSource& imp,
                                          const PreprocessConfig& config = {});

// Draws n patches without replacement from the stride-56 candidate grid,
// with probability proportional to the HM mass under each footprint.
// Deterministic for a fixed seed. An all-zero HM map falls back to uniform
// sampling (uniform_fallback reports it).
std::vector<Patch> sample_patches(const FramePlane& frame, const ErrorMap& error,
                                  const WeightMap& hm, int n, std::uint64_t seed,
                                  int frame_index = 0, bool* uniform_fallback = nullptr);

// Fills each patch's em_weight with its EM footprint mass and returns the
// weights normalized to sum 1. Zero total mass falls back to uniform 1/n.
std::vector<double> em_weight_vector(std::vector<Patch>& patches, const WeightMap& em,
                                     bool* uniform_fallback = nullptr);

// ---------------------------------------------------------------------------
// Pluggable local scorer
// ---------------------------------------------------------------------------

struct ScorerInput {
  ErrorMap error;
  FramePlane pixels;  // optional; scorers may ignore it
};

// Slices the patch's error block out of the frame error map, pairing it
// with the patch pixels for the local scorer.
ScorerInput patch_input(const Patch& patch, const ErrorMap& frame_error);

struct ScorerOutput {
  double score = 0.0;
  SensitivityMap map;
};

class LocalScorer {
 public:
  virtual ~LocalScorer() = default;
  virtual int param_count() const = 0;
  virtual void init_params(std::span<double> params, std::uint64_t seed) const = 0;
  virtual ScorerOutput evaluate(const ScorerInput& input,
                                std::span<const double> params) const = 0;
  // Accumulates d(loss)/d(params) given upstream d(loss)/d(score) and
  // d(loss)/d(map).
  virtual void accumulate_gradient(const ScorerInput& input,
                                   std::span<const double> params, double d_score,
                                   const SensitivityMap& d_map,
                                   std::span<double> grad) const = 0;
  virtual std::string manifest() const = 0;
};

// Affine map over patch error statistics (mean, max, weighted error). The
// weighted-error statistic averages the error under a low-resolution
// parameter grid upsampled to the input size; that upsampled field is the
// emitted sensitivity map.
class AffineStatScorer final : public LocalScorer {
 public:
  explicit AffineStatScorer(int grid_width = 4, int grid_height = 4);

  int param_count() const override;
  void init_params(std::span<double> params, std::uint64_t seed) const override;
  ScorerOutput evaluate(const ScorerInput& input,
                        std::span<const double> params) const override;
  void accumulate_gradient(const ScorerInput& input, std::span<const double> params,
                           double d_score, const SensitivityMap& d_map,
                           std::span<double> grad) const override;
  std::string manifest() const override;

 private:
  int grid_width_;
  int grid_height_;
};

// ---------------------------------------------------------------------------
// Aggregation head: inner product of score and weight vectors, then two
// affine layers (1 -> 8 -> 1) with a rectifier in between.
// ---------------------------------------------------------------------------

inline constexpr int kHeadWidth = 8;
inline constexpr int kHeadParamCount = 3 * kHeadWidth + 1;

double head_forward(double s0, std::span<const double> params);
// Returns the output and accumulates gradients; d_s0 receives d(out)/d(s0)
// scaled by d_out.
double head_backward(double s0, std::span<const double> params, double d_out,
                     double& d_s0, std::span<double> d_params);
void head_identity_init(std::span<double> params);

double aggregate(std::span<const double> local_scores, std::span<const double> weights,
                 std::span<const double> head_params);

// ---------------------------------------------------------------------------
// Training loss: lambda1 * |s - s_g|^2
//              + lambda2 / (n H W) * sum_k sum_px (Sobel_h^2 + Sobel_v^2)^(3/2)
//              + lambda3 * |beta|^2
// ---------------------------------------------------------------------------

struct LossParams {
  double lambda1 = 1e3;
  double lambda2 = 1.0;
  double lambda3 = 5e-3;
  double tv_exponent = 1.5;  // exponent on the squared-gradient sum
};

struct LossBreakdown {
  double total = 0.0;
  double mse = 0.0;  // unweighted |s - s_g|^2
  double tv = 0.0;   // unweighted smoothness sum, already / (n H W)
  double l2 = 0.0;   // unweighted |beta|^2
};

// Sobel responses with reflective borders.
SensitivityMap sobel_horizontal(const SensitivityMap& m);
SensitivityMap sobel_vertical(const SensitivityMap& m);

double tv_penalty(const SensitivityMap& m, double exponent);
SensitivityMap tv_penalty_gradient(const SensitivityMap& m, double exponent);

LossBreakdown loss(std::span<const double> predicted, std::span<const double> target,
                   const std::vector<SensitivityMap>& maps,
                   std::span<const double> beta, const LossParams& params);

// ---------------------------------------------------------------------------
// Model and trainer
// ---------------------------------------------------------------------------

struct TrainItem {
  std::vector<ScorerInput> patches;
  std::vector<double> weights;  // EM-normalized, sums to 1
  double target = 0.0;          // DMOS
};

class Model {
 public:
  explicit Model(const LocalScorer& scorer) : scorer_(scorer) {}

  int param_count() const;
  std::span<const double> scorer_params(std::span<const double> beta) const;
  std::span<const double> head_params(std::span<const double> beta) const;

  double predict(const TrainItem& item, std::span<const double> beta) const;
  LossBreakdown batch_loss(const std::vector<TrainItem>& items,
                           std::span<const double> beta, const LossParams& params) const;
  LossBreakdown loss_and_gradient(const std::vector<TrainItem>& items,
                                  std::span<const double> beta, const LossParams& params,
                                  std::span<double> grad) const;

  const LocalScorer& scorer() const { return scorer_; }

 private:
  const LocalScorer& scorer_;
};

struct TrainConfig {
  double learning_rate = 5e-4;
  int epochs = 80;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 0;
  LossParams loss;
};

// key=value file; unknown keys are rejected.
TrainConfig load_train_config(const std::string& path);

struct TrainResult {
  std::vector<double> beta;
  std::vector<double> loss_history;  // loss before each step, plus the final loss
  LossParams loss_params;
};

TrainResult train(const std::vector<TrainItem>& items, const LocalScorer& scorer,
                  const TrainConfig& config = {});

// Flat little-endian 64-bit parameter vector plus a text manifest of shapes.
void save_model_params(std::span<const double> beta, const std::string& manifest,
                       const std::string& bin_path, const std::string& manifest_path);
std::vector<double> load_model_params(const std::string& bin_path);

}  // namespace ovqa
