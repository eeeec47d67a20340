#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <random>

#include "ovqa/errors.hpp"
#include "ovqa/percmodel.hpp"

using namespace ovqa;

namespace {

// Deterministic synthetic frames generated on demand; whole sequences never
// sit in memory.
class PatternFrames final : public FrameSource {
 public:
  PatternFrames(int w, int h, int count, int salt) : w_(w), h_(h), count_(count), salt_(salt) {}
  int frame_count() const override { return count_; }
  FramePlane frame(int index) override {
    FramePlane f(w_, h_);
    for (int y = 0; y < h_; ++y) {
      for (int x = 0; x < w_; ++x) {
        f.at(x, y) = static_cast<std::uint8_t>((x * 7 + y * 13 + index * 31 + salt_) & 0xff);
      }
    }
    return f;
  }

 private:
  int w_, h_, count_, salt_;
};

ErrorMap random_error(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  ErrorMap e(w, h);
  for (auto& v : e.values) v = u(rng);
  return e;
}

std::vector<TrainItem> synthetic_items(const Model& model,
                                       const std::vector<double>& truth, int count,
                                       int patches, int size, std::uint64_t seed) {
  std::vector<TrainItem> items;
  std::mt19937_64 rng(seed);
  for (int i = 0; i < count; ++i) {
    TrainItem item;
    double wsum = 0.0;
    for (int k = 0; k < patches; ++k) {
      item.patches.push_back({random_error(size, size, rng()), FramePlane()});
      item.weights.push_back(0.2 + (rng() % 100) / 100.0);
      wsum += item.weights.back();
    }
    for (double& w : item.weights) w /= wsum;
    item.target = model.predict(item, truth);
    items.push_back(std::move(item));
  }
  return items;
}

}  // namespace

TEST_CASE("preprocess downsamples space and time") {
  PatternFrames ref(3840, 1920, 90, 0);
  PatternFrames imp(3840, 1920, 90, 5);
  const auto frames = preprocess(ref, imp);
  REQUIRE(frames.size() == 2);  // indices 0 and 45
  CHECK(frames[0].source_index == 0);
  CHECK(frames[1].source_index == 45);
  CHECK(frames[0].ref.width == 960);
  CHECK(frames[0].ref.height == 480);
  CHECK(frames[0].error.width == 960);
  for (float v : frames[0].error.values) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
}

TEST_CASE("identical sequences yield all-zero error maps") {
  PatternFrames a(256, 128, 3, 1);
  PatternFrames b(256, 128, 3, 1);
  PreprocessConfig config;
  config.target_width = 256;
  config.frame_interval = 1;
  const auto frames = preprocess(a, b, config);
  REQUIRE(frames.size() == 3);
  for (const auto& f : frames) {
    for (float v : f.error.values) CHECK(v == 0.0f);
  }
}

TEST_CASE("single-frame sequences keep their one frame") {
  PatternFrames a(128, 64, 1, 0);
  PatternFrames b(128, 64, 1, 9);
  const auto frames = preprocess(a, b, {128, 45});
  CHECK(frames.size() == 1);

  PatternFrames c(128, 64, 2, 0);
  CHECK_THROWS_AS(preprocess(a, c), std::invalid_argument);
}

TEST_CASE("patch sampling follows the hm mass") {
  const FramePlane frame(224, 224, 100);
  const ErrorMap error(224, 224, 0.1f);

  // Mass only in the corner that a single candidate footprint covers.
  WeightMap corner(224, 224, 0.0f);
  corner.at(10, 10) = 5.0f;
  for (int trial = 0; trial < 20; ++trial) {
    const auto patches = sample_patches(frame, error, corner, 1, trial);
    REQUIRE(patches.size() == 1);
    CHECK(patches[0].x0 == 0);
    CHECK(patches[0].y0 == 0);
    CHECK(patches[0].hm_weight == doctest::Approx(5.0));
  }
}

TEST_CASE("uniform hm mass samples candidates uniformly") {
  const FramePlane frame(224, 224, 50);
  const ErrorMap error(224, 224, 0.0f);
  const WeightMap uniform(224, 224, 1.0f);
  std::map<std::pair<int, int>, int> counts;
  const int trials = 10000;
  for (int trial = 0; trial < trials; ++trial) {
    const auto patches = sample_patches(frame, error, uniform, 1, trial * 977 + 1);
    counts[{patches[0].x0, patches[0].y0}] += 1;
  }
  REQUIRE(counts.size() == 9);  // 3x3 stride-56 grid on 224x224
  const double expected = trials / 9.0;
  const double sigma = std::sqrt(trials * (1.0 / 9.0) * (8.0 / 9.0));
  for (const auto& [pos, count] : counts) {
    CHECK(std::abs(count - expected) < 3.0 * sigma);
  }
}

TEST_CASE("zero hm mass falls back to uniform sampling") {
  const FramePlane frame(224, 224, 50);
  const ErrorMap error(224, 224, 0.0f);
  const WeightMap zero(224, 224, 0.0f);
  bool fallback = false;
  const auto patches = sample_patches(frame, error, zero, 3, 7, 0, &fallback);
  CHECK(fallback);
  CHECK(patches.size() == 3);
  // Without replacement: all positions distinct.
  CHECK((patches[0].x0 != patches[1].x0 || patches[0].y0 != patches[1].y0));
}

TEST_CASE("patch sampling is reproducible and validates inputs") {
  const FramePlane frame(224, 224, 50);
  const ErrorMap error(224, 224, 0.2f);
  const WeightMap hm(224, 224, 1.0f);
  const auto a = sample_patches(frame, error, hm, 4, 99);
  const auto b = sample_patches(frame, error, hm, 4, 99);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].x0 == b[i].x0);
    CHECK(a[i].y0 == b[i].y0);
    CHECK(a[i].pixels.samples == b[i].pixels.samples);
  }

  CHECK_THROWS_AS(sample_patches(frame, error, hm, 10, 1), std::invalid_argument);
  const FramePlane small(100, 100, 0);
  CHECK_THROWS_AS(
      sample_patches(small, ErrorMap(100, 100), WeightMap(100, 100), 1, 1),
      std::invalid_argument);
}

TEST_CASE("em weight vector normalizes footprint sums") {
  const FramePlane frame(224, 224, 80);
  const ErrorMap error(224, 224, 0.0f);
  WeightMap corner(224, 224, 0.0f);
  corner.at(10, 10) = 1.0f;
  auto one = sample_patches(frame, error, corner, 1, 3);
  WeightMap em(224, 224, 0.0f);
  em.at(20, 20) = 2.5f;
  const auto single = em_weight_vector(one, em);
  REQUIRE(single.size() == 1);
  CHECK(single[0] == doctest::Approx(1.0));

  // Two disjoint patches with EM masses 3 and 1.
  WeightMap spread(224, 224, 0.0f);
  spread.at(10, 10) = 4.0f;    // candidate (0,0) region
  spread.at(150, 150) = 4.0f;  // candidate (112,112) region
  auto two = sample_patches(frame, error, spread, 2, 11);
  WeightMap em2(224, 224, 0.0f);
  for (auto& p : two) {
    const float mass = (p.x0 == 0 && p.y0 == 0) ? 3.0f : 1.0f;
    em2.at(p.x0 + 50, p.y0 + 50) = mass;
  }
  const auto weights = em_weight_vector(two, em2);
  double total = 0.0;
  for (std::size_t i = 0; i < two.size(); ++i) {
    CHECK(weights[i] == doctest::Approx(two[i].x0 == 0 ? 0.75 : 0.25));
    CHECK(two[i].em_weight == doctest::Approx(two[i].x0 == 0 ? 3.0 : 1.0));
    total += weights[i];
  }
  CHECK(std::abs(total - 1.0) < 1e-12);

  // Zero mass: uniform with a warning flag.
  bool fallback = false;
  const auto flat = em_weight_vector(two, WeightMap(224, 224, 0.0f), &fallback);
  CHECK(fallback);
  for (double w : flat) CHECK(w == doctest::Approx(0.5));
}

TEST_CASE("aggregate reduces to the weighted mean under the identity head") {
  std::vector<double> head(kHeadParamCount);
  head_identity_init(head);
  const std::vector<double> scores{3.0, 5.0, 9.0};
  const std::vector<double> weights{0.5, 0.3, 0.2};
  const double expected = 3.0 * 0.5 + 5.0 * 0.3 + 9.0 * 0.2;
  CHECK(aggregate(scores, weights, head) == doctest::Approx(expected).epsilon(1e-12));

  // Equal scores collapse to the common value for any weights summing to 1.
  const std::vector<double> sevens{7.0, 7.0, 7.0};
  CHECK(aggregate(sevens, weights, head) == doctest::Approx(7.0));

  const std::vector<double> one{1.0};
  const std::vector<double> two{0.5, 0.5};
  CHECK_THROWS_AS(aggregate(one, two, head), std::invalid_argument);
}

TEST_CASE("aggregate matches a hand-rolled dot product + affine oracle") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> head(kHeadParamCount);
  for (auto& v : head) v = u(rng);
  const std::vector<double> scores{u(rng), u(rng), u(rng), u(rng)};
  std::vector<double> weights{0.1, 0.4, 0.3, 0.2};

  double s0 = 0.0;
  for (int i = 0; i < 4; ++i) s0 += scores[i] * weights[i];
  double expected = head[3 * kHeadWidth];
  for (int j = 0; j < kHeadWidth; ++j) {
    const double a = head[j] * s0 + head[kHeadWidth + j];
    expected += head[2 * kHeadWidth + j] * std::max(0.0, a);
  }
  CHECK(aggregate(scores, weights, head) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("aggregate is affine in the scores while the rectifier stays active") {
  std::vector<double> head(kHeadParamCount, 0.0);
  for (int j = 0; j < kHeadWidth; ++j) {
    head[j] = 0.3 + 0.05 * j;               // positive input weights
    head[kHeadWidth + j] = 5.0;             // large biases keep units active
    head[2 * kHeadWidth + j] = 0.2 * j - 0.5;
  }
  head[3 * kHeadWidth] = 1.5;
  const std::vector<double> weights{0.25, 0.25, 0.25, 0.25};
  const std::vector<double> s1{1.0, 2.0, 0.5, 1.5};
  const std::vector<double> s2{0.2, 0.8, 1.2, 0.4};
  std::vector<double> blend(4);
  const double alpha = 0.3;
  for (int i = 0; i < 4; ++i) blend[i] = alpha * s1[i] + (1 - alpha) * s2[i];
  const double combined = aggregate(blend, weights, head);
  const double expected = alpha * aggregate(s1, weights, head) +
                          (1 - alpha) * aggregate(s2, weights, head);
  CHECK(combined == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("sampled patches wire through the scorer end to end") {
  // The whole desk-scale chain: error map -> HM-guided sampling -> EM
  // weight normalization -> per-patch scoring -> aggregated prediction.
  const int w = 336, h = 224;
  FramePlane imp(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) imp.at(x, y) = static_cast<std::uint8_t>((x * 3 + y) & 0xff);
  }
  FramePlane ref = imp;
  for (int y = 40; y < 120; ++y) {
    for (int x = 60; x < 180; ++x) ref.at(x, y) = static_cast<std::uint8_t>(ref.at(x, y) ^ 0x20);
  }
  const ErrorMap frame_error = make_error_map(ref, imp);
  WeightMap hm(w, h, 0.0f);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < 224; ++x) hm.at(x, y) = 1.0f;  // left-ish viewport
  }
  WeightMap em(w, h, 0.0f);
  for (int y = 30; y < 160; ++y) {
    for (int x = 40; x < 200; ++x) em.at(x, y) = 0.5f;
  }

  auto patches = sample_patches(imp, frame_error, hm, 4, 1234);
  const auto weights = em_weight_vector(patches, em);

  const AffineStatScorer scorer(2, 2);
  std::vector<double> params(scorer.param_count());
  scorer.init_params(params, 5);
  std::vector<double> scores;
  for (const auto& p : patches) {
    const ScorerInput input = patch_input(p, frame_error);
    CHECK(input.error.width == kPatchSize);
    CHECK(input.pixels.at(0, 0) == imp.at(p.x0, p.y0));
    scores.push_back(scorer.evaluate(input, params).score);
  }
  std::vector<double> head(kHeadParamCount);
  head_identity_init(head);
  double expected = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) expected += scores[i] * weights[i];
  if (expected < 0.0) expected = 0.0;  // identity head passes through a rectifier
  CHECK(aggregate(scores, weights, head) == doctest::Approx(expected).epsilon(1e-12));

  CHECK_THROWS_AS(patch_input(patches[0], ErrorMap(64, 64)), std::invalid_argument);
}

TEST_CASE("loss vanishes on the zero triple") {
  const std::vector<double> s{40.0, 60.0};
  const std::vector<SensitivityMap> maps{SensitivityMap(4, 4, 0.7),
                                         SensitivityMap(4, 4, 0.1)};
  const std::vector<double> beta(10, 0.0);
  const LossBreakdown b = loss(s, s, maps, beta, LossParams{});
  CHECK(b.total == 0.0);
  CHECK(b.mse == 0.0);
  CHECK(b.tv == 0.0);  // Sobel of constants is zero under reflective borders
  CHECK(b.l2 == 0.0);
}

TEST_CASE("step-edge map matches the hand-computed Sobel response") {
  // 3x3 map, columns (0, 0, 1). With reflective borders every row sees
  // neighbors v(-1)=v(0)=0 and v(3)=v(2)=1, and the vertical taps sum to 4:
  //   gx(x) = 4 * (v(x+1) - v(x-1))  ->  per row: [0, 4, 4]; gy = 0.
  // (gx^2)^(3/2) = 64 at the two right columns, so the sum is 3*128 = 384.
  SensitivityMap step(3, 3, 0.0);
  for (int y = 0; y < 3; ++y) step.at(2, y) = 1.0;

  const SensitivityMap gx = sobel_horizontal(step);
  const SensitivityMap gy = sobel_vertical(step);
  for (int y = 0; y < 3; ++y) {
    CHECK(gx.at(0, y) == doctest::Approx(0.0));
    CHECK(gx.at(1, y) == doctest::Approx(4.0));
    CHECK(gx.at(2, y) == doctest::Approx(4.0));
    for (int x = 0; x < 3; ++x) CHECK(gy.at(x, y) == doctest::Approx(0.0));
  }
  CHECK(tv_penalty(step, 1.5) == doctest::Approx(384.0));

  // Through the loss: one map, H = W = 3, lambda2 = 1 -> tv = 384 / 9.
  const std::vector<double> s{1.0};
  LossParams params;
  params.lambda1 = 0.0;
  params.lambda3 = 0.0;
  const LossBreakdown b = loss(s, s, {step}, std::vector<double>(4, 0.0), params);
  CHECK(b.tv == doctest::Approx(384.0 / 9.0));
  CHECK(b.total == doctest::Approx(384.0 / 9.0));
}

TEST_CASE("analytic gradients match central finite differences") {
  const AffineStatScorer scorer(2, 2);
  const Model model(scorer);
  const int np = model.param_count();
  const LossParams params;  // stock weights

  int checked = 0;
  for (std::uint64_t seed = 1; checked < 6; ++seed) {
    std::mt19937_64 rng(seed * 7919);
    std::vector<TrainItem> items;
    for (int b = 0; b < 4; ++b) {
      TrainItem item;
      for (int k = 0; k < 2; ++k) {
        item.patches.push_back({random_error(8, 8, rng()), FramePlane()});
        item.weights.push_back(0.5);
      }
      item.target = 20.0 + static_cast<double>(rng() % 60);
      items.push_back(std::move(item));
    }
    std::vector<double> beta(np);
    std::normal_distribution<double> init(0.0, 0.5);
    for (auto& v : beta) v = init(rng);

    // Keep clear of the rectifier kink so central differences are valid.
    bool near_kink = false;
    for (const auto& item : items) {
      double s0 = 0.0;
      for (std::size_t k = 0; k < item.patches.size(); ++k) {
        s0 += scorer.evaluate(item.patches[k],
                              std::span<const double>(beta).first(scorer.param_count()))
                  .score *
              item.weights[k];
      }
      for (int j = 0; j < kHeadWidth; ++j) {
        const double a = beta[scorer.param_count() + j] * s0 +
                         beta[scorer.param_count() + kHeadWidth + j];
        if (std::abs(a) < 1e-3) near_kink = true;
      }
    }
    if (near_kink) continue;

    std::vector<double> grad(np);
    model.loss_and_gradient(items, beta, params, grad);

    const double step = 1e-5;
    double worst = 0.0;
    for (int p = 0; p < np; ++p) {
      std::vector<double> plus = beta, minus = beta;
      plus[p] += step;
      minus[p] -= step;
      const double numeric = (model.batch_loss(items, plus, params).total -
                              model.batch_loss(items, minus, params).total) /
                             (2.0 * step);
      const double denom = std::max({1.0, std::abs(grad[p]), std::abs(numeric)});
      worst = std::max(worst, std::abs(grad[p] - numeric) / denom);
    }
    CHECK(worst < 1e-4);
    ++checked;
  }
}

TEST_CASE("training loss decreases over the first epochs on a realizable item") {
  const AffineStatScorer scorer(2, 2);
  const Model model(scorer);
  std::vector<double> truth(model.param_count(), 0.0);
  truth[0] = 40.0;
  truth[1] = 20.0;
  truth[2] = 15.0;
  truth[3] = 5.0;
  for (int i = 4; i < scorer.param_count(); ++i) truth[i] = 0.5;
  head_identity_init(std::span<double>(truth).subspan(scorer.param_count()));

  const auto items = synthetic_items(model, truth, 1, 2, 8, 5);
  TrainConfig config;
  config.epochs = 12;
  const TrainResult result = train(items, scorer, config);
  REQUIRE(result.loss_history.size() >= 11);
  for (int i = 0; i < 10; ++i) {
    CHECK(result.loss_history[i + 1] < result.loss_history[i]);
  }
}

TEST_CASE("pure L2 training shrinks the parameters") {
  const AffineStatScorer scorer(2, 2);
  std::vector<TrainItem> items;
  TrainItem item;
  item.patches.push_back({random_error(8, 8, 3), FramePlane()});
  item.weights.push_back(1.0);
  item.target = 0.0;
  items.push_back(std::move(item));

  TrainConfig config;
  config.loss.lambda1 = 0.0;
  config.loss.lambda2 = 0.0;
  config.learning_rate = 2e-3;
  config.epochs = 400;
  config.seed = 9;
  const TrainResult result = train(items, scorer, config);

  const Model model(scorer);
  std::vector<double> init(model.param_count(), 0.0);
  scorer.init_params(std::span<double>(init).first(scorer.param_count()), 9);
  {
    std::mt19937_64 rng(9 ^ 0x9e3779b97f4a7c15ull);
    std::normal_distribution<double> small(0.0, 0.1);
    for (int i = scorer.param_count(); i < model.param_count(); ++i) init[i] = small(rng);
  }
  double init_norm = 0.0, final_norm = 0.0;
  for (std::size_t i = 0; i < init.size(); ++i) {
    init_norm += init[i] * init[i];
    final_norm += result.beta[i] * result.beta[i];
  }
  CHECK(final_norm < 0.05 * init_norm);
}

TEST_CASE("training recovers a planted affine scorer") {
  const AffineStatScorer scorer(2, 2);
  const Model model(scorer);
  std::vector<double> truth(model.param_count(), 0.0);
  truth[0] = 40.0;
  truth[1] = 20.0;
  truth[2] = 15.0;
  truth[3] = 5.0;
  for (int i = 4; i < scorer.param_count(); ++i) truth[i] = 0.4 + 0.1 * i;
  head_identity_init(std::span<double>(truth).subspan(scorer.param_count()));

  const auto items = synthetic_items(model, truth, 10, 3, 8, 17);
  TrainConfig config;
  config.learning_rate = 0.01;
  config.epochs = 4000;
  config.seed = 4;
  const TrainResult result = train(items, scorer, config);

  double sse = 0.0;
  for (const auto& item : items) {
    const double p = model.predict(item, result.beta);
    sse += (p - item.target) * (p - item.target);
  }
  CHECK(std::sqrt(sse / items.size()) < 1.0);

  // Seed reproducibility.
  const TrainResult again = train(items, scorer, config);
  CHECK(std::abs(result.loss_history.back() - again.loss_history.back()) < 1e-6);
}

TEST_CASE("full-batch training is order independent") {
  const AffineStatScorer scorer(2, 2);
  const Model model(scorer);
  std::vector<double> truth(model.param_count(), 0.1);
  head_identity_init(std::span<double>(truth).subspan(scorer.param_count()));
  truth[0] = 30.0;

  auto items = synthetic_items(model, truth, 6, 2, 8, 23);
  TrainConfig config;
  config.learning_rate = 5e-3;
  config.epochs = 300;
  config.seed = 2;
  const TrainResult forward = train(items, scorer, config);
  std::reverse(items.begin(), items.end());
  const TrainResult reversed = train(items, scorer, config);
  CHECK(std::abs(forward.loss_history.back() - reversed.loss_history.back()) < 1e-6);
}

TEST_CASE("non-finite loss aborts with diagnostics") {
  const AffineStatScorer scorer(2, 2);
  std::vector<TrainItem> items;
  TrainItem item;
  item.patches.push_back({random_error(8, 8, 3), FramePlane()});
  item.weights.push_back(1.0);
  item.target = std::numeric_limits<double>::infinity();
  items.push_back(std::move(item));
  CHECK_THROWS_AS(train(items, scorer, TrainConfig{}), numeric_error);
}

TEST_CASE("model parameters round trip through the flat file format") {
  std::vector<double> beta{1.5, -2.25, 0.0, 1e-300, 3.14159265358979};
  const auto dir = std::filesystem::temp_directory_path() / "ovqa_params_test";
  std::filesystem::create_directories(dir);
  const std::string bin = (dir / "params.bin").string();
  const std::string man = (dir / "params.manifest").string();
  save_model_params(beta, "scorer.affine_stats 4\nhead 25\n", bin, man);
  const auto back = load_model_params(bin);
  REQUIRE(back.size() == beta.size());
  for (std::size_t i = 0; i < beta.size(); ++i) CHECK(back[i] == beta[i]);
}

TEST_CASE("train config parses key=value files") {
  const auto dir = std::filesystem::temp_directory_path() / "ovqa_cfg_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "train.cfg").string();
  {
    std::FILE* f = std::fopen(path.c_str(), "w");
    std::fputs("learning_rate = 0.002\nepochs=120\nlambda1 = 500\n# comment\n\n", f);
    std::fclose(f);
  }
  const TrainConfig cfg = load_train_config(path);
  CHECK(cfg.learning_rate == doctest::Approx(0.002));
  CHECK(cfg.epochs == 120);
  CHECK(cfg.loss.lambda1 == doctest::Approx(500));
  CHECK(cfg.loss.lambda2 == doctest::Approx(1.0));  // default kept

  {
    std::FILE* f = std::fopen(path.c_str(), "w");
    std::fputs("bogus = 3\n", f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(load_train_config(path), std::runtime_error);
}
