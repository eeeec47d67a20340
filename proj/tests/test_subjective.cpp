#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "ovqa/subjective.hpp"

using namespace ovqa;

namespace {

ScoreTable table_from(const std::vector<std::string>& subjects,
                      const std::vector<std::string>& sequences,
                      const std::vector<std::vector<double>>& scores) {
  ScoreTable t = ScoreTable::create(subjects, sequences);
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    for (std::size_t j = 0; j < sequences.size(); ++j) {
      t.score(i, j) = scores[i][j];
    }
  }
  return t;
}

}  // namespace

TEST_CASE("mos is the mean over valid subjects") {
  const ScoreTable single = table_from({"a"}, {"s"}, {{60}});
  CHECK(mos(single)[0] == doctest::Approx(60));

  const ScoreTable three = table_from({"a", "b", "c"}, {"s"}, {{40}, {60}, {80}});
  CHECK(mos(three)[0] == doctest::Approx(60));

  std::mt19937_64 rng(3);
  std::vector<std::vector<double>> scores(20, std::vector<double>(1));
  double sum = 0.0;
  std::vector<std::string> ids;
  for (int i = 0; i < 20; ++i) {
    ids.push_back("s" + std::to_string(i));
    scores[i][0] = (rng() % 10000) / 100.0;
    sum += scores[i][0];
  }
  const ScoreTable random_table = table_from(ids, {"seq"}, scores);
  CHECK(mos(random_table)[0] == doctest::Approx(sum / 20.0).epsilon(1e-12));
}

TEST_CASE("mos is permutation invariant over subjects") {
  const ScoreTable t = table_from({"a", "b", "c"}, {"x", "y"},
                                  {{10, 90}, {50, 50}, {30, 70}});
  const ScoreTable p = table_from({"c", "a", "b"}, {"x", "y"},
                                  {{30, 70}, {10, 90}, {50, 50}});
  CHECK(mos(t)[0] == doctest::Approx(mos(p)[0]));
  CHECK(mos(t)[1] == doctest::Approx(mos(p)[1]));
}

TEST_CASE("identical subjects survive the screening") {
  std::vector<std::vector<double>> scores(5, {50, 60, 70, 40});
  const ScoreTable t =
      table_from({"a", "b", "c", "d", "e"}, {"q1", "q2", "q3", "q4"}, scores);
  const RejectionResult r = reject_subjects(t);
  CHECK(r.rejected.empty());
  CHECK(r.table.subjects.size() == 5);
}

TEST_CASE("an adversarial subject is rejected") {
  // 29 consistent subjects plus one scoring 100-s on every sequence, with
  // sequence scores spanning both sides of 50 so the excursions go both
  // ways. One wild subject among N is only detectable once
  // (1 - 1/N) * sqrt(N) clears the sqrt(20) spread, hence the group size.
  constexpr int kSubjects = 30;
  std::vector<std::string> subjects;
  for (int i = 0; i < kSubjects; ++i) subjects.push_back("s" + std::to_string(i));
  std::vector<std::string> sequences;
  std::vector<double> base;
  std::mt19937_64 rng(11);
  for (int j = 0; j < 20; ++j) {
    sequences.push_back("q" + std::to_string(j));
    base.push_back(j % 2 == 0 ? 20.0 + (rng() % 10) : 70.0 + (rng() % 10));
  }
  ScoreTable t = ScoreTable::create(subjects, sequences);
  // Bounded jitter: consistent raters stay well inside the screening
  // bounds, so one pass reaches the fixed point.
  std::uniform_real_distribution<double> jitter(-3.0, 3.0);
  for (int i = 0; i < kSubjects; ++i) {
    for (int j = 0; j < 20; ++j) {
      const double s = std::clamp(base[j] + jitter(rng), 0.0, 100.0);
      t.score(i, j) = i == kSubjects - 1 ? 100.0 - s : s;
    }
  }
  const RejectionResult r = reject_subjects(t);
  REQUIRE(r.rejected.size() == 1);
  CHECK(r.rejected[0] == "s" + std::to_string(kSubjects - 1));

  // Idempotence: screening the survivors changes nothing.
  const RejectionResult again = reject_subjects(r.table);
  CHECK(again.rejected.empty());
  CHECK(again.table.subjects == r.table.subjects);
}

TEST_CASE("a single deviant rating is not enough to reject") {
  // 60 sequences, one excursion: (P+Q)/ratings = 1/60 <= 0.05.
  std::vector<std::string> subjects{"a", "b", "c", "d", "e", "f"};
  std::vector<std::string> sequences;
  for (int j = 0; j < 60; ++j) sequences.push_back("q" + std::to_string(j));
  ScoreTable t = ScoreTable::create(subjects, sequences);
  std::mt19937_64 rng(17);
  std::normal_distribution<double> jitter(0.0, 3.0);
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    for (int j = 0; j < 60; ++j) {
      t.score(i, j) = std::clamp(50.0 + jitter(rng), 0.0, 100.0);
    }
  }
  t.score(0, 30) = 100.0;  // single wild rating
  const RejectionResult r = reject_subjects(t);
  CHECK(r.rejected.empty());

  CHECK_THROWS_AS(reject_subjects(table_from({"a"}, {"q"}, {{50}})),
                  std::invalid_argument);
}

TEST_CASE("dmos maps zero difference to the 50-point midpoint") {
  // One reference, one impaired scored identically by every subject.
  const ScoreTable t = table_from({"a", "b", "c"}, {"ref", "imp"},
                                  {{80, 80}, {60, 60}, {70, 70}});
  const DmosResult r = dmos(t, {{"imp", "ref"}});
  CHECK(r.is_reference[0]);
  CHECK(r.dmos[0] == doctest::Approx(0.0));        // references are always 0
  CHECK(r.dmos[1] == doctest::Approx(50.0));       // z = 0 -> midpoint
  CHECK(r.flagged.size() == 3);                    // zero-variance differences
}

TEST_CASE("dmos grows when impaired sequences score lower") {
  const ScoreTable t = table_from(
      {"a", "b", "c"}, {"ref", "light", "heavy"},
      {{90, 70, 30}, {85, 65, 25}, {95, 80, 40}});
  const DmosResult r = dmos(t, {{"light", "ref"}, {"heavy", "ref"}});
  CHECK(r.dmos[0] == doctest::Approx(0.0));
  CHECK(r.dmos[1] < r.dmos[2]);
}

TEST_CASE("dmos matches an independent three-subject oracle") {
  // Hand-rolled pipeline: d_ij = S_ref - S_ij over impaired, per-subject
  // sample-std z-scores, (z+3)*100/6 clamped, mean over subjects.
  const std::vector<std::vector<double>> scores = {
      {90, 70, 40, 85}, {80, 60, 50, 75}, {95, 85, 30, 90}};
  const std::vector<std::string> sequences{"ref", "i1", "i2", "i3"};
  const ScoreTable t = table_from({"a", "b", "c"}, sequences, scores);
  const std::map<std::string, std::string> refs{
      {"i1", "ref"}, {"i2", "ref"}, {"i3", "ref"}};

  std::vector<double> expected(4, 0.0);
  std::vector<std::vector<double>> z(3, std::vector<double>(4, 0.0));
  for (int i = 0; i < 3; ++i) {
    std::vector<double> d;
    for (int j = 1; j < 4; ++j) d.push_back(scores[i][0] - scores[i][j]);
    const double mean = (d[0] + d[1] + d[2]) / 3.0;
    double ss = 0.0;
    for (double v : d) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / 2.0);
    for (int j = 1; j < 4; ++j) {
      z[i][j] = (scores[i][0] - scores[i][j] - mean) / sd;
    }
  }
  for (int j = 1; j < 4; ++j) {
    double sum = 0.0;
    for (int i = 0; i < 3; ++i) {
      sum += std::clamp((z[i][j] + 3.0) * 100.0 / 6.0, 0.0, 100.0);
    }
    expected[j] = sum / 3.0;
  }

  const DmosResult r = dmos(t, refs);
  for (int j = 1; j < 4; ++j) {
    CHECK(r.dmos[j] == doctest::Approx(expected[j]).epsilon(1e-12));
  }
  CHECK(r.flagged.empty());
}

TEST_CASE("logistic fit recovers a planted curve") {
  const std::array<double, 4> truth{80.0, 10.0, 32.0, 4.0};
  std::vector<double> x, y;
  for (int i = 0; i < 25; ++i) {
    x.push_back(20.0 + i);
    y.push_back(logistic_eval(truth, x.back()));
  }
  const RegressionFit fit = logistic_fit(x, y);
  double sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sse += (fit.fitted[i] - y[i]) * (fit.fitted[i] - y[i]);
  }
  CHECK(std::sqrt(sse / x.size()) < 1e-6);
}

TEST_CASE("logistic fit nests near-linear data") {
  std::vector<double> x, y;
  for (int i = 0; i < 30; ++i) {
    x.push_back(i);
    y.push_back(2.5 * i + 7.0);
  }
  // Exact linear data: linear least squares residual is 0.
  const RegressionFit fit = logistic_fit(x, y);
  double sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sse += (fit.fitted[i] - y[i]) * (fit.fitted[i] - y[i]);
  }
  CHECK(sse <= 1e-9);
}

TEST_CASE("anti-monotone data yields a decreasing fit") {
  std::vector<double> x, y;
  std::mt19937_64 rng(23);
  for (int i = 0; i < 30; ++i) {
    x.push_back(i);
    y.push_back(90.0 - 2.0 * i + (rng() % 100) / 50.0);
  }
  const RegressionFit fit = logistic_fit(x, y);
  CHECK(fit.beta[0] < fit.beta[1]);  // upper asymptote below lower: decreasing
  for (std::size_t i = 1; i < x.size(); ++i) {
    CHECK(fit.fitted[i] <= fit.fitted[i - 1] + 1e-9);
  }
}

TEST_CASE("logistic fit never loses to the constant predictor") {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> x, y;
    double mean = 0.0;
    for (int i = 0; i < 15; ++i) {
      x.push_back(i + 0.01 * static_cast<double>(rng() % 100));
      y.push_back((rng() % 10000) / 100.0);
      mean += y.back();
    }
    mean /= y.size();
    double const_sse = 0.0;
    for (double v : y) const_sse += (v - mean) * (v - mean);
    const RegressionFit fit = logistic_fit(x, y);
    double sse = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      sse += (fit.fitted[i] - y[i]) * (fit.fitted[i] - y[i]);
    }
    CHECK(sse <= const_sse + 1e-9);
  }
}

TEST_CASE("logistic fit rejects degenerate input") {
  CHECK_THROWS_AS(logistic_fit({1, 2, 3}, {1, 2, 3}), std::invalid_argument);
  CHECK_THROWS_AS(logistic_fit({1, 1, 1, 1, 1}, {1, 2, 3, 4, 5}),
                  std::invalid_argument);
}

TEST_CASE("correlation hand cases") {
  const CorrelationReport perfect = correlate({1, 3, 5}, {1, 3, 5});
  CHECK(perfect.pcc == doctest::Approx(1.0));
  CHECK(perfect.srcc == doctest::Approx(1.0));
  CHECK(perfect.rmse == doctest::Approx(0.0));
  CHECK(perfect.mae == doctest::Approx(0.0));

  const CorrelationReport affine = correlate({1, 2, 3}, {3, 5, 7});  // y = 2x+1
  CHECK(affine.pcc == doctest::Approx(1.0));
  CHECK(affine.srcc == doctest::Approx(1.0));

  // Hand-computed covariance/rank oracle: x=[1,2,3], y=[1,3,2].
  const CorrelationReport mixed = correlate({1, 2, 3}, {1, 3, 2});
  CHECK(mixed.pcc == doctest::Approx(0.5));
  CHECK(mixed.srcc == doctest::Approx(0.5));
}

TEST_CASE("pcc is invariant under positive affine transforms") {
  std::mt19937_64 rng(31);
  std::vector<double> x, y, xt, yt;
  for (int i = 0; i < 40; ++i) {
    x.push_back((rng() % 1000) / 10.0);
    y.push_back((rng() % 1000) / 10.0);
    xt.push_back(3.5 * x.back() + 11.0);
    yt.push_back(0.25 * y.back() - 4.0);
  }
  const double base = correlate(x, y).pcc;
  CHECK(correlate(xt, y).pcc == doctest::Approx(base).epsilon(1e-12));
  CHECK(correlate(x, yt).pcc == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("srcc is invariant under strictly monotone transforms") {
  std::mt19937_64 rng(37);
  std::vector<double> x, y, xt;
  for (int i = 0; i < 40; ++i) {
    x.push_back((rng() % 1000) / 10.0 + 1.0);
    y.push_back((rng() % 1000) / 10.0);
    xt.push_back(std::log(x.back()) * 7.0);
  }
  CHECK(correlate(xt, y).srcc == doctest::Approx(correlate(x, y).srcc).epsilon(1e-12));
}

TEST_CASE("zero variance flags the correlation as undefined") {
  const CorrelationReport r = correlate({5, 5, 5}, {1, 2, 3});
  CHECK_FALSE(r.pcc_defined);
  CHECK_FALSE(r.srcc_defined);
  CHECK(r.rmse > 0.0);
}

TEST_CASE("average ranks break ties evenly") {
  const auto ranks = average_ranks({10, 20, 20, 30});
  CHECK(ranks[0] == doctest::Approx(1.0));
  CHECK(ranks[1] == doctest::Approx(2.5));
  CHECK(ranks[2] == doctest::Approx(2.5));
  CHECK(ranks[3] == doctest::Approx(4.0));
}
