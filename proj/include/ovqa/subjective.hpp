#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

namespace ovqa {

// Raw opinion scores on the continuous 0..100 scale, subjects by sequences,
// NaN for missing ratings.
struct ScoreTable {
  std::vector<std::string> subjects;
  std::vector<std::string> sequences;
  std::vector<double> raw;  // subjects.size() * sequences.size(), row-major
  std::string group;

  static ScoreTable create(std::vector<std::string> subjects,
                           std::vector<std::string> sequences, std::string group = {});

  double score(std::size_t subject, std::size_t sequence) const {
    return raw[subject * sequences.size() + sequence];
  }
  double& score(std::size_t subject, std::size_t sequence) {
    return raw[subject * sequences.size() + sequence];
  }
  bool has(std::size_t subject, std::size_t sequence) const;
  int subject_index(const std::string& id) const;
  int sequence_index(const std::string& id) const;
};

// Per-sequence mean over valid subjects.
std::vector<double> mos(const ScoreTable& table);

// BT.500 screening: per-sequence kurtosis picks 2*stddev (kurtosis within
// [2, 4]) or sqrt(20)*stddev bounds; a subject is rejected when more than
// 5% of their ratings fall outside the bounds and the excursions are not
// one-sided (|P-Q|/(P+Q) < 0.3).
struct RejectionResult {
  ScoreTable table;
  std::vector<std::string> rejected;
};
RejectionResult reject_subjects(const ScoreTable& table);

// Difference scores against each sequence's reference, per-subject
// z-normalization, then (z + 3) * 100 / 6 clamped to [0, 100] and averaged
// over subjects. Reference sequences are forced to 0.
struct DmosResult {
  std::vector<double> dmos;          // one per table sequence
  std::vector<bool> is_reference;    // one per table sequence
  std::vector<std::string> flagged;  // subjects with zero-variance differences
};
DmosResult dmos(const ScoreTable& table,
                const std::map<std::string, std::string>& reference_of);

// Monotonic 4-parameter logistic fitted by multi-start damped Gauss-Newton:
// f(x) = b2 + (b1 - b2) / (1 + exp(-(x - b3) / |b4|)).
struct RegressionFit {
  std::array<double, 4> beta{};
  std::vector<double> fitted;
  bool converged = false;
};
RegressionFit logistic_fit(const std::vector<double>& objective,
                           const std::vector<double>& dmos);
double logistic_eval(const std::array<double, 4>& beta, double x);

struct CorrelationReport {
  double pcc = 0.0;
  double srcc = 0.0;
  double rmse = 0.0;
  double mae = 0.0;
  bool pcc_defined = false;
  bool srcc_defined = false;
};
CorrelationReport correlate(const std::vector<double>& fitted,
                            const std::vector<double>& dmos);

// Average ranks (ties averaged), used by the Spearman correlation.
std::vector<double> average_ranks(const std::vector<double>& values);

}  // namespace ovqa
