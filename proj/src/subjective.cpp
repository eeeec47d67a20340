#include "ovqa/subjective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

namespace ovqa {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct LinearSystem4 {
  double a[4][4]{};
  double b[4]{};

  // Gaussian elimination with partial pivoting.
  bool solve(double out[4]) {
    int perm[4] = {0, 1, 2, 3};
    for (int col = 0; col < 4; ++col) {
      int pivot = col;
      for (int row = col + 1; row < 4; ++row) {
        if (std::abs(a[perm[row]][col]) > std::abs(a[perm[pivot]][col])) pivot = row;
      }
      std::swap(perm[col], perm[pivot]);
      const double p = a[perm[col]][col];
      if (std::abs(p) < 1e-300) return false;
      for (int row = col + 1; row < 4; ++row) {
        const double f = a[perm[row]][col] / p;
        for (int k = col; k < 4; ++k) a[perm[row]][k] -= f * a[perm[col]][k];
        b[perm[row]] -= f * b[perm[col]];
      }
    }
    for (int col = 3; col >= 0; --col) {
      double acc = b[perm[col]];
      for (int k = col + 1; k < 4; ++k) acc -= a[perm[col]][k] * out[k];
      out[col] = acc / a[perm[col]][col];
    }
    return true;
  }
};

// f(x) = mid + half * tanh(t / 2); numerically stable for both saturated
// and near-linear parameter regimes.
double logistic_value(const std::array<double, 4>& beta, double x) {
  const double mid = 0.5 * (beta[0] + beta[1]);
  const double half = 0.5 * (beta[0] - beta[1]);
  const double t = (x - beta[2]) / std::abs(beta[3]);
  return mid + half * std::tanh(0.5 * t);
}

double sse_of(const std::array<double, 4>& beta, const std::vector<double>& x,
              const std::vector<double>& y) {
  double sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = logistic_value(beta, x[i]) - y[i];
    sse += r * r;
  }
  return sse;
}

// Damped Gauss-Newton from one start; beta[3] kept positive.
std::array<double, 4> refine(std::array<double, 4> beta, const std::vector<double>& x,
                             const std::vector<double>& y, bool* converged) {
  const std::size_t n = x.size();
  double lambda = 1e-3;
  double sse = sse_of(beta, x, y);
  *converged = false;

  for (int iter = 0; iter < 300; ++iter) {
    const double half = 0.5 * (beta[0] - beta[1]);
    const double b = std::abs(beta[3]);
    LinearSystem4 sys;
    for (std::size_t i = 0; i < n; ++i) {
      const double t = (x[i] - beta[2]) / b;
      const double tanh_half = std::tanh(0.5 * t);
      const double sech2 = 1.0 - tanh_half * tanh_half;
      const double f = 0.5 * (beta[0] + beta[1]) + half * tanh_half;
      const double r = f - y[i];
      const double j[4] = {0.5 * (1.0 + tanh_half), 0.5 * (1.0 - tanh_half),
                           -half * sech2 * 0.5 / b, -half * sech2 * 0.5 * t / b};
      for (int p = 0; p < 4; ++p) {
        sys.b[p] -= j[p] * r;
        for (int q = 0; q < 4; ++q) sys.a[p][q] += j[p] * j[q];
      }
    }

    bool stepped = false;
    for (int attempt = 0; attempt < 12; ++attempt) {
      LinearSystem4 damped = sys;
      for (int p = 0; p < 4; ++p) {
        damped.a[p][p] += lambda * std::max(sys.a[p][p], 1e-12);
      }
      double delta[4];
      if (!damped.solve(delta)) {
        lambda *= 10.0;
        continue;
      }
      std::array<double, 4> trial = beta;
      for (int p = 0; p < 4; ++p) trial[p] += delta[p];
      trial[3] = std::max(std::abs(trial[3]), 1e-12);
      const double trial_sse = sse_of(trial, x, y);
      if (trial_sse <= sse) {
        const double gain = sse - trial_sse;
        beta = trial;
        sse = trial_sse;
        lambda = std::max(lambda / 3.0, 1e-12);
        stepped = true;
        if (gain <= 1e-14 * (sse + 1e-14)) *converged = true;
        break;
      }
      lambda *= 10.0;
    }
    if (!stepped) {
      *converged = true;
      break;
    }
    if (*converged) break;
  }
  return beta;
}

double clamp_unit(double v) { return std::clamp(v, 0.0, 100.0); }

}  // namespace

ScoreTable ScoreTable::create(std::vector<std::string> subjects,
                              std::vector<std::string> sequences, std::string group) {
  ScoreTable t;
  t.subjects = std::move(subjects);
  t.sequences = std::move(sequences);
  t.group = std::move(group);
  t.raw.assign(t.subjects.size() * t.sequences.size(), kNaN);
  return t;
}

bool ScoreTable::has(std::size_t subject, std::size_t sequence) const {
  return !std::isnan(score(subject, sequence));
}

int ScoreTable::subject_index(const std::string& id) const {
  const auto it = std::find(subjects.begin(), subjects.end(), id);
  return it == subjects.end() ? -1 : static_cast<int>(it - subjects.begin());
}

int ScoreTable::sequence_index(const std::string& id) const {
  const auto it = std::find(sequences.begin(), sequences.end(), id);
  return it == sequences.end() ? -1 : static_cast<int>(it - sequences.begin());
}

std::vector<double> mos(const ScoreTable& table) {
  std::vector<double> out(table.sequences.size(), 0.0);
  for (std::size_t j = 0; j < table.sequences.size(); ++j) {
    double sum = 0.0;
    int count = 0;
    for (std::size_t i = 0; i < table.subjects.size(); ++i) {
      if (!table.has(i, j)) continue;
      sum += table.score(i, j);
      ++count;
    }
    if (count == 0) {
      throw std::runtime_error("sequence " + table.sequences[j] + " has no valid subject");
    }
    out[j] = sum / count;
  }
  return out;
}

RejectionResult reject_subjects(const ScoreTable& table) {
  const std::size_t ns = table.subjects.size();
  const std::size_t nq = table.sequences.size();
  if (ns < 2) throw std::invalid_argument("subject rejection needs at least 2 subjects");

  // Per-sequence screening bounds.
  std::vector<double> hi(nq), lo(nq);
  for (std::size_t j = 0; j < nq; ++j) {
    double sum = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < ns; ++i) {
      if (!table.has(i, j)) continue;
      sum += table.score(i, j);
      ++n;
    }
    if (n == 0) {
      hi[j] = std::numeric_limits<double>::infinity();
      lo[j] = -hi[j];
      continue;
    }
    const double mean = sum / n;
    double m2 = 0.0, m4 = 0.0, ss = 0.0;
    for (std::size_t i = 0; i < ns; ++i) {
      if (!table.has(i, j)) continue;
      const double d = table.score(i, j) - mean;
      m2 += d * d;
      m4 += d * d * d * d;
      ss += d * d;
    }
    const double stddev = n > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
    m2 /= n;
    m4 /= n;
    const double kurtosis = m2 > 0.0 ? m4 / (m2 * m2) : 3.0;
    const double spread = (kurtosis >= 2.0 && kurtosis <= 4.0) ? 2.0 : std::sqrt(20.0);
    hi[j] = mean + spread * stddev;
    lo[j] = mean - spread * stddev;
  }

  std::vector<bool> keep(ns, true);
  RejectionResult result;
  for (std::size_t i = 0; i < ns; ++i) {
    int p = 0, q = 0, ratings = 0;
    for (std::size_t j = 0; j < nq; ++j) {
      if (!table.has(i, j)) continue;
      ++ratings;
      if (table.score(i, j) > hi[j]) ++p;
      if (table.score(i, j) < lo[j]) ++q;
    }
    if (ratings == 0 || p + q == 0) continue;
    const double outlier_ratio = static_cast<double>(p + q) / ratings;
    const double direction = std::abs(p - q) / static_cast<double>(p + q);
    if (outlier_ratio > 0.05 && direction < 0.3) {
      keep[i] = false;
      result.rejected.push_back(table.subjects[i]);
    }
  }

  std::vector<std::string> kept_ids;
  for (std::size_t i = 0; i < ns; ++i) {
    if (keep[i]) kept_ids.push_back(table.subjects[i]);
  }
  if (kept_ids.empty()) throw std::runtime_error("subject rejection removed everyone");

  result.table = ScoreTable::create(kept_ids, table.sequences, table.group);
  std::size_t row = 0;
  for (std::size_t i = 0; i < ns; ++i) {
    if (!keep[i]) continue;
    for (std::size_t j = 0; j < nq; ++j) {
      result.table.score(row, j) = table.score(i, j);
    }
    ++row;
  }
  return result;
}

DmosResult dmos(const ScoreTable& table,
                const std::map<std::string, std::string>& reference_of) {
  const std::size_t ns = table.subjects.size();
  const std::size_t nq = table.sequences.size();

  std::set<std::string> reference_ids;
  for (const auto& [imp, ref] : reference_of) {
    if (reference_of.count(ref) != 0) {
      throw std::invalid_argument("sequence " + ref + " is both impaired and reference");
    }
    reference_ids.insert(ref);
  }

  std::vector<int> ref_index(nq, -1);  // impaired -> column of its reference
  std::vector<bool> is_ref(nq, false);
  for (std::size_t j = 0; j < nq; ++j) {
    const std::string& id = table.sequences[j];
    if (reference_ids.count(id) != 0) {
      is_ref[j] = true;
      continue;
    }
    const auto it = reference_of.find(id);
    if (it == reference_of.end()) {
      throw std::invalid_argument("sequence " + id + " has no reference mapping");
    }
    const int rj = table.sequence_index(it->second);
    if (rj < 0) {
      throw std::invalid_argument("reference " + it->second + " is not in the table");
    }
    ref_index[j] = rj;
  }

  // Difference scores per subject over impaired sequences.
  std::vector<std::vector<double>> diff(ns, std::vector<double>(nq, kNaN));
  std::vector<double> mu(ns, 0.0), sigma(ns, 0.0);
  std::vector<bool> flagged(ns, false);
  for (std::size_t i = 0; i < ns; ++i) {
    double sum = 0.0;
    int n = 0;
    for (std::size_t j = 0; j < nq; ++j) {
      if (is_ref[j] || ref_index[j] < 0) continue;
      if (!table.has(i, j) || !table.has(i, ref_index[j])) continue;
      diff[i][j] = table.score(i, ref_index[j]) - table.score(i, j);
      sum += diff[i][j];
      ++n;
    }
    if (n == 0) {
      flagged[i] = true;
      continue;
    }
    mu[i] = sum / n;
    double ss = 0.0;
    for (std::size_t j = 0; j < nq; ++j) {
      if (!std::isnan(diff[i][j])) ss += (diff[i][j] - mu[i]) * (diff[i][j] - mu[i]);
    }
    sigma[i] = n > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
    if (sigma[i] < 1e-12) flagged[i] = true;
  }

  DmosResult result;
  result.dmos.assign(nq, 0.0);
  result.is_reference.assign(nq, false);
  for (std::size_t i = 0; i < ns; ++i) {
    if (flagged[i]) result.flagged.push_back(table.subjects[i]);
  }

  for (std::size_t j = 0; j < nq; ++j) {
    if (is_ref[j]) {
      result.is_reference[j] = true;
      result.dmos[j] = 0.0;  // references are 0 by definition
      continue;
    }
    // Zero-variance subjects carry z = 0; they are excluded while other
    // subjects cover the sequence and only used as a fallback otherwise.
    double sum = 0.0;
    int n = 0;
    double fallback_sum = 0.0;
    int fallback_n = 0;
    for (std::size_t i = 0; i < ns; ++i) {
      if (std::isnan(diff[i][j])) continue;
      if (flagged[i]) {
        fallback_sum += clamp_unit((0.0 + 3.0) * 100.0 / 6.0);
        ++fallback_n;
        continue;
      }
      const double z = (diff[i][j] - mu[i]) / sigma[i];
      sum += clamp_unit((z + 3.0) * 100.0 / 6.0);
      ++n;
    }
    if (n > 0) {
      result.dmos[j] = sum / n;
    } else if (fallback_n > 0) {
      result.dmos[j] = fallback_sum / fallback_n;
    } else {
      throw std::runtime_error("no subject rated impaired sequence " + table.sequences[j]);
    }
  }
  return result;
}

double logistic_eval(const std::array<double, 4>& beta, double x) {
  return logistic_value(beta, x);
}

RegressionFit logistic_fit(const std::vector<double>& objective,
                           const std::vector<double>& dmos) {
  const std::size_t n = objective.size();
  if (n != dmos.size()) throw std::invalid_argument("logistic_fit: size mismatch");
  if (n < 5) throw std::invalid_argument("logistic_fit: need at least 5 points");

  const double xmin = *std::min_element(objective.begin(), objective.end());
  const double xmax = *std::max_element(objective.begin(), objective.end());
  if (!(xmax > xmin)) {
    throw std::invalid_argument("logistic_fit: objective scores are all equal");
  }
  const double range = xmax - xmin;

  // Internally standardized abscissa keeps the normal equations conditioned.
  std::vector<double> xs(n);
  for (std::size_t i = 0; i < n; ++i) xs[i] = (objective[i] - xmin) / range;

  const double ymin = *std::min_element(dmos.begin(), dmos.end());
  const double ymax = *std::max_element(dmos.begin(), dmos.end());
  const double ymean = std::accumulate(dmos.begin(), dmos.end(), 0.0) / n;

  // Closed-form linear fit; the logistic nests near-linear behavior at
  // large b4, which one start seeds directly.
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += xs[i];
    sy += dmos[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * dmos[i];
  }
  const double det = n * sxx - sx * sx;
  const double slope = det != 0.0 ? (n * sxy - sx * sy) / det : 0.0;
  const double inter = (sy - slope * sx) / n;

  std::vector<std::array<double, 4>> starts;
  const double pad = 0.05 * std::max(ymax - ymin, 1.0);
  for (double q : {0.25, 0.5, 0.75}) {
    starts.push_back({ymax + pad, ymin - pad, q, 0.25});  // increasing
    starts.push_back({ymin - pad, ymax + pad, q, 0.25});  // decreasing
  }
  {
    const double big = 1e5;
    const double half = 2.0 * slope * big;
    const double mid = slope * 0.5 + inter;
    starts.push_back({mid + half, mid - half, 0.5, big});  // near-linear shadow
  }
  starts.push_back({ymean, ymean, 0.5, 1.0});  // constant floor

  std::array<double, 4> best{};
  double best_sse = std::numeric_limits<double>::infinity();
  bool best_converged = false;
  for (const auto& start : starts) {
    bool converged = false;
    const auto candidate = refine(start, xs, dmos, &converged);
    const double sse = sse_of(candidate, xs, dmos);
    if (sse < best_sse) {
      best_sse = sse;
      best = candidate;
      best_converged = converged;
    }
  }

  RegressionFit fit;
  fit.beta = {best[0], best[1], xmin + best[2] * range, std::abs(best[3]) * range};
  fit.converged = best_converged;
  fit.fitted.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    fit.fitted[i] = logistic_value(best, xs[i]);
  }
  return fit;
}

std::vector<double> average_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * (i + j) + 1.0;  // 1-based, ties averaged
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

CorrelationReport correlate(const std::vector<double>& fitted,
                            const std::vector<double>& dmos) {
  const std::size_t n = fitted.size();
  if (n != dmos.size()) throw std::invalid_argument("correlate: size mismatch");
  if (n < 2) throw std::invalid_argument("correlate: need at least 2 points");

  auto pearson = [n](const std::vector<double>& a, const std::vector<double>& b,
                     bool* defined) {
    double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      cov += (a[i] - ma) * (b[i] - mb);
      va += (a[i] - ma) * (a[i] - ma);
      vb += (b[i] - mb) * (b[i] - mb);
    }
    if (!(va > 0.0) || !(vb > 0.0)) {
      *defined = false;
      return 0.0;
    }
    *defined = true;
    return cov / std::sqrt(va * vb);
  };

  CorrelationReport report;
  report.pcc = pearson(fitted, dmos, &report.pcc_defined);
  report.srcc =
      pearson(average_ranks(fitted), average_ranks(dmos), &report.srcc_defined);

  double sse = 0.0, sae = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = fitted[i] - dmos[i];
    sse += e * e;
    sae += std::abs(e);
  }
  report.rmse = std::sqrt(sse / n);
  report.mae = sae / n;
  return report;
}

}  // namespace ovqa
