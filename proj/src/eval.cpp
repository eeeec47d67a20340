#include "ovqa/eval.hpp"

#include <map>
#include <ostream>
#include <set>
#include <stdexcept>

#include "ovqa/csv.hpp"
#include "ovqa/errors.hpp"

namespace ovqa {

namespace {

double parse_value(const std::string& s, const char* what) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != s.size()) {
    throw std::runtime_error(std::string("bad ") + what + " value: '" + s + "'");
  }
  return v;
}

EvalRow correlation_row(const std::string& metric, const std::string& scope,
                        const std::vector<double>& objective,
                        const std::vector<double>& dmos_values) {
  const RegressionFit fit = logistic_fit(objective, dmos_values);
  EvalRow row;
  row.metric = metric;
  row.scope = scope;
  row.n = static_cast<int>(objective.size());
  row.report = correlate(fit.fitted, dmos_values);
  return row;
}

}  // namespace

std::vector<ObjectiveRow> read_objective_csv(std::istream& in) {
  const CsvTable table = read_csv(in);
  const int c_seq = table.column("sequence");
  const int c_metric = table.column("metric");
  const int c_value = table.column("value");
  const int c_group = table.column("group");
  if (c_seq < 0 || c_metric < 0 || c_value < 0) {
    throw std::runtime_error("objective csv needs sequence,metric,value columns");
  }
  std::vector<ObjectiveRow> rows;
  for (const auto& r : table.rows) {
    ObjectiveRow row;
    row.sequence = r[c_seq];
    row.metric = r[c_metric];
    row.value = parse_value(r[c_value], "objective");
    if (c_group >= 0) row.group = r[c_group];
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<DmosRow> read_dmos_csv(std::istream& in) {
  const CsvTable table = read_csv(in);
  const int c_seq = table.column("sequence");
  const int c_dmos = table.column("dmos");
  const int c_group = table.column("group");
  if (c_seq < 0 || c_dmos < 0) {
    throw std::runtime_error("subjective csv needs sequence,dmos columns");
  }
  std::vector<DmosRow> rows;
  for (const auto& r : table.rows) {
    DmosRow row;
    row.sequence = r[c_seq];
    row.dmos = parse_value(r[c_dmos], "dmos");
    if (c_group >= 0) row.group = r[c_group];
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<EvalRow> evaluate_tables(const std::vector<ObjectiveRow>& objective,
                                     const std::vector<DmosRow>& dmos) {
  std::map<std::string, double> dmos_of;
  std::map<std::string, std::string> group_of;
  for (const auto& r : dmos) {
    dmos_of[r.sequence] = r.dmos;
    if (!r.group.empty()) group_of[r.sequence] = r.group;
  }

  // metric -> (sequence, value), preserving first-seen metric order.
  std::vector<std::string> metric_order;
  std::map<std::string, std::vector<std::pair<std::string, double>>> by_metric;
  for (const auto& r : objective) {
    if (dmos_of.find(r.sequence) == dmos_of.end()) {
      throw std::runtime_error("objective sequence '" + r.sequence +
                               "' is missing from the DMOS table");
    }
    if (by_metric.find(r.metric) == by_metric.end()) metric_order.push_back(r.metric);
    by_metric[r.metric].emplace_back(r.sequence, r.value);
    if (!r.group.empty()) group_of.emplace(r.sequence, r.group);
  }

  std::vector<EvalRow> rows;
  for (const auto& metric : metric_order) {
    const auto& pairs = by_metric[metric];
    std::vector<double> x, y;
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> groups;
    for (const auto& [seq, value] : pairs) {
      x.push_back(value);
      y.push_back(dmos_of[seq]);
      const auto git = group_of.find(seq);
      if (git != group_of.end()) {
        groups[git->second].first.push_back(value);
        groups[git->second].second.push_back(dmos_of[seq]);
      }
    }
    rows.push_back(correlation_row(metric, "all", x, y));

    if (groups.size() >= 2) {
      CorrelationReport mean;
      int used = 0;
      int total_n = 0;
      for (const auto& [name, data] : groups) {
        if (data.first.size() < 5) continue;  // too small to fit
        const EvalRow g = correlation_row(metric, name, data.first, data.second);
        mean.pcc += g.report.pcc;
        mean.srcc += g.report.srcc;
        mean.rmse += g.report.rmse;
        mean.mae += g.report.mae;
        mean.pcc_defined |= g.report.pcc_defined;
        mean.srcc_defined |= g.report.srcc_defined;
        total_n += g.n;
        ++used;
      }
      if (used > 0) {
        mean.pcc /= used;
        mean.srcc /= used;
        mean.rmse /= used;
        mean.mae /= used;
        EvalRow row;
        row.metric = metric;
        row.scope = "mean";
        row.n = total_n;
        row.report = mean;
        rows.push_back(row);
      }
    }
  }
  return rows;
}

void write_eval_csv(std::ostream& out, const std::vector<EvalRow>& rows) {
  out << "metric,scope,n,pcc,srcc,rmse,mae\n";
  for (const auto& r : rows) {
    out << r.metric << ',' << r.scope << ',' << r.n << ','
        << (r.report.pcc_defined ? format_double(r.report.pcc) : "") << ','
        << (r.report.srcc_defined ? format_double(r.report.srcc) : "") << ','
        << format_double(r.report.rmse) << ',' << format_double(r.report.mae) << '\n';
  }
}

}  // namespace ovqa
