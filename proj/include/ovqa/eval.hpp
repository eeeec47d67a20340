#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "ovqa/subjective.hpp"

namespace ovqa {

struct ObjectiveRow {
  std::string sequence;
  std::string metric;
  double value = 0.0;
  std::string group;  // optional
};

struct DmosRow {
  std::string sequence;
  double dmos = 0.0;
  std::string group;  // optional
};

// One correlation result: scope "all" covers the whole table, "mean"
// averages per-group fits.
struct EvalRow {
  std::string metric;
  std::string scope;
  int n = 0;
  CorrelationReport report;
};

// Columns: sequence,metric,value[,group].
std::vector<ObjectiveRow> read_objective_csv(std::istream& in);
// Columns: sequence,dmos[,group].
std::vector<DmosRow> read_dmos_csv(std::istream& in);

// Per-metric logistic fit + correlation against DMOS; emits an all-data row
// per metric, plus a group-mean row when groups are present. Throws on
// objective sequences missing from the DMOS table.
std::vector<EvalRow> evaluate_tables(const std::vector<ObjectiveRow>& objective,
                                     const std::vector<DmosRow>& dmos);

void write_eval_csv(std::ostream& out, const std::vector<EvalRow>& rows);

}  // namespace ovqa
