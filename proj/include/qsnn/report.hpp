#pragma once

#include <string>
#include <vector>

#include "qsnn/experiment.hpp"

namespace qsnn {

// Accuracy-vs-T table: one row per (p, noise adaptor, correction) variant,
// averaged over seeds, plus one delta row (with − without noise adaptor)
// per (p, correction) pair where both variants are present.
struct PivotTable {
  std::vector<std::size_t> Ts;
  struct Row {
    std::string variant;
    double ann = 0.0;
    std::vector<double> acc;  // NaN where the variant has no row for that T
    std::size_t seeds = 0;
  };
  std::vector<Row> rows;
  std::vector<Row> deltas;
};

PivotTable pivot_results(const std::vector<ResultRow>& rows);
std::string pivot_csv(const PivotTable& table);
std::string pivot_text(const PivotTable& table);

}  // namespace qsnn
