#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ecgcl/tensor.hpp"

namespace ecgcl {

/// ROC-AUC as the Mann-Whitney statistic with ties counted one half.
/// Returns nullopt when labels contain only one class.
std::optional<double> roc_auc(std::span<const double> scores, std::span<const int> labels);

struct EvalReport {
  std::vector<std::string> class_names;
  std::vector<std::optional<double>> class_auc;
  double macro_auc = 0.0;
  int n_eval = 0;
  std::string subset;
  bool pseudo = false;

  std::vector<std::string> skipped_classes() const;
};

/// Per-class AUC over columns; macro = mean over defined classes.
/// Throws if no class has a defined AUC.
EvalReport macro_auc(const Mat<double>& scores, const Mat<double>& labels,
                     std::vector<std::string> class_names = {});

/// One cell of the results table: the mean over seeds for (subset, pseudo).
struct TableCell {
  double macro_auc = 0.0;
  double stddev = 0.0;
  int seeds = 0;
};

/// Rows are lead counts {12, 6, 4, 3, 2}; columns pseudo = True / False.
struct ResultsTable {
  struct Row {
    std::string subset;
    std::optional<TableCell> pseudo_true;
    std::optional<TableCell> pseudo_false;
    bool improved() const;
  };
  std::vector<Row> rows;

  std::string to_markdown() const;
  std::string to_csv() const;
};

/// Order-insensitive aggregation of reports into the lead-count x pseudo layout.
ResultsTable assemble_table(const std::vector<EvalReport>& reports);

}  // namespace ecgcl
