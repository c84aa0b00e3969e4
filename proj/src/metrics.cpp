#include "ecgcl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "ecgcl/dataset.hpp"

namespace ecgcl {

std::optional<double> roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ShapeError("scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sum of (1-based, tie-averaged) ranks of positives.
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]] != 0) {
        rank_sum += avg_rank;
        ++n_pos;
      }
    }
    i = j + 1;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;
  const double np = static_cast<double>(n_pos);
  const double u = rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(n_neg));
}

std::vector<std::string> EvalReport::skipped_classes() const {
  std::vector<std::string> out;
  for (std::size_t c = 0; c < class_auc.size(); ++c) {
    if (!class_auc[c]) out.push_back(c < class_names.size() ? class_names[c] : std::to_string(c));
  }
  return out;
}

EvalReport macro_auc(const Mat<double>& scores, const Mat<double>& labels, std::vector<std::string> class_names) {
  if (scores.rows() != labels.rows() || scores.cols() != labels.cols())
    throw ShapeError("score and label matrices differ in shape");
  if (class_names.empty()) {
    if (scores.cols() == kNumClasses) {
      class_names.assign(kClassNames.begin(), kClassNames.end());
    } else {
      for (Eigen::Index c = 0; c < scores.cols(); ++c) class_names.push_back("class" + std::to_string(c));
    }
  }
  EvalReport report;
  report.class_names = std::move(class_names);
  report.n_eval = static_cast<int>(scores.rows());
  double sum = 0.0;
  int defined = 0;
  std::vector<double> col(static_cast<std::size_t>(scores.rows()));
  std::vector<int> lab(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index c = 0; c < scores.cols(); ++c) {
    for (Eigen::Index r = 0; r < scores.rows(); ++r) {
      col[r] = scores(r, c);
      lab[r] = labels(r, c) > 0.5 ? 1 : 0;
    }
    auto auc = roc_auc(col, lab);
    report.class_auc.push_back(auc);
    if (auc) {
      sum += *auc;
      ++defined;
    }
  }
  if (defined == 0) throw std::runtime_error("macro AUC undefined: no class has both positives and negatives");
  report.macro_auc = sum / defined;
  for (const auto& name : report.skipped_classes()) spdlog::warn("AUC undefined for class {}; excluded from macro average", name);
  return report;
}

bool ResultsTable::Row::improved() const {
  return pseudo_true && pseudo_false && pseudo_true->macro_auc > pseudo_false->macro_auc;
}

namespace {

std::string cell_text(const std::optional<TableCell>& c) {
  if (!c) return "N/A";
  if (c->seeds > 1) return fmt::format("{:.4f} ± {:.4f}", c->macro_auc, c->stddev);
  return fmt::format("{:.4f}", c->macro_auc);
}

}  // namespace

std::string ResultsTable::to_markdown() const {
  std::ostringstream os;
  os << "| No. of leads | pseudo = True | pseudo = False |\n";
  os << "|---|---|---|\n";
  for (const auto& r : rows) {
    std::string t = cell_text(r.pseudo_true);
    if (r.improved()) t = "**" + t + "**";
    os << "| " << r.subset << " | " << t << " | " << cell_text(r.pseudo_false) << " |\n";
  }
  return os.str();
}

std::string ResultsTable::to_csv() const {
  std::ostringstream os;
  os << "subset,pseudo_true,pseudo_true_std,pseudo_false,pseudo_false_std,seeds,improved\n";
  for (const auto& r : rows) {
    auto val = [](const std::optional<TableCell>& c) { return c ? fmt::format("{:.6f}", c->macro_auc) : std::string("N/A"); };
    auto sd = [](const std::optional<TableCell>& c) { return c ? fmt::format("{:.6f}", c->stddev) : std::string("N/A"); };
    const int seeds = r.pseudo_true ? r.pseudo_true->seeds : (r.pseudo_false ? r.pseudo_false->seeds : 0);
    os << r.subset << ',' << val(r.pseudo_true) << ',' << sd(r.pseudo_true) << ',' << val(r.pseudo_false) << ','
       << sd(r.pseudo_false) << ',' << seeds << ',' << (r.improved() ? "true" : "false") << '\n';
  }
  return os.str();
}

ResultsTable assemble_table(const std::vector<EvalReport>& reports) {
  ResultsTable table;
  if (reports.empty()) {
    spdlog::warn("no evaluation reports; results table is empty");
    return table;
  }
  // (subset, pseudo) -> metric values; std::map keeps assembly order-insensitive
  std::map<std::pair<std::string, bool>, std::vector<double>> cells;
  for (const auto& r : reports) cells[{r.subset, r.pseudo}].push_back(r.macro_auc);

  auto summarize = [&](const std::string& subset, bool pseudo) -> std::optional<TableCell> {
    auto it = cells.find({subset, pseudo});
    if (it == cells.end()) return std::nullopt;
    std::vector<double> v = it->second;
    std::sort(v.begin(), v.end());
    TableCell c;
    c.seeds = static_cast<int>(v.size());
    c.macro_auc = std::accumulate(v.begin(), v.end(), 0.0) / c.seeds;
    double ss = 0.0;
    for (double x : v) ss += (x - c.macro_auc) * (x - c.macro_auc);
    c.stddev = c.seeds > 1 ? std::sqrt(ss / (c.seeds - 1)) : 0.0;
    return c;
  };

  for (const char* subset : {"12", "6", "4", "3", "2"}) {
    ResultsTable::Row row;
    row.subset = subset;
    row.pseudo_true = summarize(subset, true);
    // the 12-lead model has no pseudo = False counterpart
    if (row.subset != "12") row.pseudo_false = summarize(subset, false);
    if (!row.pseudo_true) spdlog::warn("results table: missing cell ({}, pseudo=True)", subset);
    if (!row.pseudo_false && row.subset != "12") spdlog::warn("results table: missing cell ({}, pseudo=False)", subset);
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace ecgcl
