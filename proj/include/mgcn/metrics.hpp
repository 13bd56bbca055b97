#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mgcn/common.hpp"
#include "mgcn/data_types.hpp"

namespace mgcn {

struct ClassMetrics {
  std::string name;
  Real precision = 0.0;
  Real recall = 0.0;
  Real f1 = 0.0;
  long support = 0;
  bool flagged = false;  // a zero denominator forced a metric to 0
};

struct Aggregates {
  Real precision = 0.0;
  Real recall = 0.0;
  Real f1 = 0.0;
};

// Piecewise-linear ROC curve; points run from (0,0) to (1,1) with tied
// scores grouped into single steps.
struct RocCurve {
  std::vector<Real> fpr;
  std::vector<Real> tpr;
};

struct RocResult {
  RocCurve curve;
  Real auc = 0.0;
};

struct MetricsReport {
  Real accuracy = 0.0;
  std::vector<ClassMetrics> per_class;
  Aggregates macro;
  Aggregates weighted;
  std::vector<std::vector<long>> confusion;  // [true][pred]
  RocCurve roc_micro_curve;
  std::map<std::string, RocCurve> roc_per_class;  // classes with both outcomes present
  Real auc_micro = 0.0;
  std::map<std::string, std::string> config_echo;
  std::uint64_t seed = 0;
  long n_evaluated = 0;
  Real wall_clock_seconds = 0.0;
};

bool operator==(const RocCurve& a, const RocCurve& b);
bool operator==(const ClassMetrics& a, const ClassMetrics& b);
bool operator==(const Aggregates& a, const Aggregates& b);
bool operator==(const MetricsReport& a, const MetricsReport& b);

// Entry (t, p) counts rows with true class t predicted as p.
std::vector<std::vector<long>> confusion_matrix(const std::vector<int>& y_true,
                                                const std::vector<int>& y_pred, int n_classes);

struct Prf1Result {
  std::vector<ClassMetrics> per_class;  // names left empty
  Aggregates macro;
  Aggregates weighted;
};

// Per-class precision = diag/colsum, recall = diag/rowsum, f1 = harmonic
// mean; zero denominators give 0 and set the flagged bit. The weighted
// aggregate uses class supports as weights.
Prf1Result precision_recall_f1(const std::vector<std::vector<long>>& confusion);

// Binary ROC by descending-score sweep with ties grouped, AUC by trapezoid.
// Throws if either outcome is missing.
RocResult roc_binary(const std::vector<Real>& scores, const std::vector<std::uint8_t>& positive);

// Micro-average ROC over the flattened one-vs-rest (score, is-positive)
// pairs of all N x C entries.
RocResult roc_micro(const Mat& probabilities, const std::vector<int>& y_true);

// Assembles the full report from test-set truths, predictions and class
// probability rows. config_echo / seed / wall clock are left to the caller.
MetricsReport compute_metrics(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                              const Mat& probabilities,
                              const std::vector<std::string>& class_names);

// Writes <dir>/report.json, <dir>/report.txt and <dir>/roc.csv
// (columns class,fpr,tpr; the micro curve uses the reserved name "micro").
void emit_report(const MetricsReport& report, const std::string& dir);
MetricsReport parse_report(const std::string& json_path);

}  // namespace mgcn
