#include "mgcn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace mgcn {

using nlohmann::json;

bool operator==(const RocCurve& a, const RocCurve& b) {
  return a.fpr == b.fpr && a.tpr == b.tpr;
}

bool operator==(const ClassMetrics& a, const ClassMetrics& b) {
  return a.name == b.name && a.precision == b.precision && a.recall == b.recall &&
         a.f1 == b.f1 && a.support == b.support && a.flagged == b.flagged;
}

bool operator==(const Aggregates& a, const Aggregates& b) {
  return a.precision == b.precision && a.recall == b.recall && a.f1 == b.f1;
}

bool operator==(const MetricsReport& a, const MetricsReport& b) {
  return a.accuracy == b.accuracy && a.per_class == b.per_class && a.macro == b.macro &&
         a.weighted == b.weighted && a.confusion == b.confusion &&
         a.roc_micro_curve == b.roc_micro_curve && a.roc_per_class == b.roc_per_class &&
         a.auc_micro == b.auc_micro && a.config_echo == b.config_echo && a.seed == b.seed &&
         a.n_evaluated == b.n_evaluated && a.wall_clock_seconds == b.wall_clock_seconds;
}

std::vector<std::vector<long>> confusion_matrix(const std::vector<int>& y_true,
                                                const std::vector<int>& y_pred, int n_classes) {
  if (y_true.size() != y_pred.size()) throw Error("confusion_matrix: length mismatch");
  std::vector<std::vector<long>> m(n_classes, std::vector<long>(n_classes, 0));
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const int t = y_true[i], p = y_pred[i];
    if (t < 0 || t >= n_classes || p < 0 || p >= n_classes)
      throw Error("confusion_matrix: label out of range at index " + std::to_string(i));
    ++m[t][p];
  }
  return m;
}

Prf1Result precision_recall_f1(const std::vector<std::vector<long>>& confusion) {
  const int c = static_cast<int>(confusion.size());
  long total = 0;
  std::vector<long> row_sum(c, 0), col_sum(c, 0);
  for (int t = 0; t < c; ++t)
    for (int p = 0; p < c; ++p) {
      row_sum[t] += confusion[t][p];
      col_sum[p] += confusion[t][p];
      total += confusion[t][p];
    }
  if (total == 0) throw Error("precision_recall_f1: empty confusion matrix");

  Prf1Result r;
  r.per_class.resize(c);
  for (int k = 0; k < c; ++k) {
    auto& cm = r.per_class[k];
    const Real diag = static_cast<Real>(confusion[k][k]);
    cm.support = row_sum[k];
    if (col_sum[k] > 0) {
      cm.precision = diag / static_cast<Real>(col_sum[k]);
    } else {
      cm.precision = 0.0;
      cm.flagged = true;
    }
    if (row_sum[k] > 0) {
      cm.recall = diag / static_cast<Real>(row_sum[k]);
    } else {
      cm.recall = 0.0;
      cm.flagged = true;
    }
    if (cm.precision + cm.recall > 0.0) {
      cm.f1 = 2.0 * cm.precision * cm.recall / (cm.precision + cm.recall);
    } else {
      cm.f1 = 0.0;
      cm.flagged = true;
    }
    r.macro.precision += cm.precision;
    r.macro.recall += cm.recall;
    r.macro.f1 += cm.f1;
    const Real w = static_cast<Real>(cm.support) / static_cast<Real>(total);
    r.weighted.precision += w * cm.precision;
    r.weighted.recall += w * cm.recall;
    r.weighted.f1 += w * cm.f1;
  }
  r.macro.precision /= c;
  r.macro.recall /= c;
  r.macro.f1 /= c;
  return r;
}

RocResult roc_binary(const std::vector<Real>& scores, const std::vector<std::uint8_t>& positive) {
  if (scores.size() != positive.size() || scores.empty())
    throw Error("roc_binary: bad input sizes");
  long n_pos = 0;
  for (auto b : positive) n_pos += b ? 1 : 0;
  const long n_neg = static_cast<long>(scores.size()) - n_pos;
  if (n_pos == 0 || n_neg == 0) throw Error("roc_binary: single-class truth is degenerate");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
  });

  RocResult r;
  r.curve.fpr.push_back(0.0);
  r.curve.tpr.push_back(0.0);
  long tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const Real s = scores[order[i]];
    // All pairs tied at this score enter as one step.
    while (i < order.size() && scores[order[i]] == s) {
      if (positive[order[i]]) {
        ++tp;
      } else {
        ++fp;
      }
      ++i;
    }
    r.curve.fpr.push_back(static_cast<Real>(fp) / static_cast<Real>(n_neg));
    r.curve.tpr.push_back(static_cast<Real>(tp) / static_cast<Real>(n_pos));
  }
  for (std::size_t t = 1; t < r.curve.fpr.size(); ++t)
    r.auc += (r.curve.fpr[t] - r.curve.fpr[t - 1]) * (r.curve.tpr[t] + r.curve.tpr[t - 1]) / 2.0;
  return r;
}

RocResult roc_micro(const Mat& probabilities, const std::vector<int>& y_true) {
  const Eigen::Index n = probabilities.rows(), c = probabilities.cols();
  if (static_cast<Eigen::Index>(y_true.size()) != n) throw Error("roc_micro: length mismatch");
  std::vector<Real> scores;
  std::vector<std::uint8_t> positive;
  scores.reserve(static_cast<std::size_t>(n * c));
  positive.reserve(scores.capacity());
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < c; ++k) {
      scores.push_back(probabilities(i, k));
      positive.push_back(y_true[static_cast<std::size_t>(i)] == static_cast<int>(k) ? 1 : 0);
    }
  return roc_binary(scores, positive);
}

MetricsReport compute_metrics(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                              const Mat& probabilities,
                              const std::vector<std::string>& class_names) {
  const int c = static_cast<int>(class_names.size());
  MetricsReport report;
  report.n_evaluated = static_cast<long>(y_true.size());
  report.confusion = confusion_matrix(y_true, y_pred, c);

  long hits = 0;
  for (int k = 0; k < c; ++k) hits += report.confusion[k][k];
  report.accuracy = static_cast<Real>(hits) / static_cast<Real>(y_true.size());

  Prf1Result prf = precision_recall_f1(report.confusion);
  for (int k = 0; k < c; ++k) prf.per_class[k].name = class_names[k];
  report.per_class = std::move(prf.per_class);
  report.macro = prf.macro;
  report.weighted = prf.weighted;

  const RocResult micro = roc_micro(probabilities, y_true);
  report.roc_micro_curve = micro.curve;
  report.auc_micro = micro.auc;
  for (int k = 0; k < c; ++k) {
    long n_pos = 0;
    for (int t : y_true) n_pos += (t == k) ? 1 : 0;
    if (n_pos == 0 || n_pos == static_cast<long>(y_true.size())) continue;
    std::vector<Real> scores;
    std::vector<std::uint8_t> positive;
    scores.reserve(y_true.size());
    for (std::size_t i = 0; i < y_true.size(); ++i) {
      scores.push_back(probabilities(static_cast<Eigen::Index>(i), k));
      positive.push_back(y_true[i] == k ? 1 : 0);
    }
    report.roc_per_class[class_names[k]] = roc_binary(scores, positive).curve;
  }
  return report;
}

namespace {

json curve_to_json(const RocCurve& curve) {
  return json{{"fpr", curve.fpr}, {"tpr", curve.tpr}};
}

RocCurve curve_from_json(const json& j) {
  RocCurve c;
  c.fpr = j.at("fpr").get<std::vector<Real>>();
  c.tpr = j.at("tpr").get<std::vector<Real>>();
  return c;
}

}  // namespace

void emit_report(const MetricsReport& report, const std::string& dir) {
  json j;
  j["schema"] = "mgcn-report/1";
  j["accuracy"] = report.accuracy;
  j["n_evaluated"] = report.n_evaluated;
  j["seed"] = report.seed;
  j["wall_clock_seconds"] = report.wall_clock_seconds;
  j["config"] = report.config_echo;
  json per_class = json::array();
  for (const auto& cm : report.per_class)
    per_class.push_back(json{{"name", cm.name},
                             {"precision", cm.precision},
                             {"recall", cm.recall},
                             {"f1", cm.f1},
                             {"support", cm.support},
                             {"flagged", cm.flagged}});
  j["per_class"] = std::move(per_class);
  j["macro"] = json{{"precision", report.macro.precision},
                    {"recall", report.macro.recall},
                    {"f1", report.macro.f1}};
  j["weighted"] = json{{"precision", report.weighted.precision},
                       {"recall", report.weighted.recall},
                       {"f1", report.weighted.f1}};
  j["confusion"] = report.confusion;
  j["auc_micro"] = report.auc_micro;
  j["roc_micro"] = curve_to_json(report.roc_micro_curve);
  json per_class_roc = json::object();
  for (const auto& [name, curve] : report.roc_per_class) per_class_roc[name] = curve_to_json(curve);
  j["roc_per_class"] = std::move(per_class_roc);

  {
    std::ofstream out(dir + "/report.json");
    if (!out) throw Error("cannot write " + dir + "/report.json");
    out << j.dump(2) << '\n';
    if (!out) throw Error("write failed: " + dir + "/report.json");
  }

  {
    std::ofstream out(dir + "/report.txt");
    if (!out) throw Error("cannot write " + dir + "/report.txt");
    char line[256];
    std::snprintf(line, sizeof(line), "accuracy        %.6f\n", report.accuracy);
    out << line;
    std::snprintf(line, sizeof(line), "micro-AUC       %.6f\n", report.auc_micro);
    out << line;
    out << "evaluated nodes " << report.n_evaluated << "\n";
    out << "seed            " << report.seed << "\n\n";
    std::snprintf(line, sizeof(line), "%-28s %9s %9s %9s %9s %s\n", "class", "precision",
                  "recall", "f1", "support", "flag");
    out << line;
    for (const auto& cm : report.per_class) {
      std::snprintf(line, sizeof(line), "%-28s %9.4f %9.4f %9.4f %9ld %s\n", cm.name.c_str(),
                    cm.precision, cm.recall, cm.f1, cm.support, cm.flagged ? "zero-div" : "");
      out << line;
    }
    std::snprintf(line, sizeof(line), "%-28s %9.4f %9.4f %9.4f\n", "macro",
                  report.macro.precision, report.macro.recall, report.macro.f1);
    out << line;
    std::snprintf(line, sizeof(line), "%-28s %9.4f %9.4f %9.4f\n", "weighted",
                  report.weighted.precision, report.weighted.recall, report.weighted.f1);
    out << line;
    out << "\nconfusion matrix (rows = true, cols = predicted)\n";
    for (const auto& row : report.confusion) {
      for (std::size_t p = 0; p < row.size(); ++p) out << (p ? " " : "") << row[p];
      out << '\n';
    }
    out << "\nconfig\n";
    for (const auto& [k, v] : report.config_echo) out << "  " << k << " = " << v << '\n';
    if (!out) throw Error("write failed: " + dir + "/report.txt");
  }

  {
    std::ofstream out(dir + "/roc.csv");
    if (!out) throw Error("cannot write " + dir + "/roc.csv");
    out << "class,fpr,tpr\n";
    const auto put = [&](const std::string& name, const RocCurve& curve) {
      for (std::size_t t = 0; t < curve.fpr.size(); ++t)
        out << name << ',' << real_to_text(curve.fpr[t]) << ',' << real_to_text(curve.tpr[t])
            << '\n';
    };
    put("micro", report.roc_micro_curve);
    for (const auto& [name, curve] : report.roc_per_class) put(name, curve);
    if (!out) throw Error("write failed: " + dir + "/roc.csv");
  }
}

MetricsReport parse_report(const std::string& json_path) {
  std::ifstream in(json_path);
  if (!in) throw Error("cannot open " + json_path);
  json j;
  in >> j;
  if (j.at("schema").get<std::string>() != "mgcn-report/1")
    throw Error(json_path + ": unknown report schema");

  MetricsReport r;
  r.accuracy = j.at("accuracy").get<Real>();
  r.n_evaluated = j.at("n_evaluated").get<long>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.wall_clock_seconds = j.at("wall_clock_seconds").get<Real>();
  r.config_echo = j.at("config").get<std::map<std::string, std::string>>();
  for (const auto& e : j.at("per_class")) {
    ClassMetrics cm;
    cm.name = e.at("name").get<std::string>();
    cm.precision = e.at("precision").get<Real>();
    cm.recall = e.at("recall").get<Real>();
    cm.f1 = e.at("f1").get<Real>();
    cm.support = e.at("support").get<long>();
    cm.flagged = e.at("flagged").get<bool>();
    r.per_class.push_back(std::move(cm));
  }
  r.macro = {j.at("macro").at("precision").get<Real>(), j.at("macro").at("recall").get<Real>(),
             j.at("macro").at("f1").get<Real>()};
  r.weighted = {j.at("weighted").at("precision").get<Real>(),
                j.at("weighted").at("recall").get<Real>(),
                j.at("weighted").at("f1").get<Real>()};
  r.confusion = j.at("confusion").get<std::vector<std::vector<long>>>();
  r.auc_micro = j.at("auc_micro").get<Real>();
  r.roc_micro_curve = curve_from_json(j.at("roc_micro"));
  for (const auto& [name, curve] : j.at("roc_per_class").items())
    r.roc_per_class[name] = curve_from_json(curve);
  return r;
}

}  // namespace mgcn
