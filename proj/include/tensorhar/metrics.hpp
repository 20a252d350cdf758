#pragma once

#include <cstddef>
#include <cstdio>
#include <iomanip>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tensorhar/dataset.hpp"
#include "tensorhar/error.hpp"

namespace tensorhar {

// counts[t][p]: samples of true class t predicted as p.
struct ConfusionMatrix {
  std::vector<std::string> labels;
  std::vector<std::vector<std::size_t>> counts;

  std::size_t size() const { return labels.size(); }
  std::size_t total() const {
    std::size_t s = 0;
    for (const auto& row : counts) {
      for (const auto c : row) s += c;
    }
    return s;
  }
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
  bool precision_undefined = false;  // no predictions for the class
  bool recall_undefined = false;     // no true samples of the class
};

struct AverageMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct EvalReport {
  double accuracy = 0.0;
  std::vector<ClassMetrics> per_class;
  AverageMetrics macro;
  AverageMetrics weighted;
  ConfusionMatrix confusion;
  std::string protocol;  // which split produced the numbers

  bool any_undefined() const {
    for (const auto& c : per_class) {
      if (c.precision_undefined || c.recall_undefined) return true;
    }
    return false;
  }
};

inline EvalReport compute_report(std::span<const int> y_true, std::span<const int> y_pred,
                                 const std::vector<std::string>& class_order) {
  require(y_true.size() == y_pred.size(), ErrorKind::dimension_mismatch, y_true.size(),
          " true labels but ", y_pred.size(), " predictions");
  const std::size_t n = class_order.size();
  require(n >= 1, ErrorKind::invalid_argument, "class order is empty");
  EvalReport r;
  r.confusion.labels = class_order;
  r.confusion.counts.assign(n, std::vector<std::size_t>(n, 0));
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    for (const int v : {y_true[i], y_pred[i]}) {
      require(v >= 0 && static_cast<std::size_t>(v) < n, ErrorKind::out_of_range,
              "label ", v, " at position ", i, " is not one of the ", n, " classes");
    }
    ++r.confusion.counts[static_cast<std::size_t>(y_true[i])][static_cast<std::size_t>(y_pred[i])];
  }

  const auto total = static_cast<double>(y_true.size());
  std::size_t correct = 0;
  r.per_class.resize(n);
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t tp = r.confusion.counts[c][c], predicted = 0, actual = 0;
    for (std::size_t o = 0; o < n; ++o) {
      predicted += r.confusion.counts[o][c];
      actual += r.confusion.counts[c][o];
    }
    correct += tp;
    auto& m = r.per_class[c];
    m.support = actual;
    m.precision_undefined = predicted == 0;
    m.recall_undefined = actual == 0;
    m.precision = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
    m.recall = actual ? static_cast<double>(tp) / static_cast<double>(actual) : 0.0;
    m.f1 = m.precision + m.recall > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    r.macro.precision += m.precision / static_cast<double>(n);
    r.macro.recall += m.recall / static_cast<double>(n);
    r.macro.f1 += m.f1 / static_cast<double>(n);
    if (total > 0.0) {
      const double w = static_cast<double>(actual) / total;
      r.weighted.precision += w * m.precision;
      r.weighted.recall += w * m.recall;
      r.weighted.f1 += w * m.f1;
    }
  }
  r.accuracy = total > 0.0 ? static_cast<double>(correct) / total : 0.0;
  return r;
}

inline EvalReport compute_report(std::span<const int> y_true, std::span<const int> y_pred,
                                 const LabelMap& labels) {
  return compute_report(y_true, y_pred, labels.names());
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json classes = nlohmann::json::array();
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    const auto& m = r.per_class[c];
    classes.push_back({{"label", r.confusion.labels[c]},
                       {"precision", m.precision},
                       {"recall", m.recall},
                       {"f1", m.f1},
                       {"support", m.support},
                       {"precision_undefined", m.precision_undefined},
                       {"recall_undefined", m.recall_undefined}});
  }
  auto avg = [](const AverageMetrics& a) {
    return nlohmann::json{{"precision", a.precision}, {"recall", a.recall}, {"f1", a.f1}};
  };
  return {{"protocol", r.protocol},
          {"accuracy", r.accuracy},
          {"n_samples", r.confusion.total()},
          {"classes", std::move(classes)},
          {"macro_avg", avg(r.macro)},
          {"weighted_avg", avg(r.weighted)},
          {"confusion_matrix", {{"labels", r.confusion.labels}, {"counts", r.confusion.counts}}},
          {"undefined_metrics", r.any_undefined()}};
}

// Plain-text table: one row per class, then macro and weighted averages.
inline std::string report_text(const EvalReport& r) {
  std::size_t width = 12;
  for (const auto& l : r.confusion.labels) width = std::max(width, l.size() + 2);
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << std::left << std::setw(static_cast<int>(width)) << "class" << std::right
     << std::setw(11) << "precision" << std::setw(11) << "recall" << std::setw(11) << "f1"
     << std::setw(10) << "support" << '\n';
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    const auto& m = r.per_class[c];
    os << std::left << std::setw(static_cast<int>(width)) << r.confusion.labels[c] << std::right
       << std::setw(11) << m.precision << std::setw(11) << m.recall << std::setw(11) << m.f1
       << std::setw(10) << m.support << (m.precision_undefined ? "  *" : "") << '\n';
  }
  const auto n = r.confusion.total();
  auto row = [&](const char* name, const AverageMetrics& a) {
    os << std::left << std::setw(static_cast<int>(width)) << name << std::right << std::setw(11)
       << a.precision << std::setw(11) << a.recall << std::setw(11) << a.f1 << std::setw(10) << n
       << '\n';
  };
  os << '\n';
  row("macro avg", r.macro);
  row("weighted avg", r.weighted);
  os << std::left << std::setw(static_cast<int>(width)) << "accuracy" << std::right
     << std::setw(33) << r.accuracy << std::setw(10) << n << '\n';
  if (!r.protocol.empty()) os << "protocol: " << r.protocol << '\n';
  if (r.any_undefined()) os << "* precision undefined (no predictions), reported as 0\n";
  return os.str();
}

inline std::string confusion_csv(const ConfusionMatrix& m) {
  std::ostringstream os;
  os << "true\\predicted";
  for (const auto& l : m.labels) os << ',' << l;
  os << '\n';
  for (std::size_t t = 0; t < m.size(); ++t) {
    os << m.labels[t];
    for (const auto c : m.counts[t]) os << ',' << c;
    os << '\n';
  }
  return os.str();
}

}  // namespace tensorhar
