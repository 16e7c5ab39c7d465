#pragma once

#include "semfuse/common.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace semfuse {

/// Rows = actual class, columns = predicted class.
struct ConfusionMatrix {
  int classes = 0;
  std::vector<long> counts;  // row-major classes*classes

  ConfusionMatrix() = default;
  explicit ConfusionMatrix(int c)
      : classes(c), counts(static_cast<size_t>(c) * c, 0) {}

  long at(int actual, int predicted) const {
    return counts[static_cast<size_t>(actual) * classes + predicted];
  }
  long& at(int actual, int predicted) {
    return counts[static_cast<size_t>(actual) * classes + predicted];
  }
  long total() const;
  long trace() const;
  long row_total(int actual) const;
};

ConfusionMatrix confusion_matrix(const std::vector<int>& preds,
                                 const std::vector<int>& labels, int classes);

/// (accuracy, macro-F1). Per-class F1 uses the zero-substitution rule:
/// a class with precision+recall = 0 contributes 0.
std::pair<double, double> metrics(const ConfusionMatrix& cm);

struct EvalReport {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  ConfusionMatrix confusion;
  long n = 0;

  static EvalReport from_confusion(const ConfusionMatrix& cm);
};

struct AggregateReport {
  double accuracy_mean = 0.0, accuracy_std = 0.0;
  double f1_mean = 0.0, f1_std = 0.0;
  ConfusionMatrix confusion_sum;
};

/// Mean and population std over folds; elementwise-summed confusion.
AggregateReport aggregate_folds(const std::vector<EvalReport>& reports);

nlohmann::json report_to_json(const std::string& task,
                              const std::string& fusion,
                              const std::vector<EvalReport>& folds,
                              const AggregateReport& aggregate);

}  // namespace semfuse
