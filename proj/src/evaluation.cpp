#include "semfuse/evaluation.hpp"

#include <cmath>
#include <numeric>

namespace semfuse {

using nlohmann::json;

long ConfusionMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), 0L);
}

long ConfusionMatrix::trace() const {
  long t = 0;
  for (int c = 0; c < classes; ++c) t += at(c, c);
  return t;
}

long ConfusionMatrix::row_total(int actual) const {
  long t = 0;
  for (int p = 0; p < classes; ++p) t += at(actual, p);
  return t;
}

ConfusionMatrix confusion_matrix(const std::vector<int>& preds,
                                 const std::vector<int>& labels, int classes) {
  if (preds.size() != labels.size()) {
    throw DataError("confusion_matrix: preds/labels length mismatch");
  }
  ConfusionMatrix cm(classes);
  for (size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] < 0 || preds[i] >= classes || labels[i] < 0 ||
        labels[i] >= classes) {
      throw DataError("confusion_matrix: class index out of range");
    }
    ++cm.at(labels[i], preds[i]);
  }
  return cm;
}

std::pair<double, double> metrics(const ConfusionMatrix& cm) {
  const long total = cm.total();
  if (total == 0) throw DataError("metrics: empty confusion matrix");
  const double accuracy =
      static_cast<double>(cm.trace()) / static_cast<double>(total);

  double f1_sum = 0.0;
  for (int c = 0; c < cm.classes; ++c) {
    long tp = cm.at(c, c);
    long actual = cm.row_total(c);
    long predicted = 0;
    for (int a = 0; a < cm.classes; ++a) predicted += cm.at(a, c);
    const double precision =
        predicted > 0 ? static_cast<double>(tp) / predicted : 0.0;
    const double recall = actual > 0 ? static_cast<double>(tp) / actual : 0.0;
    const double f1 = (precision + recall) > 0.0
                          ? 2.0 * precision * recall / (precision + recall)
                          : 0.0;
    f1_sum += f1;
  }
  return {accuracy, f1_sum / cm.classes};
}

EvalReport EvalReport::from_confusion(const ConfusionMatrix& cm) {
  EvalReport r;
  auto [acc, f1] = metrics(cm);
  r.accuracy = acc;
  r.macro_f1 = f1;
  r.confusion = cm;
  r.n = cm.total();
  return r;
}

namespace {

std::pair<double, double> mean_and_population_std(
    const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  return {mean, std::sqrt(var / n)};
}

}  // namespace

AggregateReport aggregate_folds(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw DataError("aggregate_folds: no reports");
  const int classes = reports.front().confusion.classes;
  AggregateReport agg;
  agg.confusion_sum = ConfusionMatrix(classes);
  std::vector<double> accs, f1s;
  for (const EvalReport& r : reports) {
    if (r.confusion.classes != classes) {
      throw DataError("aggregate_folds: class-count mismatch");
    }
    accs.push_back(r.accuracy);
    f1s.push_back(r.macro_f1);
    for (size_t i = 0; i < r.confusion.counts.size(); ++i) {
      agg.confusion_sum.counts[i] += r.confusion.counts[i];
    }
  }
  std::tie(agg.accuracy_mean, agg.accuracy_std) = mean_and_population_std(accs);
  std::tie(agg.f1_mean, agg.f1_std) = mean_and_population_std(f1s);
  return agg;
}

namespace {

json confusion_to_json(const ConfusionMatrix& cm) {
  json rows = json::array();
  for (int a = 0; a < cm.classes; ++a) {
    json row = json::array();
    for (int p = 0; p < cm.classes; ++p) row.push_back(cm.at(a, p));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

json report_to_json(const std::string& task, const std::string& fusion,
                    const std::vector<EvalReport>& folds,
                    const AggregateReport& aggregate) {
  json fold_arr = json::array();
  for (const EvalReport& r : folds) {
    fold_arr.push_back({{"accuracy", r.accuracy},
                        {"macro_f1", r.macro_f1},
                        {"confusion", confusion_to_json(r.confusion)}});
  }
  return {{"task", task},
          {"fusion", fusion},
          {"folds", fold_arr},
          {"aggregate",
           {{"accuracy_mean", aggregate.accuracy_mean},
            {"accuracy_std", aggregate.accuracy_std},
            {"f1_mean", aggregate.f1_mean},
            {"f1_std", aggregate.f1_std},
            {"confusion_sum", confusion_to_json(aggregate.confusion_sum)}}}};
}

}  // namespace semfuse
