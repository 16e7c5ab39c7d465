#include "semfuse/training.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <mutex>
#include <optional>
#include <set>
#include <thread>

namespace semfuse {

using nlohmann::json;

void TrainConfig::validate() const {
  if (lr <= 0.0) throw ConfigError("lr must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (monitor != "val_loss" && monitor != "val_accuracy") {
    throw ConfigError("early_stop_metric must be val_loss or val_accuracy");
  }
}

TrainConfig train_config_from(const KVConfig& cfg) {
  TrainConfig t;
  t.lr = cfg.num("lr");
  t.batch_size = static_cast<int>(cfg.integer("batch_size"));
  t.max_epochs = static_cast<int>(cfg.integer("max_epochs"));
  t.patience = static_cast<int>(cfg.integer("patience"));
  t.monitor = cfg.str("early_stop_metric");
  t.seed = static_cast<uint64_t>(cfg.integer("seed"));
  t.freeze_backbones = cfg.flag("freeze_backbones");
  t.adam_beta1 = cfg.num("adam_beta1");
  t.adam_beta2 = cfg.num("adam_beta2");
  t.adam_eps = cfg.num("adam_eps");
  t.validate();
  return t;
}

json trainlog_to_json(const TrainLog& log) {
  json epochs = json::array();
  for (const EpochLog& e : log.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"val_loss", e.val_loss},
                      {"val_accuracy", e.val_accuracy},
                      {"val_macro_f1", e.val_macro_f1},
                      {"wall_s", e.wall_s}});
  }
  return {{"epochs", epochs},
          {"stop_reason", log.stop_reason},
          {"best_epoch", log.best_epoch}};
}

LabelMap label_map(const std::vector<PostRecord>& records, TaskKind task) {
  LabelMap labels;
  for (const PostRecord& r : records) {
    labels[r.id] = label_of(r, task == TaskKind::Multiclass);
  }
  return labels;
}

namespace {

const EncodedFeatures& features_of(const FeatureCache& cache,
                                   const std::string& id) {
  auto it = cache.find(id);
  if (it == cache.end()) {
    throw TrainError("no encoded features for record id " + id);
  }
  return it->second;
}

int label_for(const LabelMap& labels, const std::string& id) {
  auto it = labels.find(id);
  if (it == labels.end()) throw TrainError("no label for record id " + id);
  return it->second;
}

}  // namespace

double evaluate_loss(const MultimodalModel& model, const FeatureCache& cache,
                     const LabelMap& labels,
                     const std::vector<std::string>& ids) {
  if (ids.empty()) throw TrainError("evaluate_loss: empty id set");
  double total = 0.0;
  for (const std::string& id : ids) {
    MultimodalModel::EvalOut out = model.forward_eval(features_of(cache, id));
    total += MultimodalModel::combined_loss(out.fused, out.recon,
                                            out.log_probs,
                                            label_for(labels, id));
  }
  return total / static_cast<double>(ids.size());
}

EvalReport evaluate_ids(const MultimodalModel& model,
                        const FeatureCache& cache, const LabelMap& labels,
                        const std::vector<std::string>& ids) {
  std::vector<int> preds, actual;
  preds.reserve(ids.size());
  actual.reserve(ids.size());
  for (const std::string& id : ids) {
    preds.push_back(model.predict(features_of(cache, id)));
    actual.push_back(label_for(labels, id));
  }
  return EvalReport::from_confusion(
      confusion_matrix(preds, actual, model.config().num_classes()));
}

FoldResult train_fold(const FeatureCache& cache, const LabelMap& labels,
                      const std::vector<std::string>& train_ids,
                      const std::vector<std::string>& val_ids,
                      const ModelConfig& model_cfg,
                      const TrainConfig& train_cfg, int fold_index) {
  train_cfg.validate();
  if (train_ids.empty() || val_ids.empty()) {
    throw TrainError("train_fold: empty train or validation split");
  }
  if (!train_cfg.freeze_backbones) {
    throw TrainError(
        "train_fold: backbone fine-tuning is not supported in this build; "
        "set freeze_backbones=true (desk-scale mode)");
  }

  const uint64_t fold_salt = static_cast<uint64_t>(fold_index);
  MultimodalModel model(model_cfg,
                        mix_seed(train_cfg.seed, 1000 + fold_salt));
  Adam adam;
  adam.lr = train_cfg.lr;
  adam.beta1 = train_cfg.adam_beta1;
  adam.beta2 = train_cfg.adam_beta2;
  adam.eps = train_cfg.adam_eps;
  Rng dropout_rng(mix_seed(train_cfg.seed, 2000 + fold_salt));

  const bool lower_is_better = train_cfg.monitor == "val_loss";
  double best_criterion = lower_is_better
                              ? std::numeric_limits<double>::infinity()
                              : -std::numeric_limits<double>::infinity();
  MultimodalModel best_model = model;
  TrainLog log;
  int stale = 0;

  std::vector<Param*> params = model.parameters();
  for (int epoch = 1; epoch <= train_cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();

    std::vector<std::string> order = train_ids;
    Rng shuffle_rng(
        mix_seed(train_cfg.seed,
                 3000 + fold_salt * 1009 + static_cast<uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    long seen = 0;
    for (size_t start = 0; start < order.size();
         start += train_cfg.batch_size) {
      const size_t end =
          std::min(order.size(), start + train_cfg.batch_size);
      std::vector<const EncodedFeatures*> batch;
      std::vector<int> batch_labels;
      for (size_t i = start; i < end; ++i) {
        batch.push_back(&features_of(cache, order[i]));
        batch_labels.push_back(label_for(labels, order[i]));
      }
      model.zero_grads();
      MultimodalModel::BatchStats stats =
          model.train_step(batch, batch_labels, dropout_rng);
      adam.step(params);
      epoch_loss += stats.loss * static_cast<double>(batch.size());
      seen += static_cast<long>(batch.size());
    }
    epoch_loss /= static_cast<double>(seen);

    EpochLog e;
    e.epoch = epoch;
    e.train_loss = epoch_loss;
    e.val_loss = evaluate_loss(model, cache, labels, val_ids);
    EvalReport val_report = evaluate_ids(model, cache, labels, val_ids);
    e.val_accuracy = val_report.accuracy;
    e.val_macro_f1 = val_report.macro_f1;
    e.wall_s = std::chrono::duration<double>(
                   std::chrono::steady_clock::now() - t0)
                   .count();
    log.epochs.push_back(e);

    const double criterion =
        lower_is_better ? e.val_loss : e.val_accuracy;
    const bool improved = lower_is_better ? criterion < best_criterion
                                          : criterion > best_criterion;
    if (improved) {
      best_criterion = criterion;
      best_model = model;
      log.best_epoch = epoch;
      stale = 0;
    } else {
      ++stale;
      if (stale >= train_cfg.patience) {
        log.stop_reason = "early_stop";
        break;
      }
    }
  }
  if (log.stop_reason.empty()) log.stop_reason = "max_epochs";

  return FoldResult{std::move(best_model), std::move(log)};
}

CrossValResult run_cross_validation(const std::vector<PostRecord>& records,
                                    const FoldPlan& plan,
                                    const ModelConfig& model_cfg,
                                    const TrainConfig& train_cfg,
                                    const FeatureCache& cache,
                                    int parallel_folds) {
  std::set<std::string> ids;
  for (const PostRecord& r : records) ids.insert(r.id);
  check_fold_plan(plan, ids);

  const LabelMap labels = label_map(records, model_cfg.task);
  const int k = plan.k;
  std::vector<std::optional<FoldResult>> results(k);
  std::vector<std::optional<EvalReport>> reports(k);
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto run_one = [&](int f) {
    try {
      FoldResult r =
          train_fold(cache, labels, plan.folds[f].train, plan.folds[f].val,
                     model_cfg, train_cfg, f);
      reports[f] = evaluate_ids(r.model, cache, labels, plan.folds[f].test);
      results[f] = std::move(r);
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!first_error) first_error = std::current_exception();
    }
  };

  if (parallel_folds <= 1) {
    for (int f = 0; f < k; ++f) run_one(f);
  } else {
    for (int base = 0; base < k; base += parallel_folds) {
      std::vector<std::thread> workers;
      for (int f = base; f < std::min(k, base + parallel_folds); ++f) {
        workers.emplace_back(run_one, f);
      }
      for (std::thread& w : workers) w.join();
    }
  }
  if (first_error) std::rethrow_exception(first_error);

  CrossValResult out;
  for (int f = 0; f < k; ++f) {
    out.folds.push_back(std::move(*results[f]));
    out.reports.push_back(std::move(*reports[f]));
  }
  out.aggregate = aggregate_folds(out.reports);
  return out;
}

}  // namespace semfuse
