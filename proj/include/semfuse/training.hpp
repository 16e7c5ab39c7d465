#pragma once

#include "semfuse/config.hpp"
#include "semfuse/dataset.hpp"
#include "semfuse/evaluation.hpp"
#include "semfuse/model.hpp"
#include "semfuse/pipeline.hpp"

#include <json.hpp>

#include <map>
#include <string>
#include <vector>

namespace semfuse {

struct TrainConfig {
  double lr = 2e-6;
  int batch_size = 4;
  int max_epochs = 50;
  int patience = 5;
  std::string monitor = "val_loss";  // val_loss | val_accuracy
  uint64_t seed = 7;
  bool freeze_backbones = true;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
};

TrainConfig train_config_from(const KVConfig& cfg);

struct EpochLog {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  double val_macro_f1 = 0.0;
  double wall_s = 0.0;
};

struct TrainLog {
  std::vector<EpochLog> epochs;
  std::string stop_reason;  // "early_stop" | "max_epochs"
  int best_epoch = 0;
};

nlohmann::json trainlog_to_json(const TrainLog& log);

using LabelMap = std::map<std::string, int>;

LabelMap label_map(const std::vector<PostRecord>& records, TaskKind task);

/// Mean combined loss over a set of ids, eval mode.
double evaluate_loss(const MultimodalModel& model, const FeatureCache& cache,
                     const LabelMap& labels,
                     const std::vector<std::string>& ids);

EvalReport evaluate_ids(const MultimodalModel& model,
                        const FeatureCache& cache, const LabelMap& labels,
                        const std::vector<std::string>& ids);

struct FoldResult {
  MultimodalModel model;
  TrainLog log;
};

/// Trains fusion + heads on cached frozen-backbone features. Deterministic
/// given the seed: per-epoch data order, dropout masks and init all derive
/// from it. Returns the best-validation checkpoint.
FoldResult train_fold(const FeatureCache& cache, const LabelMap& labels,
                      const std::vector<std::string>& train_ids,
                      const std::vector<std::string>& val_ids,
                      const ModelConfig& model_cfg,
                      const TrainConfig& train_cfg, int fold_index = 0);

struct CrossValResult {
  std::vector<FoldResult> folds;
  std::vector<EvalReport> reports;
  AggregateReport aggregate;
};

/// One trained model + test-set report per fold. Folds share no mutable
/// state and may run on parallel workers.
CrossValResult run_cross_validation(const std::vector<PostRecord>& records,
                                    const FoldPlan& plan,
                                    const ModelConfig& model_cfg,
                                    const TrainConfig& train_cfg,
                                    const FeatureCache& cache,
                                    int parallel_folds = 1);

}  // namespace semfuse
