#pragma once

#include "semfuse/common.hpp"
#include "semfuse/fusion.hpp"
#include "semfuse/layers.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace semfuse {

enum class TaskKind { Binary, Multiclass };

TaskKind task_kind_from(const std::string& name);
const char* task_kind_name(TaskKind t);

struct ModelConfig {
  FusionKind fusion = FusionKind::Mfas;
  TaskKind task = TaskKind::Binary;
  double dropout_p = 0.2;
  bool batch_norm = true;
  bool reconstruct_pre_norm = true;  // decoder target is the raw fused vector
  bool projection_relu = true;
  int text_dim = 768;
  int image_penultimate_dim = 64;  // backbone dependent
  int image_final_dim = 768;
  int image_inter_dim = 512;  // backbone dependent
  int enc_hidden = 768;
  int joint_dim = 384;
  int dec_hidden = 768;
  int clf_hidden = 128;

  int fused_dim() const {
    return fusion == FusionKind::Mfas
               ? text_dim + image_final_dim + text_dim + image_inter_dim
               : text_dim + image_final_dim;
  }
  int num_classes() const { return task == TaskKind::Binary ? 2 : 4; }

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

/// Frozen-backbone encoder outputs for one record.
struct EncodedFeatures {
  Vec text_final;          // 768
  Vec text_intermediate;   // 768
  Vec image_penultimate;   // backbone penultimate width
  Vec image_intermediate;  // pooled block-2 (512 for the stand-in)
};

/// Joint encoder (BN -> Dense -> ReLU -> Dense), decoder (Dense -> ReLU ->
/// Dense), classifier (BN -> Dense -> ReLU -> Dense -> log-softmax) over a
/// configured fusion. The image projection dense layer is owned here because
/// it trains with the heads.
class MultimodalModel {
 public:
  MultimodalModel(const ModelConfig& cfg, uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  Fusion& fusion() { return fusion_; }
  const Fusion& fusion() const { return fusion_; }
  Dense& image_projection() { return img_proj_; }

  // ---- evaluation-mode single-sample operations ----

  /// 768-d image representation: dense projection of the backbone
  /// penultimate vector (+ ReLU).
  Vec image_repr(const Vec& penultimate) const;

  FusionInputs fusion_inputs(const EncodedFeatures& f) const;
  FusedRepr fuse(const EncodedFeatures& f) const;

  Vec joint_encode(const Vec& fused) const;
  Vec joint_decode(const Vec& joint) const;
  /// Log-probabilities over the configured classes.
  Vec classify(const Vec& joint) const;
  Vec classifier_logits(const Vec& joint) const;

  /// mean_j (F_j - F_hat_j)^2 + (-log_probs[label])
  static double combined_loss(const Vec& fused, const Vec& reconstructed,
                              const Vec& log_probs, int label);

  struct EvalOut {
    Vec fused, joint, recon, log_probs;
  };
  EvalOut forward_eval(const EncodedFeatures& f) const;
  int predict(const EncodedFeatures& f) const;  // argmax, ties to lower index

  // ---- evaluation-mode input gradients (used by tests and grad-cam) ----

  Vec joint_encode_backward_input(const Vec& fused, const Vec& d_joint) const;
  Vec joint_decode_backward_input(const Vec& joint, const Vec& d_recon) const;
  Vec classify_backward_input(const Vec& joint, const Vec& d_log_probs) const;

  struct InputGrads {
    Vec d_image_penultimate;
    Vec d_image_intermediate;
  };
  /// d(classifier logit for target_class) / d(image backbone outputs),
  /// eval mode.
  InputGrads input_gradient_eval(const EncodedFeatures& f,
                                 int target_class) const;

  // ---- training ----

  struct BatchStats {
    double loss = 0.0, recon_mse = 0.0, nll = 0.0;
  };
  /// Forward + backward over one batch; accumulates parameter gradients.
  BatchStats train_step(const std::vector<const EncodedFeatures*>& batch,
                        const std::vector<int>& labels, Rng& dropout_rng);

  std::vector<Param*> parameters();
  void zero_grads();

  void save(const std::string& path, const nlohmann::json& extra_meta) const;
  static MultimodalModel load(const std::string& path,
                              nlohmann::json* meta_out = nullptr);

 private:
  ModelConfig cfg_;
  Dense img_proj_;
  Fusion fusion_;
  BatchNorm bn_enc_;
  Dense enc1_, enc2_;
  Dense dec1_, dec2_;
  BatchNorm bn_clf_;
  Dense clf1_, clf2_;
  Dropout drop_enc_, drop_dec_, drop_clf_;
};

}  // namespace semfuse
