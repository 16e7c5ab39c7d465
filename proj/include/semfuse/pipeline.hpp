#pragma once

#include "semfuse/config.hpp"
#include "semfuse/dataset.hpp"
#include "semfuse/image_backbone.hpp"
#include "semfuse/model.hpp"
#include "semfuse/text_backbone.hpp"

#include <map>
#include <memory>
#include <string>

namespace semfuse {

/// Encoder-side knobs resolved from config.
struct PipelineSettings {
  std::string text_backbone_key = "standin";
  std::string image_backbone_key = "standin";
  std::string cache_dir;  // resolved from config or $SEMFUSE_CACHE
  uint64_t text_seed = 101;
  uint64_t image_seed = 202;
  int max_len = 512;
  TruncationPolicy truncation = TruncationPolicy::PostFirst;
  ImageNorm norm;
  bool augment = false;
};

PipelineSettings pipeline_settings_from(const KVConfig& cfg);
ModelConfig model_config_from(const KVConfig& cfg,
                              const ImageBackbone& image_backbone);

/// Backbones plus settings; the trainable model is created per fold.
struct Pipeline {
  PipelineSettings settings;
  std::shared_ptr<TextBackbone> text;
  std::shared_ptr<ImageBackbone> image;

  static Pipeline from_settings(const PipelineSettings& settings);
};

/// Frozen-backbone encoding of one record. train_mode applies the seeded
/// image augmentation.
EncodedFeatures encode_record(const PostRecord& record,
                              const TextBackbone& text,
                              const ImageBackbone& image,
                              const std::string& image_root,
                              const PipelineSettings& settings,
                              bool train_mode = false, uint64_t aug_seed = 0);

using FeatureCache = std::map<std::string, EncodedFeatures>;

FeatureCache encode_records(const std::vector<PostRecord>& records,
                            const TextBackbone& text,
                            const ImageBackbone& image,
                            const std::string& image_root,
                            const PipelineSettings& settings);

}  // namespace semfuse
