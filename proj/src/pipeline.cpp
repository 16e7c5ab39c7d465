#include "semfuse/pipeline.hpp"

#include <cstdlib>
#include <filesystem>

namespace semfuse {

namespace fs = std::filesystem;

PipelineSettings pipeline_settings_from(const KVConfig& cfg) {
  PipelineSettings s;
  s.text_backbone_key = cfg.str("text_backbone");
  s.image_backbone_key = cfg.str("image_backbone");
  s.cache_dir = cfg.str("cache_dir");
  if (s.cache_dir.empty()) {
    if (const char* env = std::getenv("SEMFUSE_CACHE")) s.cache_dir = env;
  }
  s.text_seed = static_cast<uint64_t>(cfg.integer("text_seed"));
  s.image_seed = static_cast<uint64_t>(cfg.integer("image_seed"));
  s.max_len = static_cast<int>(cfg.integer("max_len"));
  s.truncation = truncation_policy_from(cfg.str("truncation"));
  s.norm = ImageNorm::from_strings(cfg.str("image_norm_mean"),
                                   cfg.str("image_norm_std"));
  s.augment = cfg.flag("augment");
  return s;
}

ModelConfig model_config_from(const KVConfig& cfg,
                              const ImageBackbone& image_backbone) {
  ModelConfig m;
  m.fusion = fusion_kind_from(cfg.str("fusion"));
  m.task = task_kind_from(cfg.str("task"));
  m.dropout_p = cfg.num("dropout");
  m.batch_norm = cfg.flag("batch_norm");
  m.reconstruct_pre_norm = cfg.str("reconstruct_target") == "pre_norm";
  if (cfg.str("reconstruct_target") != "pre_norm" &&
      cfg.str("reconstruct_target") != "post_norm") {
    throw ConfigError("reconstruct_target must be pre_norm or post_norm");
  }
  m.image_penultimate_dim = image_backbone.penultimate_dim();
  m.image_inter_dim = image_backbone.intermediate_dim();
  return m;
}

Pipeline Pipeline::from_settings(const PipelineSettings& settings) {
  Pipeline p;
  p.settings = settings;
  p.text = make_text_backbone(settings.text_backbone_key, settings.text_seed,
                              settings.cache_dir);
  p.image = make_image_backbone(settings.image_backbone_key,
                                settings.image_seed, settings.cache_dir);
  return p;
}

EncodedFeatures encode_record(const PostRecord& record,
                              const TextBackbone& text,
                              const ImageBackbone& image,
                              const std::string& image_root,
                              const PipelineSettings& settings,
                              bool train_mode, uint64_t aug_seed) {
  TokenSequence seq = build_joint_sequence(
      text.tokenizer(), clean_text(record.text), clean_text(record.ocr_text),
      settings.max_len, settings.truncation);
  TextRepr tr = text.encode(seq);

  fs::path img_path = fs::path(image_root) / record.image_path;
  RawImage raw = decode_image(img_path.string());
  ImageTensor tensor =
      preprocess_image(raw, train_mode, aug_seed, settings.norm);
  ImageFeatures imf = image.features(tensor);

  EncodedFeatures f;
  f.text_final = std::move(tr.final);
  f.text_intermediate = std::move(tr.intermediate);
  f.image_penultimate = std::move(imf.penultimate);
  f.image_intermediate = std::move(imf.intermediate);
  return f;
}

FeatureCache encode_records(const std::vector<PostRecord>& records,
                            const TextBackbone& text,
                            const ImageBackbone& image,
                            const std::string& image_root,
                            const PipelineSettings& settings) {
  FeatureCache cache;
  for (const PostRecord& r : records) {
    cache.emplace(r.id, encode_record(r, text, image, image_root, settings));
  }
  return cache;
}

}  // namespace semfuse
