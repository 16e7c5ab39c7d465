#include "semfuse/image_backbone.hpp"

#include <filesystem>

namespace semfuse {

namespace fs = std::filesystem;

namespace {

ImageFeatures features_from(Cnn::Features&& f) {
  ImageFeatures out;
  out.penultimate = std::move(f.penultimate);
  out.intermediate = std::move(f.intermediate);
  out.conv_map = std::move(f.last);
  if (!all_finite(out.penultimate) || !all_finite(out.intermediate)) {
    throw TrainError("image encoder produced non-finite values");
  }
  return out;
}

std::vector<ConvSpec> standin_specs() {
  // 224 -> 28 -> 14 -> 7; block-2 stage carries 512 channels.
  return {
      {.in_channels = 3, .out_channels = 16, .kernel = 8, .stride = 8,
       .pad = 0, .relu = true},
      {.in_channels = 16, .out_channels = 512, .kernel = 3, .stride = 2,
       .pad = 1, .relu = true},
      {.in_channels = 512, .out_channels = 64, .kernel = 3, .stride = 2,
       .pad = 1, .relu = true},
  };
}

}  // namespace

StandinImageBackbone::StandinImageBackbone(uint64_t seed)
    : seed_(seed), cnn_(Cnn::seeded(standin_specs(), /*block2_layer=*/1,
                                    seed)) {}

ImageFeatures StandinImageBackbone::features(const ImageTensor& t) const {
  return features_from(cnn_.forward(t));
}

std::string StandinImageBackbone::id() const {
  return "standin:" + std::to_string(seed_);
}

CheckpointImageBackbone::CheckpointImageBackbone(const std::string& key,
                                                 const std::string& dir)
    : key_(key), cnn_(load_cnn((fs::path(dir) / "weights.bin").string())) {}

ImageFeatures CheckpointImageBackbone::features(const ImageTensor& t) const {
  return features_from(cnn_.forward(t));
}

std::shared_ptr<ImageBackbone> make_image_backbone(
    const std::string& key, uint64_t seed, const std::string& cache_dir) {
  if (key == "standin") {
    return std::make_shared<StandinImageBackbone>(seed);
  }
  if (key == "resnet152" || key == "densenet161") {
    if (cache_dir.empty()) {
      throw ConfigError("image backbone '" + key +
                        "' needs a checkpoint cache (set cache_dir or "
                        "SEMFUSE_CACHE)");
    }
    fs::path dir = fs::path(cache_dir) / key;
    if (!fs::exists(dir / "weights.bin")) {
      throw ConfigError("image backbone '" + key +
                        "': no converted checkpoint at " + dir.string());
    }
    return std::make_shared<CheckpointImageBackbone>(key, dir.string());
  }
  throw ConfigError("unknown image backbone: " + key);
}

}  // namespace semfuse
