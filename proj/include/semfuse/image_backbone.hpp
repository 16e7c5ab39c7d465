#pragma once

#include "semfuse/cnn.hpp"
#include "semfuse/common.hpp"
#include "semfuse/image.hpp"

#include <memory>
#include <string>

namespace semfuse {

/// Backbone outputs before the trainable projection: the penultimate
/// (globally pooled last conv) vector, the pooled block-2 intermediate, and
/// the last conv map kept for class-activation heatmaps.
struct ImageFeatures {
  Vec penultimate;
  Vec intermediate;
  FeatureMap conv_map;
};

class ImageBackbone {
 public:
  virtual ~ImageBackbone() = default;

  virtual ImageFeatures features(const ImageTensor& t) const = 0;
  virtual int penultimate_dim() const = 0;
  virtual int intermediate_dim() const = 0;
  virtual std::string id() const = 0;
};

/// Deterministic seed-initialized three-stage CNN with a 512-channel block-2
/// stage, mirroring the ResNet-152 block-2 width.
class StandinImageBackbone : public ImageBackbone {
 public:
  explicit StandinImageBackbone(uint64_t seed);

  ImageFeatures features(const ImageTensor& t) const override;
  int penultimate_dim() const override { return cnn_.penultimate_dim(); }
  int intermediate_dim() const override { return cnn_.intermediate_dim(); }
  std::string id() const override;

  const Cnn& cnn() const { return cnn_; }

 private:
  uint64_t seed_;
  Cnn cnn_;
};

/// CNN loaded from a converted checkpoint (<dir>/weights.bin).
class CheckpointImageBackbone : public ImageBackbone {
 public:
  CheckpointImageBackbone(const std::string& key, const std::string& dir);

  ImageFeatures features(const ImageTensor& t) const override;
  int penultimate_dim() const override { return cnn_.penultimate_dim(); }
  int intermediate_dim() const override { return cnn_.intermediate_dim(); }
  std::string id() const override { return key_; }

 private:
  std::string key_;
  Cnn cnn_;
};

std::shared_ptr<ImageBackbone> make_image_backbone(const std::string& key,
                                                   uint64_t seed,
                                                   const std::string& cache_dir);

}  // namespace semfuse
