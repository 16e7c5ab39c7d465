#pragma once

#include "semfuse/common.hpp"
#include "semfuse/image.hpp"

#include <string>
#include <vector>

namespace semfuse {

struct FeatureMap {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;  // CHW

  FeatureMap() = default;
  FeatureMap(int c, int h, int w)
      : channels(c), height(h), width(w),
        data(static_cast<size_t>(c) * h * w, 0.0) {}

  double at(int c, int y, int x) const {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
  double& at(int c, int y, int x) {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
};

struct ConvSpec {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 3;
  int stride = 1;
  int pad = 0;
  bool relu = true;
};

struct ConvLayer {
  ConvSpec spec;
  std::vector<double> weights;  // out*in*k*k
  std::vector<double> bias;     // out

  double w(int oc, int ic, int ky, int kx) const {
    return weights[((static_cast<size_t>(oc) * spec.in_channels + ic) *
                        spec.kernel +
                    ky) *
                       spec.kernel +
                   kx];
  }
  FeatureMap forward(const FeatureMap& in) const;
};

Vec global_avg_pool(const FeatureMap& m);

/// Plain feed-forward convolutional stack. One stage is designated "block 2"
/// (its globally pooled output is the intermediate representation); the last
/// stage's map feeds global pooling into the penultimate vector and is the
/// class-activation target.
class Cnn {
 public:
  std::vector<ConvLayer> layers;
  int block2_layer = 0;  // index into layers

  struct Features {
    FeatureMap last;      // last conv output (post-activation)
    Vec penultimate;      // global average pool of last
    Vec intermediate;     // global average pool of the block-2 map
  };

  Features forward(const ImageTensor& t) const;

  int penultimate_dim() const { return layers.back().spec.out_channels; }
  int intermediate_dim() const {
    return layers[block2_layer].spec.out_channels;
  }

  static Cnn seeded(const std::vector<ConvSpec>& specs, int block2_layer,
                    uint64_t seed);
};

void save_cnn(const Cnn& cnn, const std::string& path);
Cnn load_cnn(const std::string& path);

}  // namespace semfuse
