#pragma once

#include "semfuse/common.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace semfuse {

/// Decoded image, RGB8, HWC layout.
struct RawImage {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> data;  // height*width*3

  uint8_t at(int y, int x, int c) const {
    return data[(static_cast<size_t>(y) * width + x) * 3 + c];
  }
};

/// 224x224x3 channel-normalized tensor, CHW layout.
struct ImageTensor {
  static constexpr int kSize = 224;
  int channels = 3;
  int height = kSize;
  int width = kSize;
  std::vector<double> data;  // channels*height*width

  double at(int c, int y, int x) const {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
  double& at(int c, int y, int x) {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
};

/// Per-channel normalization constants (defaults: the conventional ImageNet
/// pretraining statistics, recorded in config for reproducibility).
struct ImageNorm {
  std::array<double, 3> mean{0.485, 0.456, 0.406};
  std::array<double, 3> std{0.229, 0.224, 0.225};

  static ImageNorm from_strings(const std::string& mean_csv,
                                const std::string& std_csv);
};

/// Decodes an image file (1/3/4 channels converted to RGB).
/// Throws DataError on failure.
RawImage decode_image(const std::string& path);

bool image_decodable(const std::string& path);

/// Resizes, normalizes and (in train mode) augments deterministically from
/// the seed: 256-resize, random 224-crop, random horizontal flip. Eval mode
/// is a plain 224-resize with no randomness.
ImageTensor preprocess_image(const RawImage& image, bool train_mode,
                             uint64_t seed, const ImageNorm& norm = {});

/// Writes values in [0,1] as an 8-bit grayscale PNG.
void write_png_gray(const std::string& path, const std::vector<double>& values,
                    int height, int width);

}  // namespace semfuse
