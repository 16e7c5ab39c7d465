#include "semfuse/image.hpp"

#pragma GCC diagnostic push
#pragma GCC diagnostic ignored "-Wdeprecated-enum-enum-conversion"
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#pragma GCC diagnostic pop

#include <sstream>

namespace semfuse {

ImageNorm ImageNorm::from_strings(const std::string& mean_csv,
                                  const std::string& std_csv) {
  auto parse3 = [](const std::string& csv, const char* what) {
    std::array<double, 3> out{};
    std::stringstream ss(csv);
    std::string item;
    int i = 0;
    while (std::getline(ss, item, ',')) {
      if (i >= 3) throw ConfigError(std::string(what) + ": expected 3 values");
      out[i++] = std::stod(item);
    }
    if (i != 3) throw ConfigError(std::string(what) + ": expected 3 values");
    return out;
  };
  ImageNorm n;
  n.mean = parse3(mean_csv, "image_norm_mean");
  n.std = parse3(std_csv, "image_norm_std");
  for (double s : n.std) {
    if (s <= 0.0) throw ConfigError("image_norm_std must be positive");
  }
  return n;
}

namespace {

RawImage from_mat_rgb(const cv::Mat& rgb) {
  RawImage img;
  img.height = rgb.rows;
  img.width = rgb.cols;
  img.data.resize(static_cast<size_t>(rgb.rows) * rgb.cols * 3);
  for (int y = 0; y < rgb.rows; ++y) {
    const uint8_t* row = rgb.ptr<uint8_t>(y);
    std::copy(row, row + static_cast<size_t>(rgb.cols) * 3,
              img.data.begin() + static_cast<size_t>(y) * rgb.cols * 3);
  }
  return img;
}

cv::Mat to_mat(const RawImage& img) {
  cv::Mat m(img.height, img.width, CV_8UC3);
  for (int y = 0; y < img.height; ++y) {
    std::copy(img.data.begin() + static_cast<size_t>(y) * img.width * 3,
              img.data.begin() + static_cast<size_t>(y + 1) * img.width * 3,
              m.ptr<uint8_t>(y));
  }
  return m;
}

}  // namespace

RawImage decode_image(const std::string& path) {
  cv::Mat m = cv::imread(path, cv::IMREAD_UNCHANGED);
  if (m.empty()) throw DataError("cannot decode image: " + path);
  cv::Mat rgb;
  switch (m.channels()) {
    case 1: cv::cvtColor(m, rgb, cv::COLOR_GRAY2RGB); break;
    case 3: cv::cvtColor(m, rgb, cv::COLOR_BGR2RGB); break;
    case 4: cv::cvtColor(m, rgb, cv::COLOR_BGRA2RGB); break;
    default:
      throw DataError("unsupported channel count in image: " + path);
  }
  if (rgb.depth() != CV_8U) {
    cv::Mat tmp;
    rgb.convertTo(tmp, CV_8U);
    rgb = tmp;
  }
  return from_mat_rgb(rgb);
}

bool image_decodable(const std::string& path) {
  try {
    decode_image(path);
    return true;
  } catch (const DataError&) {
    return false;
  }
}

ImageTensor preprocess_image(const RawImage& image, bool train_mode,
                             uint64_t seed, const ImageNorm& norm) {
  if (image.height < 1 || image.width < 1 || image.data.empty()) {
    throw DataError("preprocess_image: empty image");
  }
  constexpr int kOut = ImageTensor::kSize;
  constexpr int kTrainResize = 256;

  cv::Mat src = to_mat(image);
  cv::Mat crop;
  bool flip = false;
  if (train_mode) {
    cv::Mat resized;
    cv::resize(src, resized, cv::Size(kTrainResize, kTrainResize), 0, 0,
               cv::INTER_LINEAR);
    Rng rng(mix_seed(seed, 0xc209));
    const int span = kTrainResize - kOut;
    const int dy = static_cast<int>(rng.below(span + 1));
    const int dx = static_cast<int>(rng.below(span + 1));
    flip = rng.uniform01() < 0.5;
    crop = resized(cv::Rect(dx, dy, kOut, kOut)).clone();
  } else {
    cv::resize(src, crop, cv::Size(kOut, kOut), 0, 0, cv::INTER_LINEAR);
  }
  if (flip) {
    cv::Mat flipped;
    cv::flip(crop, flipped, 1);
    crop = flipped;
  }

  ImageTensor t;
  t.data.resize(static_cast<size_t>(3) * kOut * kOut);
  for (int y = 0; y < kOut; ++y) {
    const uint8_t* row = crop.ptr<uint8_t>(y);
    for (int x = 0; x < kOut; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v = row[x * 3 + c] / 255.0;
        t.at(c, y, x) = (v - norm.mean[c]) / norm.std[c];
      }
    }
  }
  return t;
}

void write_png_gray(const std::string& path, const std::vector<double>& values,
                    int height, int width) {
  if (static_cast<size_t>(height) * width != values.size()) {
    throw DataError("write_png_gray: size mismatch");
  }
  cv::Mat m(height, width, CV_8UC1);
  for (int y = 0; y < height; ++y) {
    uint8_t* row = m.ptr<uint8_t>(y);
    for (int x = 0; x < width; ++x) {
      double v = values[static_cast<size_t>(y) * width + x];
      v = std::clamp(v, 0.0, 1.0);
      row[x] = static_cast<uint8_t>(std::lround(v * 255.0));
    }
  }
  if (!cv::imwrite(path, m)) {
    throw DataError("cannot write PNG: " + path);
  }
}

}  // namespace semfuse
