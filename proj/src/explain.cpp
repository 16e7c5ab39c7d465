#include "semfuse/explain.hpp"

#include "semfuse/image.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

namespace semfuse {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Bilinear upsample with pixel-center alignment.
std::vector<double> upsample_bilinear(const std::vector<double>& src, int sh,
                                      int sw, int dh, int dw) {
  std::vector<double> dst(static_cast<size_t>(dh) * dw);
  const double sy = static_cast<double>(sh) / dh;
  const double sx = static_cast<double>(sw) / dw;
  for (int y = 0; y < dh; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(sh - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, sh - 1);
    const double wy = fy - y0;
    for (int x = 0; x < dw; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(sw - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, sw - 1);
      const double wx = fx - x0;
      const double v =
          (1 - wy) * ((1 - wx) * src[static_cast<size_t>(y0) * sw + x0] +
                      wx * src[static_cast<size_t>(y0) * sw + x1]) +
          wy * ((1 - wx) * src[static_cast<size_t>(y1) * sw + x0] +
                wx * src[static_cast<size_t>(y1) * sw + x1]);
      dst[static_cast<size_t>(y) * dw + x] = v;
    }
  }
  return dst;
}

}  // namespace

Heatmap cam_from_map(const FeatureMap& activations,
                     const FeatureMap& d_score) {
  if (activations.channels == 0 || activations.height == 0) {
    throw TrainError("grad_cam: backbone exposes no conv feature map");
  }
  if (activations.channels != d_score.channels ||
      activations.height != d_score.height ||
      activations.width != d_score.width) {
    throw TrainError("grad_cam: activation/gradient shape mismatch");
  }
  const int h = activations.height, w = activations.width;
  const double inv_hw = 1.0 / (static_cast<double>(h) * w);

  std::vector<double> cam(static_cast<size_t>(h) * w, 0.0);
  for (int c = 0; c < activations.channels; ++c) {
    double weight = 0.0;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) weight += d_score.at(c, y, x);
    }
    weight *= inv_hw;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        cam[static_cast<size_t>(y) * w + x] += weight * activations.at(c, y, x);
      }
    }
  }
  for (double& v : cam) v = std::max(0.0, v);

  Heatmap heat;
  heat.values =
      upsample_bilinear(cam, h, w, heat.height, heat.width);
  const double mx =
      *std::max_element(heat.values.begin(), heat.values.end());
  if (mx > 0.0) {
    for (double& v : heat.values) v /= mx;
  }
  return heat;
}

Heatmap grad_cam(const MultimodalModel& model, const ImageBackbone& backbone,
                 const ImageTensor& image, const Vec& text_final,
                 const Vec& text_intermediate, int target_class) {
  ImageFeatures feats = backbone.features(image);
  EncodedFeatures f;
  f.text_final = text_final;
  f.text_intermediate = text_intermediate;
  f.image_penultimate = feats.penultimate;
  f.image_intermediate = feats.intermediate;

  MultimodalModel::InputGrads grads =
      model.input_gradient_eval(f, target_class);

  // The penultimate vector is the global average pool of the last conv map,
  // so the gradient spreads uniformly over each channel's positions.
  const FeatureMap& a = feats.conv_map;
  FeatureMap d_score(a.channels, a.height, a.width);
  const double inv_hw = 1.0 / (static_cast<double>(a.height) * a.width);
  for (int c = 0; c < a.channels; ++c) {
    const double g = grads.d_image_penultimate[c] * inv_hw;
    for (int y = 0; y < a.height; ++y) {
      for (int x = 0; x < a.width; ++x) d_score.at(c, y, x) = g;
    }
  }
  return cam_from_map(a, d_score);
}

AttentionDump export_attention(const TextBackbone& backbone,
                               const TokenSequence& seq) {
  AttentionProbs probs = backbone.attention(seq);
  if (probs.per_head.empty()) {
    throw TrainError("export_attention: backbone has no attention maps");
  }
  AttentionDump dump;
  dump.tokens = seq.tokens;
  dump.heads = probs.heads;
  dump.weights = std::move(probs.per_head);
  const int L = seq.length();
  for (const Mat& m : dump.weights) {
    if (m.rows() != L || m.cols() != L) {
      throw TrainError("export_attention: attention/token misalignment");
    }
  }
  return dump;
}

json heatmap_to_json(const Heatmap& h) {
  json rows = json::array();
  for (int y = 0; y < h.height; ++y) {
    json row = json::array();
    for (int x = 0; x < h.width; ++x) {
      row.push_back(h.values[static_cast<size_t>(y) * h.width + x]);
    }
    rows.push_back(row);
  }
  return {{"height", h.height}, {"width", h.width}, {"values", rows}};
}

json attention_to_json(const AttentionDump& dump) {
  json heads = json::array();
  for (const Mat& m : dump.weights) {
    json rows = json::array();
    for (int r = 0; r < m.rows(); ++r) {
      json row = json::array();
      for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
      rows.push_back(row);
    }
    heads.push_back(rows);
  }
  return {{"tokens", dump.tokens}, {"heads", dump.heads}, {"weights", heads}};
}

void write_heatmap_files(const std::string& out_dir,
                         const std::string& post_id, const Heatmap& h) {
  fs::path dir(out_dir);
  write_png_gray((dir / (post_id + ".gradcam.png")).string(), h.values,
                 h.height, h.width);
  std::ofstream out(dir / (post_id + ".gradcam.json"));
  if (!out) throw DataError("cannot write gradcam json for " + post_id);
  out << heatmap_to_json(h).dump() << "\n";
}

void write_attention_file(const std::string& out_dir,
                          const std::string& post_id,
                          const AttentionDump& dump) {
  std::ofstream out(fs::path(out_dir) / (post_id + ".attention.json"));
  if (!out) throw DataError("cannot write attention json for " + post_id);
  out << attention_to_json(dump).dump() << "\n";
}

}  // namespace semfuse
