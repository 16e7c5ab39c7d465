#pragma once

#include "semfuse/cnn.hpp"
#include "semfuse/image_backbone.hpp"
#include "semfuse/model.hpp"
#include "semfuse/text_backbone.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace semfuse {

/// 224x224 non-negative class-activation map, max-normalized to 1 when
/// nonzero.
struct Heatmap {
  int height = ImageTensor::kSize;
  int width = ImageTensor::kSize;
  std::vector<double> values;
};

/// Core class-activation computation: channel weights are the spatial means
/// of d_score, the map is relu(sum_c w_c * A_c) bilinearly upsampled and
/// max-normalized.
Heatmap cam_from_map(const FeatureMap& activations, const FeatureMap& d_score);

/// GradCAM of the classifier logit for target_class with respect to the
/// backbone's last conv map, through fusion and the joint encoder.
Heatmap grad_cam(const MultimodalModel& model, const ImageBackbone& backbone,
                 const ImageTensor& image, const Vec& text_final,
                 const Vec& text_intermediate, int target_class);

/// Last-encoder-layer attention with aligned token strings.
struct AttentionDump {
  std::vector<std::string> tokens;
  int heads = 0;
  std::vector<Mat> weights;  // per head, L x L, rows sum to 1
};

AttentionDump export_attention(const TextBackbone& backbone,
                               const TokenSequence& seq);

nlohmann::json heatmap_to_json(const Heatmap& h);
nlohmann::json attention_to_json(const AttentionDump& dump);

/// Writes <post-id>.gradcam.png and <post-id>.gradcam.json under out_dir.
void write_heatmap_files(const std::string& out_dir,
                         const std::string& post_id, const Heatmap& h);
/// Writes <post-id>.attention.json under out_dir.
void write_attention_file(const std::string& out_dir,
                          const std::string& post_id,
                          const AttentionDump& dump);

}  // namespace semfuse
