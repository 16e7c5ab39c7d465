#pragma once

#include "semfuse/common.hpp"

#include <optional>
#include <string>
#include <vector>

namespace semfuse {

enum class FusionKind { Concat, GatedMcb, Mfas };

FusionKind fusion_kind_from(const std::string& name);
const char* fusion_kind_name(FusionKind k);

/// Randomized hash/sign projection preserving inner products in expectation.
/// Fixed after construction; persisted in checkpoints.
struct CountSketchParams {
  int input_dim = 0;
  int sketch_dim = 0;
  std::vector<int> h;     // [input_dim] -> [sketch_dim]
  std::vector<double> s;  // [input_dim] -> {-1,+1}
  uint64_t seed = 0;

  static CountSketchParams seeded(int input_dim, int sketch_dim,
                                  uint64_t seed);
};

/// out[j] = sum_{i: h(i)=j} s(i) * x[i]
Vec count_sketch(const Vec& x, const CountSketchParams& p);
/// Adjoint: dL/dx[i] = s(i) * dout[h(i)]
Vec count_sketch_backward(const Vec& d_out, const CountSketchParams& p);

/// out[k] = sum_j a[j] * b[(k-j) mod D], computed in the frequency domain.
Vec circular_convolution(const Vec& a, const Vec& b);
/// flip(v)[i] = v[(-i) mod D]; circular correlation = convolution with flip.
Vec circular_flip(const Vec& v);

struct FusedRepr {
  FusionKind kind = FusionKind::Concat;
  Vec values;

  int dim() const { return static_cast<int>(values.size()); }
};

FusedRepr fuse_concat(const Vec& text, const Vec& image);

/// sigmoid(circular_convolution(sketch_t(text), sketch_i(image))); the two
/// sketch parameter sets are independent and share the sketch dimension.
FusedRepr fuse_gated_mcb(const Vec& text, const Vec& image,
                         const CountSketchParams& text_params,
                         const CountSketchParams& image_params);

/// Two-stage gating: inner = sigmoid([text_inter ; image_inter]);
/// out = sigmoid([text_final ; image_final ; inner]).
FusedRepr fuse_mfas(const Vec& text_final, const Vec& text_inter,
                    const Vec& image_final, const Vec& image_inter);

/// Fusion inputs/gradients grouped per sample.
struct FusionInputs {
  Vec text_final, text_inter, image_final, image_inter;
};

struct FusionGrads {
  Vec text_final, text_inter, image_final, image_inter;
};

/// Configured fusion operator with saved activations for backprop.
class Fusion {
 public:
  Fusion() = default;
  /// text_dim/image_dim are final dims; inter dims matter for MFAS only.
  Fusion(FusionKind kind, int text_dim, int image_dim, int text_inter_dim,
         int image_inter_dim, uint64_t sketch_seed);

  FusionKind kind() const { return kind_; }
  int output_dim() const { return output_dim_; }
  uint64_t sketch_seed() const { return sketch_seed_; }
  const std::optional<CountSketchParams>& text_sketch() const {
    return text_sketch_;
  }
  const std::optional<CountSketchParams>& image_sketch() const {
    return image_sketch_;
  }
  void restore_sketches(CountSketchParams text, CountSketchParams image);

  struct Context {
    Vec out;           // fused values (post-sigmoid where applicable)
    Vec inner;         // MFAS inner gate output
    Vec sketch_text;   // MCB sketches
    Vec sketch_image;
  };

  FusedRepr forward(const FusionInputs& in, Context* ctx = nullptr) const;
  FusionGrads backward(const FusionInputs& in, const Context& ctx,
                       const Vec& d_out) const;

 private:
  FusionKind kind_ = FusionKind::Concat;
  int text_dim_ = 0, image_dim_ = 0, text_inter_dim_ = 0, image_inter_dim_ = 0;
  int output_dim_ = 0;
  uint64_t sketch_seed_ = 0;
  std::optional<CountSketchParams> text_sketch_, image_sketch_;
};

}  // namespace semfuse
