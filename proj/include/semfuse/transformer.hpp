#pragma once

#include "semfuse/common.hpp"

#include <string>
#include <vector>

namespace semfuse {

struct TransformerConfig {
  int n_layers = 2;
  int n_heads = 12;
  int d_model = 768;
  int d_ff = 1536;
  int vocab_size = 8192;
  int max_positions = 512;
  bool layer_norm = true;
};

struct AttentionWeights {
  Mat wq, wk, wv, wo;  // d_model x d_model
  Vec bq, bk, bv, bo;
};

struct EncoderLayer {
  AttentionWeights att;
  Mat w1;  // d_ff x d_model
  Vec b1;
  Mat w2;  // d_model x d_ff
  Vec b2;
  Vec ln1_gamma, ln1_beta, ln2_gamma, ln2_beta;
};

/// Post-norm transformer encoder: x = LN1(x + MHA(x)); x = LN2(x + FFN(x)).
/// Deterministic; no dropout (backbones are frozen during desk-scale
/// training, so only the forward pass is needed).
class TransformerEncoder {
 public:
  TransformerConfig cfg;
  Mat tok_emb;  // d_model x vocab
  Mat pos_emb;  // d_model x max_positions
  std::vector<EncoderLayer> layers;

  static TransformerEncoder seeded(const TransformerConfig& cfg,
                                   uint64_t seed);

  struct Output {
    // CLS (position 0) state after each encoder layer.
    std::vector<Vec> cls_per_layer;
    // Last-layer attention probabilities, one L x L row-stochastic matrix
    // per head. Populated only when capture_attention is set.
    std::vector<Mat> last_attention;
  };

  Output forward(const std::vector<int>& token_ids,
                 bool capture_attention = false) const;
};

void save_transformer(const TransformerEncoder& enc, const std::string& path);
TransformerEncoder load_transformer(const std::string& path);

}  // namespace semfuse
