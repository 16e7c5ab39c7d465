#pragma once

#include "semfuse/common.hpp"
#include "semfuse/text.hpp"
#include "semfuse/transformer.hpp"

#include <memory>
#include <string>

namespace semfuse {

/// Final (last-layer CLS) and intermediate-layer CLS representations.
struct TextRepr {
  Vec final;
  Vec intermediate;
};

/// Per-head last-layer attention probabilities.
struct AttentionProbs {
  int heads = 0;
  std::vector<Mat> per_head;  // each L x L, rows sum to 1
};

class TextBackbone {
 public:
  virtual ~TextBackbone() = default;

  virtual const Tokenizer& tokenizer() const = 0;
  virtual int dim() const = 0;
  virtual TextRepr encode(const TokenSequence& seq) const = 0;
  /// Throws TrainError for backbones without attention introspection.
  virtual AttentionProbs attention(const TokenSequence& seq) const = 0;
  virtual std::string id() const = 0;
};

/// Deterministic seed-initialized 2-layer, 768-d encoder used for tests and
/// desk-scale runs; no downloads needed.
class StandinTextBackbone : public TextBackbone {
 public:
  explicit StandinTextBackbone(uint64_t seed);

  const Tokenizer& tokenizer() const override { return tok_; }
  int dim() const override { return enc_.cfg.d_model; }
  TextRepr encode(const TokenSequence& seq) const override;
  AttentionProbs attention(const TokenSequence& seq) const override;
  std::string id() const override;

  const TransformerEncoder& encoder() const { return enc_; }

 private:
  uint64_t seed_;
  TransformerEncoder enc_;
  Tokenizer tok_;
};

/// Encoder loaded from a converted checkpoint directory
/// (<dir>/weights.bin + <dir>/vocab.txt).
class CheckpointTextBackbone : public TextBackbone {
 public:
  CheckpointTextBackbone(const std::string& key, const std::string& dir);

  const Tokenizer& tokenizer() const override { return tok_; }
  int dim() const override { return enc_.cfg.d_model; }
  TextRepr encode(const TokenSequence& seq) const override;
  AttentionProbs attention(const TokenSequence& seq) const override;
  std::string id() const override { return key_; }

 private:
  std::string key_;
  TransformerEncoder enc_;
  Tokenizer tok_;
};

/// Resolves a text_backbone config key. "standin" is self-contained;
/// "bert-base"/"roberta-base" require converted weights under
/// <cache_dir>/<key>/.
std::shared_ptr<TextBackbone> make_text_backbone(const std::string& key,
                                                 uint64_t seed,
                                                 const std::string& cache_dir);

/// The spec-level operation: final + intermediate CLS vectors.
TextRepr encode_text(const TokenSequence& seq, const TextBackbone& backbone);

}  // namespace semfuse
