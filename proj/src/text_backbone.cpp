#include "semfuse/text_backbone.hpp"

#include <filesystem>

namespace semfuse {

namespace fs = std::filesystem;

namespace {

// Intermediate layer for two-path fusion: ceil(L/2), 1-indexed.
int intermediate_layer_index(int n_layers) { return (n_layers + 1) / 2 - 1; }

TextRepr repr_from(const TransformerEncoder::Output& out, int n_layers) {
  TextRepr r;
  r.final = out.cls_per_layer.back();
  r.intermediate = out.cls_per_layer[intermediate_layer_index(n_layers)];
  if (!all_finite(r.final) || !all_finite(r.intermediate)) {
    throw TrainError("text encoder produced non-finite values");
  }
  return r;
}

AttentionProbs attention_from(const TransformerEncoder::Output& out) {
  AttentionProbs a;
  a.per_head = out.last_attention;
  a.heads = static_cast<int>(a.per_head.size());
  return a;
}

}  // namespace

StandinTextBackbone::StandinTextBackbone(uint64_t seed)
    : seed_(seed),
      enc_(TransformerEncoder::seeded(TransformerConfig{}, seed)),
      tok_(Tokenizer::hashed(TransformerConfig{}.vocab_size)) {}

TextRepr StandinTextBackbone::encode(const TokenSequence& seq) const {
  return repr_from(enc_.forward(seq.ids), enc_.cfg.n_layers);
}

AttentionProbs StandinTextBackbone::attention(const TokenSequence& seq) const {
  return attention_from(enc_.forward(seq.ids, /*capture_attention=*/true));
}

std::string StandinTextBackbone::id() const {
  return "standin:" + std::to_string(seed_);
}

CheckpointTextBackbone::CheckpointTextBackbone(const std::string& key,
                                               const std::string& dir)
    : key_(key),
      enc_(load_transformer((fs::path(dir) / "weights.bin").string())),
      tok_(Tokenizer::from_vocab_file((fs::path(dir) / "vocab.txt").string())) {
  if (enc_.cfg.d_model != 768) {
    throw ConfigError("text backbone '" + key +
                      "' checkpoint must be 768-dimensional");
  }
  if (tok_.vocab_size() > enc_.cfg.vocab_size) {
    throw ConfigError("text backbone '" + key +
                      "' vocab exceeds embedding table");
  }
}

TextRepr CheckpointTextBackbone::encode(const TokenSequence& seq) const {
  return repr_from(enc_.forward(seq.ids), enc_.cfg.n_layers);
}

AttentionProbs CheckpointTextBackbone::attention(
    const TokenSequence& seq) const {
  return attention_from(enc_.forward(seq.ids, /*capture_attention=*/true));
}

std::shared_ptr<TextBackbone> make_text_backbone(const std::string& key,
                                                 uint64_t seed,
                                                 const std::string& cache_dir) {
  if (key == "standin") {
    return std::make_shared<StandinTextBackbone>(seed);
  }
  if (key == "bert-base" || key == "roberta-base") {
    if (cache_dir.empty()) {
      throw ConfigError("text backbone '" + key +
                        "' needs a checkpoint cache (set cache_dir or "
                        "SEMFUSE_CACHE)");
    }
    fs::path dir = fs::path(cache_dir) / key;
    if (!fs::exists(dir / "weights.bin")) {
      throw ConfigError("text backbone '" + key +
                        "': no converted checkpoint at " + dir.string());
    }
    return std::make_shared<CheckpointTextBackbone>(key, dir.string());
  }
  throw ConfigError("unknown text backbone: " + key);
}

TextRepr encode_text(const TokenSequence& seq, const TextBackbone& backbone) {
  return backbone.encode(seq);
}

}  // namespace semfuse
