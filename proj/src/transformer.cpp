#include "semfuse/transformer.hpp"

#include "semfuse/tensor_io.hpp"

#include <cmath>

namespace semfuse {

namespace {

Mat gaussian_mat(int rows, int cols, double stddev, Rng& rng) {
  Mat m(rows, cols);
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) {
      m(r, c) = stddev * rng.normal();
    }
  }
  return m;
}

// Layer norm over the feature dimension of each column.
void layer_norm_inplace(Mat& x, const Vec& gamma, const Vec& beta) {
  constexpr double kEps = 1e-5;
  for (int c = 0; c < x.cols(); ++c) {
    const double mean = x.col(c).mean();
    const double var = (x.col(c).array() - mean).square().mean();
    x.col(c) = (((x.col(c).array() - mean) / std::sqrt(var + kEps)) *
                gamma.array()) +
               beta.array();
  }
}

void softmax_rows_inplace(Mat& logits) {
  for (int r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    logits.row(r) = (logits.row(r).array() - mx).exp();
    logits.row(r) /= logits.row(r).sum();
  }
}

}  // namespace

TransformerEncoder TransformerEncoder::seeded(const TransformerConfig& cfg,
                                              uint64_t seed) {
  if (cfg.d_model % cfg.n_heads != 0) {
    throw ConfigError("d_model must be divisible by n_heads");
  }
  TransformerEncoder enc;
  enc.cfg = cfg;
  Rng rng(mix_seed(seed, 0x7e57));
  const double att_std = 1.0 / std::sqrt(static_cast<double>(cfg.d_model));
  enc.tok_emb = gaussian_mat(cfg.d_model, cfg.vocab_size, 0.1, rng);
  enc.pos_emb = gaussian_mat(cfg.d_model, cfg.max_positions, 0.1, rng);
  for (int l = 0; l < cfg.n_layers; ++l) {
    EncoderLayer layer;
    layer.att.wq = gaussian_mat(cfg.d_model, cfg.d_model, att_std, rng);
    layer.att.wk = gaussian_mat(cfg.d_model, cfg.d_model, att_std, rng);
    layer.att.wv = gaussian_mat(cfg.d_model, cfg.d_model, att_std, rng);
    layer.att.wo = gaussian_mat(cfg.d_model, cfg.d_model, att_std, rng);
    layer.att.bq = Vec::Zero(cfg.d_model);
    layer.att.bk = Vec::Zero(cfg.d_model);
    layer.att.bv = Vec::Zero(cfg.d_model);
    layer.att.bo = Vec::Zero(cfg.d_model);
    layer.w1 = gaussian_mat(cfg.d_ff, cfg.d_model,
                            std::sqrt(2.0 / cfg.d_model), rng);
    layer.b1 = Vec::Zero(cfg.d_ff);
    layer.w2 = gaussian_mat(cfg.d_model, cfg.d_ff,
                            1.0 / std::sqrt(static_cast<double>(cfg.d_ff)),
                            rng);
    layer.b2 = Vec::Zero(cfg.d_model);
    layer.ln1_gamma = Vec::Ones(cfg.d_model);
    layer.ln1_beta = Vec::Zero(cfg.d_model);
    layer.ln2_gamma = Vec::Ones(cfg.d_model);
    layer.ln2_beta = Vec::Zero(cfg.d_model);
    enc.layers.push_back(std::move(layer));
  }
  return enc;
}

TransformerEncoder::Output TransformerEncoder::forward(
    const std::vector<int>& token_ids, bool capture_attention) const {
  const int L = static_cast<int>(token_ids.size());
  if (L == 0) throw DataError("encode: empty token sequence");
  if (L > cfg.max_positions) {
    throw DataError("encode: sequence longer than max positions");
  }
  for (int id : token_ids) {
    if (id < 0 || id >= cfg.vocab_size) {
      throw DataError("encode: token id " + std::to_string(id) +
                      " outside vocabulary of size " +
                      std::to_string(cfg.vocab_size));
    }
  }

  const int d = cfg.d_model;
  const int dh = d / cfg.n_heads;
  Mat x(d, L);
  for (int i = 0; i < L; ++i) {
    x.col(i) = tok_emb.col(token_ids[i]) + pos_emb.col(i);
  }

  Output out;
  for (size_t li = 0; li < layers.size(); ++li) {
    const EncoderLayer& layer = layers[li];
    const bool last = li + 1 == layers.size();

    Mat q = (layer.att.wq * x).colwise() + layer.att.bq;
    Mat k = (layer.att.wk * x).colwise() + layer.att.bk;
    Mat v = (layer.att.wv * x).colwise() + layer.att.bv;

    Mat concat(d, L);
    for (int h = 0; h < cfg.n_heads; ++h) {
      auto qh = q.middleRows(h * dh, dh);
      auto kh = k.middleRows(h * dh, dh);
      auto vh = v.middleRows(h * dh, dh);
      Mat probs = (qh.transpose() * kh) / std::sqrt(static_cast<double>(dh));
      softmax_rows_inplace(probs);
      concat.middleRows(h * dh, dh) = vh * probs.transpose();
      if (last && capture_attention) out.last_attention.push_back(probs);
    }
    Mat attended = (layer.att.wo * concat).colwise() + layer.att.bo;

    x += attended;
    if (cfg.layer_norm) layer_norm_inplace(x, layer.ln1_gamma, layer.ln1_beta);

    Mat hidden = ((layer.w1 * x).colwise() + layer.b1).cwiseMax(0.0);
    Mat ffn = (layer.w2 * hidden).colwise() + layer.b2;
    x += ffn;
    if (cfg.layer_norm) layer_norm_inplace(x, layer.ln2_gamma, layer.ln2_beta);

    out.cls_per_layer.push_back(x.col(0));
  }
  return out;
}

void save_transformer(const TransformerEncoder& enc, const std::string& path) {
  TensorFile f;
  f.meta = {{"kind", "transformer"},
            {"n_layers", enc.cfg.n_layers},
            {"n_heads", enc.cfg.n_heads},
            {"d_model", enc.cfg.d_model},
            {"d_ff", enc.cfg.d_ff},
            {"vocab_size", enc.cfg.vocab_size},
            {"max_positions", enc.cfg.max_positions},
            {"layer_norm", enc.cfg.layer_norm}};
  f.add("tok_emb", enc.tok_emb);
  f.add("pos_emb", enc.pos_emb);
  for (size_t l = 0; l < enc.layers.size(); ++l) {
    const EncoderLayer& layer = enc.layers[l];
    const std::string p = "layer" + std::to_string(l) + ".";
    f.add(p + "wq", layer.att.wq);
    f.add(p + "wk", layer.att.wk);
    f.add(p + "wv", layer.att.wv);
    f.add(p + "wo", layer.att.wo);
    f.add(p + "bq", layer.att.bq);
    f.add(p + "bk", layer.att.bk);
    f.add(p + "bv", layer.att.bv);
    f.add(p + "bo", layer.att.bo);
    f.add(p + "w1", layer.w1);
    f.add(p + "b1", layer.b1);
    f.add(p + "w2", layer.w2);
    f.add(p + "b2", layer.b2);
    f.add(p + "ln1_gamma", layer.ln1_gamma);
    f.add(p + "ln1_beta", layer.ln1_beta);
    f.add(p + "ln2_gamma", layer.ln2_gamma);
    f.add(p + "ln2_beta", layer.ln2_beta);
  }
  f.save(path);
}

TransformerEncoder load_transformer(const std::string& path) {
  TensorFile f = TensorFile::load(path);
  if (f.meta.value("kind", "") != "transformer") {
    throw ConfigError("not a transformer checkpoint: " + path);
  }
  TransformerEncoder enc;
  enc.cfg.n_layers = f.meta.at("n_layers").get<int>();
  enc.cfg.n_heads = f.meta.at("n_heads").get<int>();
  enc.cfg.d_model = f.meta.at("d_model").get<int>();
  enc.cfg.d_ff = f.meta.at("d_ff").get<int>();
  enc.cfg.vocab_size = f.meta.at("vocab_size").get<int>();
  enc.cfg.max_positions = f.meta.at("max_positions").get<int>();
  enc.cfg.layer_norm = f.meta.at("layer_norm").get<bool>();
  enc.tok_emb = f.mat("tok_emb");
  enc.pos_emb = f.mat("pos_emb");
  for (int l = 0; l < enc.cfg.n_layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    EncoderLayer layer;
    layer.att.wq = f.mat(p + "wq");
    layer.att.wk = f.mat(p + "wk");
    layer.att.wv = f.mat(p + "wv");
    layer.att.wo = f.mat(p + "wo");
    layer.att.bq = f.vec(p + "bq");
    layer.att.bk = f.vec(p + "bk");
    layer.att.bv = f.vec(p + "bv");
    layer.att.bo = f.vec(p + "bo");
    layer.w1 = f.mat(p + "w1");
    layer.b1 = f.vec(p + "b1");
    layer.w2 = f.mat(p + "w2");
    layer.b2 = f.vec(p + "b2");
    layer.ln1_gamma = f.vec(p + "ln1_gamma");
    layer.ln1_beta = f.vec(p + "ln1_beta");
    layer.ln2_gamma = f.vec(p + "ln2_gamma");
    layer.ln2_beta = f.vec(p + "ln2_beta");
    enc.layers.push_back(std::move(layer));
  }
  return enc;
}

}  // namespace semfuse
