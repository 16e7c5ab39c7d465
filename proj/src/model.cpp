#include "semfuse/model.hpp"

#include "semfuse/tensor_io.hpp"

namespace semfuse {

using nlohmann::json;

TaskKind task_kind_from(const std::string& name) {
  if (name == "binary") return TaskKind::Binary;
  if (name == "multiclass") return TaskKind::Multiclass;
  throw ConfigError("unknown task: " + name);
}

const char* task_kind_name(TaskKind t) {
  return t == TaskKind::Binary ? "binary" : "multiclass";
}

json ModelConfig::to_json() const {
  return {{"fusion", fusion_kind_name(fusion)},
          {"task", task_kind_name(task)},
          {"dropout_p", dropout_p},
          {"batch_norm", batch_norm},
          {"reconstruct_pre_norm", reconstruct_pre_norm},
          {"projection_relu", projection_relu},
          {"text_dim", text_dim},
          {"image_penultimate_dim", image_penultimate_dim},
          {"image_final_dim", image_final_dim},
          {"image_inter_dim", image_inter_dim},
          {"enc_hidden", enc_hidden},
          {"joint_dim", joint_dim},
          {"dec_hidden", dec_hidden},
          {"clf_hidden", clf_hidden}};
}

ModelConfig ModelConfig::from_json(const json& j) {
  ModelConfig c;
  c.fusion = fusion_kind_from(j.at("fusion").get<std::string>());
  c.task = task_kind_from(j.at("task").get<std::string>());
  c.dropout_p = j.at("dropout_p").get<double>();
  c.batch_norm = j.at("batch_norm").get<bool>();
  c.reconstruct_pre_norm = j.at("reconstruct_pre_norm").get<bool>();
  c.projection_relu = j.at("projection_relu").get<bool>();
  c.text_dim = j.at("text_dim").get<int>();
  c.image_penultimate_dim = j.at("image_penultimate_dim").get<int>();
  c.image_final_dim = j.at("image_final_dim").get<int>();
  c.image_inter_dim = j.at("image_inter_dim").get<int>();
  c.enc_hidden = j.at("enc_hidden").get<int>();
  c.joint_dim = j.at("joint_dim").get<int>();
  c.dec_hidden = j.at("dec_hidden").get<int>();
  c.clf_hidden = j.at("clf_hidden").get<int>();
  return c;
}

MultimodalModel::MultimodalModel(const ModelConfig& cfg, uint64_t seed)
    : cfg_(cfg),
      fusion_(cfg.fusion, cfg.text_dim, cfg.image_final_dim, cfg.text_dim,
              cfg.image_inter_dim, mix_seed(seed, 0x5ce7)) {
  Rng rng(mix_seed(seed, 0x30de1));
  img_proj_.init(cfg.image_final_dim, cfg.image_penultimate_dim, rng);
  const int fd = cfg.fused_dim();
  bn_enc_.init(fd);
  enc1_.init(cfg.enc_hidden, fd, rng);
  enc2_.init(cfg.joint_dim, cfg.enc_hidden, rng);
  dec1_.init(cfg.dec_hidden, cfg.joint_dim, rng);
  dec2_.init(fd, cfg.dec_hidden, rng);
  bn_clf_.init(cfg.joint_dim);
  clf1_.init(cfg.clf_hidden, cfg.joint_dim, rng);
  clf2_.init(cfg.num_classes(), cfg.clf_hidden, rng);
  drop_enc_.p = cfg.dropout_p;
  drop_dec_.p = cfg.dropout_p;
  drop_clf_.p = cfg.dropout_p;
}

Vec MultimodalModel::image_repr(const Vec& penultimate) const {
  if (penultimate.size() != cfg_.image_penultimate_dim) {
    throw TrainError("image_repr: penultimate dim mismatch");
  }
  Vec out = img_proj_.forward(penultimate);
  if (cfg_.projection_relu) out = out.cwiseMax(0.0);
  return out;
}

FusionInputs MultimodalModel::fusion_inputs(const EncodedFeatures& f) const {
  FusionInputs in;
  in.text_final = f.text_final;
  in.text_inter = f.text_intermediate;
  in.image_final = image_repr(f.image_penultimate);
  in.image_inter = f.image_intermediate;
  return in;
}

FusedRepr MultimodalModel::fuse(const EncodedFeatures& f) const {
  return fusion_.forward(fusion_inputs(f));
}

Vec MultimodalModel::joint_encode(const Vec& fused) const {
  if (fused.size() != cfg_.fused_dim()) {
    throw TrainError("joint_encode: fused dim mismatch");
  }
  Vec x = cfg_.batch_norm ? bn_enc_.forward_eval(fused) : fused;
  Vec h = enc1_.forward(x).cwiseMax(0.0);
  return enc2_.forward(h);
}

Vec MultimodalModel::joint_decode(const Vec& joint) const {
  if (joint.size() != cfg_.joint_dim) {
    throw TrainError("joint_decode: joint dim mismatch");
  }
  Vec h = dec1_.forward(joint).cwiseMax(0.0);
  return dec2_.forward(h);
}

Vec MultimodalModel::classifier_logits(const Vec& joint) const {
  if (joint.size() != cfg_.joint_dim) {
    throw TrainError("classify: joint dim mismatch");
  }
  Vec x = cfg_.batch_norm ? bn_clf_.forward_eval(joint) : joint;
  Vec h = clf1_.forward(x).cwiseMax(0.0);
  return clf2_.forward(h);
}

Vec MultimodalModel::classify(const Vec& joint) const {
  return log_softmax(classifier_logits(joint));
}

double MultimodalModel::combined_loss(const Vec& fused,
                                      const Vec& reconstructed,
                                      const Vec& log_probs, int label) {
  if (fused.size() != reconstructed.size()) {
    throw TrainError("combined_loss: reconstruction dim mismatch");
  }
  if (label < 0 || label >= log_probs.size()) {
    throw TrainError("combined_loss: label out of range");
  }
  const double mse = (fused - reconstructed).squaredNorm() /
                     static_cast<double>(fused.size());
  return mse - log_probs[label];
}

MultimodalModel::EvalOut MultimodalModel::forward_eval(
    const EncodedFeatures& f) const {
  EvalOut out;
  out.fused = fuse(f).values;
  out.joint = joint_encode(out.fused);
  out.recon = joint_decode(out.joint);
  out.log_probs = classify(out.joint);
  return out;
}

int MultimodalModel::predict(const EncodedFeatures& f) const {
  Vec lp = classify(joint_encode(fuse(f).values));
  int best = 0;
  for (int c = 1; c < lp.size(); ++c) {
    if (lp[c] > lp[best]) best = c;  // ties resolve to the lower index
  }
  return best;
}

Vec MultimodalModel::joint_encode_backward_input(const Vec& fused,
                                                 const Vec& d_joint) const {
  Vec x = cfg_.batch_norm ? bn_enc_.forward_eval(fused) : fused;
  Vec h_pre = enc1_.forward(x);
  Vec dh = enc2_.backward_input(d_joint);
  Vec dh_pre = (h_pre.array() > 0.0).cast<double>() * dh.array();
  Vec dx = enc1_.backward_input(dh_pre);
  if (cfg_.batch_norm) dx = bn_enc_.backward_input_eval(dx);
  return dx;
}

Vec MultimodalModel::joint_decode_backward_input(const Vec& joint,
                                                 const Vec& d_recon) const {
  Vec h_pre = dec1_.forward(joint);
  Vec dh = dec2_.backward_input(d_recon);
  Vec dh_pre = (h_pre.array() > 0.0).cast<double>() * dh.array();
  return dec1_.backward_input(dh_pre);
}

Vec MultimodalModel::classify_backward_input(const Vec& joint,
                                             const Vec& d_log_probs) const {
  Vec x = cfg_.batch_norm ? bn_clf_.forward_eval(joint) : joint;
  Vec h_pre = clf1_.forward(x);
  Vec h = h_pre.cwiseMax(0.0);
  Vec logits = clf2_.forward(h);
  Vec lp = log_softmax(logits);
  // log-softmax backward: dlogits = dlp - softmax * sum(dlp)
  Vec d_logits = d_log_probs.array() -
                 lp.array().exp() * d_log_probs.sum();
  Vec dh = clf2_.backward_input(d_logits);
  Vec dh_pre = (h_pre.array() > 0.0).cast<double>() * dh.array();
  Vec dx = clf1_.backward_input(dh_pre);
  if (cfg_.batch_norm) dx = bn_clf_.backward_input_eval(dx);
  return dx;
}

MultimodalModel::InputGrads MultimodalModel::input_gradient_eval(
    const EncodedFeatures& f, int target_class) const {
  if (target_class < 0 || target_class >= cfg_.num_classes()) {
    throw TrainError("input_gradient_eval: class index out of range");
  }
  FusionInputs in = fusion_inputs(f);
  Fusion::Context fctx;
  FusedRepr fused = fusion_.forward(in, &fctx);
  Vec joint = joint_encode(fused.values);

  // d(logit_target)/dJ through the classifier head.
  Vec x = cfg_.batch_norm ? bn_clf_.forward_eval(joint) : joint;
  Vec h_pre = clf1_.forward(x);
  Vec h = h_pre.cwiseMax(0.0);
  Vec d_logits = Vec::Zero(cfg_.num_classes());
  d_logits[target_class] = 1.0;
  Vec dh = clf2_.backward_input(d_logits);
  Vec dh_pre = (h_pre.array() > 0.0).cast<double>() * dh.array();
  Vec d_joint = clf1_.backward_input(dh_pre);
  if (cfg_.batch_norm) d_joint = bn_clf_.backward_input_eval(d_joint);

  Vec d_fused = joint_encode_backward_input(fused.values, d_joint);
  FusionGrads fg = fusion_.backward(in, fctx, d_fused);

  InputGrads out;
  Vec d_image = fg.image_final;
  if (cfg_.projection_relu) {
    Vec pre = img_proj_.forward(f.image_penultimate);
    d_image = (pre.array() > 0.0).cast<double>() * d_image.array();
  }
  out.d_image_penultimate = img_proj_.backward_input(d_image);
  out.d_image_intermediate = fg.image_inter;
  return out;
}

MultimodalModel::BatchStats MultimodalModel::train_step(
    const std::vector<const EncodedFeatures*>& batch,
    const std::vector<int>& labels, Rng& dropout_rng) {
  const int B = static_cast<int>(batch.size());
  if (B == 0) throw TrainError("train_step: empty batch");
  if (labels.size() != batch.size()) {
    throw TrainError("train_step: labels/batch size mismatch");
  }
  const int fd = cfg_.fused_dim();
  const int C = cfg_.num_classes();
  for (int label : labels) {
    if (label < 0 || label >= C) {
      throw TrainError("train_step: label out of range");
    }
  }

  // Image projection.
  Mat pen(cfg_.image_penultimate_dim, B);
  for (int b = 0; b < B; ++b) pen.col(b) = batch[b]->image_penultimate;
  Mat i_pre = img_proj_.forward(pen);
  Mat i_act = cfg_.projection_relu ? relu(i_pre) : i_pre;

  // Fusion per sample.
  std::vector<FusionInputs> inputs(B);
  std::vector<Fusion::Context> fctx(B);
  Mat fused(fd, B);
  for (int b = 0; b < B; ++b) {
    inputs[b].text_final = batch[b]->text_final;
    inputs[b].text_inter = batch[b]->text_intermediate;
    inputs[b].image_final = i_act.col(b);
    inputs[b].image_inter = batch[b]->image_intermediate;
    fused.col(b) = fusion_.forward(inputs[b], &fctx[b]).values;
  }

  // Joint encoder.
  BatchNorm::Ctx bn_enc_ctx;
  Mat x = cfg_.batch_norm ? bn_enc_.forward_train(fused, bn_enc_ctx) : fused;
  Mat h1_pre = enc1_.forward(x);
  Mat h1 = relu(h1_pre);
  Mat h1d = drop_enc_.forward_train(h1, dropout_rng);
  Mat joint = enc2_.forward(h1d);

  // Decoder.
  Mat d1_pre = dec1_.forward(joint);
  Mat d1 = relu(d1_pre);
  Mat d1d = drop_dec_.forward_train(d1, dropout_rng);
  Mat recon = dec2_.forward(d1d);

  // Classifier.
  BatchNorm::Ctx bn_clf_ctx;
  Mat c0 = cfg_.batch_norm ? bn_clf_.forward_train(joint, bn_clf_ctx) : joint;
  Mat c1_pre = clf1_.forward(c0);
  Mat c1 = relu(c1_pre);
  Mat c1d = drop_clf_.forward_train(c1, dropout_rng);
  Mat logits = clf2_.forward(c1d);
  Mat lp = log_softmax(logits);

  const Mat& target = cfg_.reconstruct_pre_norm ? fused : x;

  BatchStats stats;
  for (int b = 0; b < B; ++b) {
    stats.recon_mse += (target.col(b) - recon.col(b)).squaredNorm() / fd;
    stats.nll -= lp(labels[b], b);
  }
  stats.recon_mse /= B;
  stats.nll /= B;
  stats.loss = stats.recon_mse + stats.nll;
  if (!std::isfinite(stats.loss)) {
    throw TrainError("train_step: non-finite loss");
  }

  // ---- backward ----
  Mat d_logits = lp.array().exp();
  for (int b = 0; b < B; ++b) d_logits(labels[b], b) -= 1.0;
  d_logits /= static_cast<double>(B);

  Mat dc1d = clf2_.backward(c1d, d_logits);
  Mat dc1 = drop_clf_.backward(dc1d);
  Mat dc1_pre = relu_backward(c1_pre, dc1);
  Mat dc0 = clf1_.backward(c0, dc1_pre);
  Mat d_joint =
      cfg_.batch_norm ? bn_clf_.backward(bn_clf_ctx, dc0) : dc0;

  Mat d_recon = (2.0 / (static_cast<double>(fd) * B)) * (recon - target);
  Mat dd1d = dec2_.backward(d1d, d_recon);
  Mat dd1 = drop_dec_.backward(dd1d);
  Mat dd1_pre = relu_backward(d1_pre, dd1);
  d_joint += dec1_.backward(joint, dd1_pre);

  Mat dh1d = enc2_.backward(h1d, d_joint);
  Mat dh1 = drop_enc_.backward(dh1d);
  Mat dh1_pre = relu_backward(h1_pre, dh1);
  Mat dx = enc1_.backward(x, dh1_pre);

  Mat d_target = -d_recon;  // direct MSE pull on the reconstruction target
  Mat d_fused;
  if (cfg_.batch_norm) {
    if (!cfg_.reconstruct_pre_norm) dx += d_target;
    d_fused = bn_enc_.backward(bn_enc_ctx, dx);
    if (cfg_.reconstruct_pre_norm) d_fused += d_target;
  } else {
    d_fused = dx + d_target;
  }

  Mat d_image(cfg_.image_final_dim, B);
  for (int b = 0; b < B; ++b) {
    FusionGrads g = fusion_.backward(inputs[b], fctx[b], d_fused.col(b));
    d_image.col(b) = g.image_final;
  }
  Mat d_i_pre =
      cfg_.projection_relu ? relu_backward(i_pre, d_image) : d_image;
  img_proj_.backward(pen, d_i_pre);

  return stats;
}

std::vector<Param*> MultimodalModel::parameters() {
  std::vector<Param*> ps = {&img_proj_.w, &img_proj_.b, &enc1_.w, &enc1_.b,
                            &enc2_.w,     &enc2_.b,     &dec1_.w, &dec1_.b,
                            &dec2_.w,     &dec2_.b,     &clf1_.w, &clf1_.b,
                            &clf2_.w,     &clf2_.b};
  if (cfg_.batch_norm) {
    ps.push_back(&bn_enc_.gamma);
    ps.push_back(&bn_enc_.beta);
    ps.push_back(&bn_clf_.gamma);
    ps.push_back(&bn_clf_.beta);
  }
  return ps;
}

void MultimodalModel::zero_grads() {
  for (Param* p : parameters()) p->zero_grad();
}

void MultimodalModel::save(const std::string& path,
                           const json& extra_meta) const {
  TensorFile f;
  f.meta = {{"kind", "semfuse_model"}, {"model", cfg_.to_json()}};
  for (auto& [k, v] : extra_meta.items()) f.meta[k] = v;

  f.add("img_proj.w", img_proj_.w.value);
  f.add("img_proj.b", img_proj_.b.value);
  f.add("enc1.w", enc1_.w.value);
  f.add("enc1.b", enc1_.b.value);
  f.add("enc2.w", enc2_.w.value);
  f.add("enc2.b", enc2_.b.value);
  f.add("dec1.w", dec1_.w.value);
  f.add("dec1.b", dec1_.b.value);
  f.add("dec2.w", dec2_.w.value);
  f.add("dec2.b", dec2_.b.value);
  f.add("clf1.w", clf1_.w.value);
  f.add("clf1.b", clf1_.b.value);
  f.add("clf2.w", clf2_.w.value);
  f.add("clf2.b", clf2_.b.value);
  f.add("bn_enc.gamma", bn_enc_.gamma.value);
  f.add("bn_enc.beta", bn_enc_.beta.value);
  f.add("bn_enc.mean", bn_enc_.running_mean);
  f.add("bn_enc.var", bn_enc_.running_var);
  f.add("bn_clf.gamma", bn_clf_.gamma.value);
  f.add("bn_clf.beta", bn_clf_.beta.value);
  f.add("bn_clf.mean", bn_clf_.running_mean);
  f.add("bn_clf.var", bn_clf_.running_var);

  f.meta["sketch_seed"] = fusion_.sketch_seed();
  if (fusion_.kind() == FusionKind::GatedMcb) {
    const CountSketchParams& st = *fusion_.text_sketch();
    const CountSketchParams& si = *fusion_.image_sketch();
    f.add("sketch.text.h", std::vector<int64_t>(st.h.begin(), st.h.end()));
    f.add("sketch.image.h", std::vector<int64_t>(si.h.begin(), si.h.end()));
    f.add("sketch.text.s", Vec(Eigen::Map<const Vec>(st.s.data(),
                                                     st.s.size())));
    f.add("sketch.image.s", Vec(Eigen::Map<const Vec>(si.s.data(),
                                                      si.s.size())));
    f.meta["sketch_text_seed"] = st.seed;
    f.meta["sketch_image_seed"] = si.seed;
  }
  f.save(path);
}

MultimodalModel MultimodalModel::load(const std::string& path,
                                      json* meta_out) {
  TensorFile f = TensorFile::load(path);
  if (f.meta.value("kind", "") != "semfuse_model") {
    throw DataError("not a model checkpoint: " + path);
  }
  ModelConfig cfg = ModelConfig::from_json(f.meta.at("model"));
  MultimodalModel m(cfg, /*seed=*/0);

  auto load_dense = [&f](Dense& d, const std::string& p) {
    d.w.value = f.mat(p + ".w");
    d.b.value = f.mat(p + ".b");
  };
  load_dense(m.img_proj_, "img_proj");
  load_dense(m.enc1_, "enc1");
  load_dense(m.enc2_, "enc2");
  load_dense(m.dec1_, "dec1");
  load_dense(m.dec2_, "dec2");
  load_dense(m.clf1_, "clf1");
  load_dense(m.clf2_, "clf2");
  m.bn_enc_.gamma.value = f.mat("bn_enc.gamma");
  m.bn_enc_.beta.value = f.mat("bn_enc.beta");
  m.bn_enc_.running_mean = f.vec("bn_enc.mean");
  m.bn_enc_.running_var = f.vec("bn_enc.var");
  m.bn_clf_.gamma.value = f.mat("bn_clf.gamma");
  m.bn_clf_.beta.value = f.mat("bn_clf.beta");
  m.bn_clf_.running_mean = f.vec("bn_clf.mean");
  m.bn_clf_.running_var = f.vec("bn_clf.var");

  if (cfg.fusion == FusionKind::GatedMcb) {
    auto restore = [&f](const std::string& p, int input_dim, int sketch_dim,
                        uint64_t seed) {
      CountSketchParams cs;
      cs.input_dim = input_dim;
      cs.sketch_dim = sketch_dim;
      cs.seed = seed;
      const auto& h = f.int_array(p + ".h");
      cs.h.assign(h.begin(), h.end());
      Vec s = f.vec(p + ".s");
      cs.s.assign(s.data(), s.data() + s.size());
      if (static_cast<int>(cs.h.size()) != input_dim ||
          static_cast<int>(cs.s.size()) != input_dim) {
        throw DataError("checkpoint sketch parameters are malformed");
      }
      return cs;
    };
    const int fd = cfg.fused_dim();
    m.fusion_.restore_sketches(
        restore("sketch.text", cfg.text_dim, fd,
                f.meta.value("sketch_text_seed", 0ULL)),
        restore("sketch.image", cfg.image_final_dim, fd,
                f.meta.value("sketch_image_seed", 0ULL)));
  }
  if (meta_out) *meta_out = f.meta;
  return m;
}

}  // namespace semfuse
