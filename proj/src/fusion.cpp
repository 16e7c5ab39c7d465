#include "semfuse/fusion.hpp"

#include <unsupported/Eigen/FFT>

#include <complex>

namespace semfuse {

FusionKind fusion_kind_from(const std::string& name) {
  if (name == "concat") return FusionKind::Concat;
  if (name == "gated_mcb") return FusionKind::GatedMcb;
  if (name == "mfas") return FusionKind::Mfas;
  throw ConfigError("unknown fusion kind: " + name);
}

const char* fusion_kind_name(FusionKind k) {
  switch (k) {
    case FusionKind::Concat: return "concat";
    case FusionKind::GatedMcb: return "gated_mcb";
    case FusionKind::Mfas: return "mfas";
  }
  return "?";
}

CountSketchParams CountSketchParams::seeded(int input_dim, int sketch_dim,
                                            uint64_t seed) {
  if (input_dim < 1 || sketch_dim < 1) {
    throw ConfigError("count sketch dims must be positive");
  }
  CountSketchParams p;
  p.input_dim = input_dim;
  p.sketch_dim = sketch_dim;
  p.seed = seed;
  Rng rng(mix_seed(seed, 0x5ce7c));
  p.h.resize(input_dim);
  p.s.resize(input_dim);
  for (int i = 0; i < input_dim; ++i) {
    p.h[i] = static_cast<int>(rng.below(sketch_dim));
    p.s[i] = rng.sign();
  }
  return p;
}

Vec count_sketch(const Vec& x, const CountSketchParams& p) {
  if (x.size() != p.input_dim) {
    throw TrainError("count_sketch: dimension mismatch");
  }
  Vec out = Vec::Zero(p.sketch_dim);
  for (int i = 0; i < p.input_dim; ++i) {
    out[p.h[i]] += p.s[i] * x[i];
  }
  return out;
}

Vec count_sketch_backward(const Vec& d_out, const CountSketchParams& p) {
  if (d_out.size() != p.sketch_dim) {
    throw TrainError("count_sketch_backward: dimension mismatch");
  }
  Vec dx(p.input_dim);
  for (int i = 0; i < p.input_dim; ++i) {
    dx[i] = p.s[i] * d_out[p.h[i]];
  }
  return dx;
}

Vec circular_convolution(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) {
    throw TrainError("circular_convolution: dimension mismatch");
  }
  const int n = static_cast<int>(a.size());
  Eigen::FFT<double> fft;
  std::vector<double> av(a.data(), a.data() + n);
  std::vector<double> bv(b.data(), b.data() + n);
  std::vector<std::complex<double>> fa, fb;
  fft.fwd(fa, av);
  fft.fwd(fb, bv);
  for (int i = 0; i < n; ++i) fa[i] *= fb[i];
  std::vector<double> res;
  fft.inv(res, fa);
  return Eigen::Map<const Vec>(res.data(), n);
}

Vec circular_flip(const Vec& v) {
  const int n = static_cast<int>(v.size());
  Vec out(n);
  out[0] = v[0];
  for (int i = 1; i < n; ++i) out[i] = v[n - i];
  return out;
}

namespace {

Vec sigmoid_vec(const Vec& x) {
  Vec out(x.size());
  for (int i = 0; i < x.size(); ++i) out[i] = sigmoid(x[i]);
  return out;
}

void require_dim(const Vec& v, int dim, const char* what) {
  if (v.size() != dim) {
    throw TrainError(std::string(what) + ": expected dim " +
                     std::to_string(dim) + ", got " +
                     std::to_string(v.size()));
  }
}

}  // namespace

FusedRepr fuse_concat(const Vec& text, const Vec& image) {
  FusedRepr f;
  f.kind = FusionKind::Concat;
  f.values.resize(text.size() + image.size());
  f.values << text, image;
  return f;
}

FusedRepr fuse_gated_mcb(const Vec& text, const Vec& image,
                         const CountSketchParams& text_params,
                         const CountSketchParams& image_params) {
  if (text_params.sketch_dim != image_params.sketch_dim) {
    throw TrainError("fuse_gated_mcb: sketch dims differ");
  }
  Vec st = count_sketch(text, text_params);
  Vec si = count_sketch(image, image_params);
  FusedRepr f;
  f.kind = FusionKind::GatedMcb;
  f.values = sigmoid_vec(circular_convolution(st, si));
  return f;
}

FusedRepr fuse_mfas(const Vec& text_final, const Vec& text_inter,
                    const Vec& image_final, const Vec& image_inter) {
  Vec pre_inner(text_inter.size() + image_inter.size());
  pre_inner << text_inter, image_inter;
  Vec inner = sigmoid_vec(pre_inner);

  Vec pre(text_final.size() + image_final.size() + inner.size());
  pre << text_final, image_final, inner;
  FusedRepr f;
  f.kind = FusionKind::Mfas;
  f.values = sigmoid_vec(pre);
  return f;
}

Fusion::Fusion(FusionKind kind, int text_dim, int image_dim,
               int text_inter_dim, int image_inter_dim, uint64_t sketch_seed)
    : kind_(kind),
      text_dim_(text_dim),
      image_dim_(image_dim),
      text_inter_dim_(text_inter_dim),
      image_inter_dim_(image_inter_dim),
      sketch_seed_(sketch_seed) {
  switch (kind_) {
    case FusionKind::Concat:
      output_dim_ = text_dim_ + image_dim_;
      break;
    case FusionKind::GatedMcb:
      // Sketch dimension pinned to the concat size so |F| stays 1,536 at
      // standard dims.
      output_dim_ = text_dim_ + image_dim_;
      text_sketch_ = CountSketchParams::seeded(text_dim_, output_dim_,
                                               mix_seed(sketch_seed, 1));
      image_sketch_ = CountSketchParams::seeded(image_dim_, output_dim_,
                                                mix_seed(sketch_seed, 2));
      break;
    case FusionKind::Mfas:
      output_dim_ =
          text_dim_ + image_dim_ + text_inter_dim_ + image_inter_dim_;
      break;
  }
}

void Fusion::restore_sketches(CountSketchParams text, CountSketchParams image) {
  if (kind_ != FusionKind::GatedMcb) {
    throw ConfigError("sketch parameters only apply to gated_mcb fusion");
  }
  if (text.input_dim != text_dim_ || image.input_dim != image_dim_ ||
      text.sketch_dim != output_dim_ || image.sketch_dim != output_dim_) {
    throw ConfigError("restored sketch parameters have wrong dimensions");
  }
  text_sketch_ = std::move(text);
  image_sketch_ = std::move(image);
}

FusedRepr Fusion::forward(const FusionInputs& in, Context* ctx) const {
  require_dim(in.text_final, text_dim_, "fusion text input");
  require_dim(in.image_final, image_dim_, "fusion image input");
  FusedRepr f;
  switch (kind_) {
    case FusionKind::Concat: {
      f = fuse_concat(in.text_final, in.image_final);
      break;
    }
    case FusionKind::GatedMcb: {
      Vec st = count_sketch(in.text_final, *text_sketch_);
      Vec si = count_sketch(in.image_final, *image_sketch_);
      f.kind = FusionKind::GatedMcb;
      f.values = circular_convolution(st, si);
      for (int i = 0; i < f.values.size(); ++i) {
        f.values[i] = sigmoid(f.values[i]);
      }
      if (ctx) {
        ctx->sketch_text = std::move(st);
        ctx->sketch_image = std::move(si);
      }
      break;
    }
    case FusionKind::Mfas: {
      require_dim(in.text_inter, text_inter_dim_, "fusion text intermediate");
      require_dim(in.image_inter, image_inter_dim_,
                  "fusion image intermediate");
      f = fuse_mfas(in.text_final, in.text_inter, in.image_final,
                    in.image_inter);
      if (ctx) {
        ctx->inner = f.values.tail(text_inter_dim_ + image_inter_dim_);
      }
      break;
    }
  }
  if (f.dim() != output_dim_) {
    throw TrainError("fusion output dim violates the fusion-kind contract");
  }
  if (ctx) ctx->out = f.values;
  return f;
}

FusionGrads Fusion::backward(const FusionInputs& in, const Context& ctx,
                             const Vec& d_out) const {
  require_dim(d_out, output_dim_, "fusion gradient");
  FusionGrads g;
  g.text_inter = Vec::Zero(in.text_inter.size());
  g.image_inter = Vec::Zero(in.image_inter.size());
  switch (kind_) {
    case FusionKind::Concat: {
      g.text_final = d_out.head(text_dim_);
      g.image_final = d_out.tail(image_dim_);
      break;
    }
    case FusionKind::GatedMcb: {
      // d pre-sigmoid, then correlation against the opposite sketch.
      Vec dc = d_out.array() * ctx.out.array() * (1.0 - ctx.out.array());
      Vec d_st = circular_convolution(dc, circular_flip(ctx.sketch_image));
      Vec d_si = circular_convolution(dc, circular_flip(ctx.sketch_text));
      g.text_final = count_sketch_backward(d_st, *text_sketch_);
      g.image_final = count_sketch_backward(d_si, *image_sketch_);
      break;
    }
    case FusionKind::Mfas: {
      Vec dz = d_out.array() * ctx.out.array() * (1.0 - ctx.out.array());
      g.text_final = dz.head(text_dim_);
      g.image_final = dz.segment(text_dim_, image_dim_);
      Vec d_inner = dz.tail(text_inter_dim_ + image_inter_dim_);
      Vec d_pre_inner =
          d_inner.array() * ctx.inner.array() * (1.0 - ctx.inner.array());
      g.text_inter = d_pre_inner.head(text_inter_dim_);
      g.image_inter = d_pre_inner.tail(image_inter_dim_);
      break;
    }
  }
  return g;
}

}  // namespace semfuse
