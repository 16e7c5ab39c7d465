#include "semfuse/cnn.hpp"

#include "semfuse/tensor_io.hpp"

namespace semfuse {

FeatureMap ConvLayer::forward(const FeatureMap& in) const {
  if (in.channels != spec.in_channels) {
    throw TrainError("conv layer: channel mismatch");
  }
  const int oh = (in.height + 2 * spec.pad - spec.kernel) / spec.stride + 1;
  const int ow = (in.width + 2 * spec.pad - spec.kernel) / spec.stride + 1;
  if (oh < 1 || ow < 1) throw TrainError("conv layer: output collapses");

  FeatureMap out(spec.out_channels, oh, ow);
  for (int oc = 0; oc < spec.out_channels; ++oc) {
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        double acc = bias[oc];
        const int y0 = y * spec.stride - spec.pad;
        const int x0 = x * spec.stride - spec.pad;
        for (int ic = 0; ic < spec.in_channels; ++ic) {
          for (int ky = 0; ky < spec.kernel; ++ky) {
            const int iy = y0 + ky;
            if (iy < 0 || iy >= in.height) continue;
            for (int kx = 0; kx < spec.kernel; ++kx) {
              const int ix = x0 + kx;
              if (ix < 0 || ix >= in.width) continue;
              acc += w(oc, ic, ky, kx) * in.at(ic, iy, ix);
            }
          }
        }
        out.at(oc, y, x) = spec.relu ? std::max(0.0, acc) : acc;
      }
    }
  }
  return out;
}

Vec global_avg_pool(const FeatureMap& m) {
  Vec out(m.channels);
  const double inv = 1.0 / (static_cast<double>(m.height) * m.width);
  for (int c = 0; c < m.channels; ++c) {
    double acc = 0.0;
    for (int y = 0; y < m.height; ++y) {
      for (int x = 0; x < m.width; ++x) acc += m.at(c, y, x);
    }
    out[c] = acc * inv;
  }
  return out;
}

Cnn::Features Cnn::forward(const ImageTensor& t) const {
  FeatureMap in(t.channels, t.height, t.width);
  in.data = t.data;

  Features f;
  FeatureMap cur = std::move(in);
  for (size_t i = 0; i < layers.size(); ++i) {
    cur = layers[i].forward(cur);
    if (static_cast<int>(i) == block2_layer) {
      f.intermediate = global_avg_pool(cur);
    }
  }
  f.penultimate = global_avg_pool(cur);
  f.last = std::move(cur);
  return f;
}

Cnn Cnn::seeded(const std::vector<ConvSpec>& specs, int block2_layer,
                uint64_t seed) {
  if (specs.empty()) throw ConfigError("cnn: no layers");
  if (block2_layer < 0 || block2_layer >= static_cast<int>(specs.size())) {
    throw ConfigError("cnn: block2 layer out of range");
  }
  Cnn cnn;
  cnn.block2_layer = block2_layer;
  Rng rng(mix_seed(seed, 0xc44));
  for (const ConvSpec& spec : specs) {
    ConvLayer layer;
    layer.spec = spec;
    const size_t n = static_cast<size_t>(spec.out_channels) *
                     spec.in_channels * spec.kernel * spec.kernel;
    const double stddev =
        1.0 / std::sqrt(static_cast<double>(spec.in_channels) * spec.kernel *
                        spec.kernel);
    layer.weights.resize(n);
    for (double& w : layer.weights) w = stddev * rng.normal();
    layer.bias.assign(spec.out_channels, 0.0);
    cnn.layers.push_back(std::move(layer));
  }
  return cnn;
}

void save_cnn(const Cnn& cnn, const std::string& path) {
  TensorFile f;
  f.meta = {{"kind", "cnn"},
            {"n_layers", cnn.layers.size()},
            {"block2_layer", cnn.block2_layer}};
  std::vector<int64_t> shape;
  for (size_t i = 0; i < cnn.layers.size(); ++i) {
    const ConvLayer& l = cnn.layers[i];
    shape.insert(shape.end(),
                 {l.spec.in_channels, l.spec.out_channels, l.spec.kernel,
                  l.spec.stride, l.spec.pad, l.spec.relu ? 1 : 0});
    const std::string p = "conv" + std::to_string(i) + ".";
    Mat w(static_cast<long>(l.weights.size()), 1);
    for (size_t j = 0; j < l.weights.size(); ++j) w(j, 0) = l.weights[j];
    Mat b(static_cast<long>(l.bias.size()), 1);
    for (size_t j = 0; j < l.bias.size(); ++j) b(j, 0) = l.bias[j];
    f.add(p + "w", w);
    f.add(p + "b", b);
  }
  f.add("layer_specs", shape);
  f.save(path);
}

Cnn load_cnn(const std::string& path) {
  TensorFile f = TensorFile::load(path);
  if (f.meta.value("kind", "") != "cnn") {
    throw ConfigError("not a cnn checkpoint: " + path);
  }
  const int n_layers = f.meta.at("n_layers").get<int>();
  const std::vector<int64_t>& shape = f.int_array("layer_specs");
  if (static_cast<int>(shape.size()) != n_layers * 6) {
    throw DataError("cnn checkpoint: corrupt layer specs");
  }
  Cnn cnn;
  cnn.block2_layer = f.meta.at("block2_layer").get<int>();
  for (int i = 0; i < n_layers; ++i) {
    ConvLayer l;
    l.spec.in_channels = static_cast<int>(shape[i * 6 + 0]);
    l.spec.out_channels = static_cast<int>(shape[i * 6 + 1]);
    l.spec.kernel = static_cast<int>(shape[i * 6 + 2]);
    l.spec.stride = static_cast<int>(shape[i * 6 + 3]);
    l.spec.pad = static_cast<int>(shape[i * 6 + 4]);
    l.spec.relu = shape[i * 6 + 5] != 0;
    const std::string p = "conv" + std::to_string(i) + ".";
    const Mat& w = f.mat(p + "w");
    const Mat& b = f.mat(p + "b");
    l.weights.assign(w.data(), w.data() + w.size());
    l.bias.assign(b.data(), b.data() + b.size());
    cnn.layers.push_back(std::move(l));
  }
  return cnn;
}

}  // namespace semfuse
