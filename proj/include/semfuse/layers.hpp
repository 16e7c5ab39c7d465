#pragma once

#include "semfuse/common.hpp"

#include <string>
#include <vector>

namespace semfuse {

/// A trainable tensor with gradient and Adam moment buffers.
/// Batch convention throughout: columns are samples.
struct Param {
  Mat value, grad, m, v;

  void init(int rows, int cols) {
    value = Mat::Zero(rows, cols);
    grad = Mat::Zero(rows, cols);
    m = Mat::Zero(rows, cols);
    v = Mat::Zero(rows, cols);
  }
  void zero_grad() { grad.setZero(); }
};

struct Dense {
  Param w, b;

  void init(int out_dim, int in_dim, Rng& rng) {
    w.init(out_dim, in_dim);
    b.init(out_dim, 1);
    const double stddev = 1.0 / std::sqrt(static_cast<double>(in_dim));
    for (int c = 0; c < in_dim; ++c) {
      for (int r = 0; r < out_dim; ++r) w.value(r, c) = stddev * rng.normal();
    }
  }

  Mat forward(const Mat& x) const {
    return (w.value * x).colwise() + Vec(b.value.col(0));
  }
  Vec forward(const Vec& x) const { return w.value * x + b.value.col(0); }

  /// Accumulates parameter gradients, returns dL/dx.
  Mat backward(const Mat& x, const Mat& dy) {
    w.grad.noalias() += dy * x.transpose();
    b.grad.col(0).noalias() += dy.rowwise().sum();
    return w.value.transpose() * dy;
  }
  /// Input gradient only (no parameter accumulation); eval-mode backprop.
  Mat backward_input(const Mat& dy) const { return w.value.transpose() * dy; }
};

/// Per-feature batch normalization; population statistics tracked with
/// momentum for eval mode.
struct BatchNorm {
  Param gamma, beta;
  Vec running_mean, running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  void init(int dim) {
    gamma.init(dim, 1);
    gamma.value.setOnes();
    beta.init(dim, 1);
    running_mean = Vec::Zero(dim);
    running_var = Vec::Ones(dim);
  }

  struct Ctx {
    Vec mean, inv_std;
    Mat x_hat;
  };

  Mat forward_train(const Mat& x, Ctx& ctx);
  Mat forward_eval(const Mat& x) const;
  Vec forward_eval(const Vec& x) const;
  Mat backward(const Ctx& ctx, const Mat& dy);
  /// Eval-mode input gradient (affine transform).
  Mat backward_input_eval(const Mat& dy) const;
};

/// Inverted dropout; mask drawn from the training RNG stream.
struct Dropout {
  double p = 0.0;
  Mat mask;

  Mat forward_train(const Mat& x, Rng& rng) {
    if (p <= 0.0) {
      mask = Mat::Ones(x.rows(), x.cols());
      return x;
    }
    mask.resize(x.rows(), x.cols());
    const double keep = 1.0 - p;
    for (int c = 0; c < x.cols(); ++c) {
      for (int r = 0; r < x.rows(); ++r) {
        mask(r, c) = rng.uniform01() < keep ? 1.0 / keep : 0.0;
      }
    }
    return x.cwiseProduct(mask);
  }
  Mat backward(const Mat& dy) const { return dy.cwiseProduct(mask); }
};

inline Mat relu(const Mat& x) { return x.cwiseMax(0.0); }
inline Mat relu_backward(const Mat& pre, const Mat& dy) {
  return (pre.array() > 0.0).cast<double>() * dy.array();
}

/// Numerically stable column-wise log-softmax.
Mat log_softmax(const Mat& logits);
Vec log_softmax(const Vec& logits);

struct Adam {
  double lr = 2e-6;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long t = 0;

  void step(const std::vector<Param*>& params);
};

}  // namespace semfuse
