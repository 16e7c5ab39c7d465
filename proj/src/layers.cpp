#include "semfuse/layers.hpp"

namespace semfuse {

Mat BatchNorm::forward_train(const Mat& x, Ctx& ctx) {
  const int n = static_cast<int>(x.cols());
  ctx.mean = x.rowwise().mean();
  Mat centered = x.colwise() - ctx.mean;
  Vec var = centered.array().square().rowwise().mean();
  ctx.inv_std = (var.array() + eps).rsqrt();
  ctx.x_hat = centered.array().colwise() * ctx.inv_std.array();

  running_mean = (1.0 - momentum) * running_mean + momentum * ctx.mean;
  running_var = (1.0 - momentum) * running_var + momentum * var;

  (void)n;
  return (ctx.x_hat.array().colwise() * gamma.value.col(0).array())
             .colwise() +
         beta.value.col(0).array();
}

Mat BatchNorm::forward_eval(const Mat& x) const {
  Vec inv = (running_var.array() + eps).rsqrt();
  Mat x_hat =
      (x.colwise() - running_mean).array().colwise() * inv.array();
  return (x_hat.array().colwise() * gamma.value.col(0).array()).colwise() +
         beta.value.col(0).array();
}

Vec BatchNorm::forward_eval(const Vec& x) const {
  Vec inv = (running_var.array() + eps).rsqrt();
  return ((x - running_mean).array() * inv.array() *
          gamma.value.col(0).array()) +
         beta.value.col(0).array();
}

Mat BatchNorm::backward(const Ctx& ctx, const Mat& dy) {
  const double n = static_cast<double>(dy.cols());
  gamma.grad.col(0).noalias() +=
      (dy.array() * ctx.x_hat.array()).rowwise().sum().matrix();
  beta.grad.col(0).noalias() += dy.rowwise().sum();

  // dx = (gamma/std) * (dy - mean(dy) - x_hat * mean(dy .* x_hat))
  Mat dxhat = dy.array().colwise() * gamma.value.col(0).array();
  Vec mean_dxhat = dxhat.rowwise().mean();
  Vec mean_dxhat_xhat =
      (dxhat.array() * ctx.x_hat.array()).rowwise().sum().matrix() / n;
  Mat dx = dxhat.colwise() - mean_dxhat;
  dx.array() -= ctx.x_hat.array().colwise() * mean_dxhat_xhat.array();
  dx.array().colwise() *= ctx.inv_std.array();
  return dx;
}

Mat BatchNorm::backward_input_eval(const Mat& dy) const {
  Vec scale =
      gamma.value.col(0).array() * (running_var.array() + eps).rsqrt();
  return dy.array().colwise() * scale.array();
}

Mat log_softmax(const Mat& logits) {
  Mat out(logits.rows(), logits.cols());
  for (int c = 0; c < logits.cols(); ++c) {
    const double mx = logits.col(c).maxCoeff();
    Vec shifted = logits.col(c).array() - mx;
    const double lse = std::log(shifted.array().exp().sum());
    out.col(c) = shifted.array() - lse;
  }
  return out;
}

Vec log_softmax(const Vec& logits) {
  const double mx = logits.maxCoeff();
  Vec shifted = logits.array() - mx;
  const double lse = std::log(shifted.array().exp().sum());
  return shifted.array() - lse;
}

void Adam::step(const std::vector<Param*>& params) {
  ++t;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (Param* p : params) {
    p->m = beta1 * p->m + (1.0 - beta1) * p->grad;
    p->v = beta2 * p->v.array().matrix() +
           (1.0 - beta2) * p->grad.array().square().matrix();
    Mat m_hat = p->m / c1;
    Mat v_hat = p->v / c2;
    p->value.array() -=
        lr * m_hat.array() / (v_hat.array().sqrt() + eps);
  }
}

}  // namespace semfuse
