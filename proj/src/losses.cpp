#include "pauie/losses.hpp"

#include <algorithm>
#include <cmath>

#include "pauie/kernels.hpp"
#include "pauie/nn/ops.hpp"

namespace pauie::training {

namespace ops = nn::ops;

void LossWeights::validate() const {
  for (double v : {lambda1, lambda2, lambda3, lambda_unsup}) {
    if (!std::isfinite(v) || v < 0.0) throw ParameterError("LossWeights: weights must be finite and >= 0");
  }
}

double loss_sup(double l_fwd, double l_bwd, double l_a_sup, const LossWeights& w) {
  return l_fwd + w.lambda1 * l_bwd + w.lambda2 * l_a_sup;
}

double loss_unsup(double l_t, double l_a_unsup, double l_gw, const LossWeights& w) {
  return l_t + l_a_unsup + w.lambda3 * l_gw;
}

double loss_semi_sup(double sup, double unsup, const LossWeights& w) { return sup + w.lambda_unsup * unsup; }

Var loss_fwd(const Var& reference, const Var& enhanced) { return ops::mse(enhanced, reference); }

Var loss_bwd(const Var& input, const Var& redegraded) { return ops::mse(redegraded, input); }

Var loss_a_sup(const Tensor& input, const Var& a_hat, double sigma) {
  if (!(sigma > 0.0)) throw ParameterError("loss_a_sup: sigma must be > 0");
  if (input.rank() != 4) throw DimensionError("loss_a_sup: expected an NCHW batch");
  const std::size_t h = input.dim(2), w = input.dim(3), plane = h * w;
  Tensor blurred(input.shape());
  for (std::size_t i = 0; i < input.dim(0) * input.dim(1); ++i) {
    kernels::omp::gaussian_blur(input.data().subspan(i * plane, plane), h, w, sigma,
                                blurred.data().subspan(i * plane, plane));
  }
  return ops::mse_to_ambient(Var(std::move(blurred)), a_hat);
}

Var loss_t_unsup(const Var& t2_hat, const Var& t1_hat, double alpha) {
  return ops::mse(t2_hat, ops::scale(t1_hat, alpha));
}

Var loss_a_unsup(const Var& a2_hat, const Var& a1_hat) { return ops::mse(a2_hat, a1_hat); }

Var loss_gray_world(const Var& j1_hat) { return ops::gray_world_loss(j1_hat); }

Tensor unsup_pair(const Tensor& i1, const Tensor& a1, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ParameterError("unsup_pair: alpha must lie in (0,1)");
  if (i1.rank() != 4 || i1.dim(1) != 3 || a1.shape() != nn::Shape{i1.dim(0), 3}) {
    throw DimensionError("unsup_pair: expected [N,3,H,W] images and [N,3] ambient");
  }
  const std::size_t plane = i1.dim(2) * i1.dim(3);
  Tensor out(i1.shape());
  for (std::size_t n = 0; n < i1.dim(0); ++n) {
    for (std::size_t c = 0; c < 3; ++c) {
      const double a = a1[3 * n + c];
      const std::size_t base = (3 * n + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        out[base + i] = std::clamp(alpha * i1[base + i] + (1.0 - alpha) * a, 0.0, 1.0);
      }
    }
  }
  return out;
}

SupervisedLosses supervised_losses(net::PaUieNet& model, const Tensor& degraded, const Tensor& reference,
                                   const LossWeights& w, double t_floor) {
  if (degraded.shape() != reference.shape()) throw DimensionError("supervised_losses: batch shapes differ");
  Var input(degraded);
  Var ref(reference);
  auto out = model.forward(input);
  SupervisedLosses l;
  l.l_fwd = loss_fwd(ref, ops::ifm_enhance(input, out.t_hat, out.a_hat, t_floor));
  l.l_bwd = loss_bwd(input, ops::ifm_degrade(ref, out.t_hat, out.a_hat));
  l.l_a_sup = loss_a_sup(degraded, out.a_hat, ambient_blur_sigma(model.config().input_size));
  l.total = ops::add(l.l_fwd, ops::add(ops::scale(l.l_bwd, w.lambda1), ops::scale(l.l_a_sup, w.lambda2)));
  return l;
}

UnsupervisedLosses unsupervised_losses(net::PaUieNet& model, const Tensor& i1, double alpha, const LossWeights& w,
                                       const std::optional<Tensor>& fixed_i2, double t_floor) {
  Var input(i1);
  auto first = model.forward(input);
  UnsupervisedLosses l;
  l.i2 = fixed_i2 ? *fixed_i2 : unsup_pair(i1, first.a_hat.value(), alpha);
  auto second = model.forward(Var(l.i2));
  l.l_t = loss_t_unsup(second.t_hat, first.t_hat, alpha);
  l.l_a_unsup = loss_a_unsup(second.a_hat, first.a_hat);
  l.l_gw = loss_gray_world(ops::ifm_enhance(input, first.t_hat, first.a_hat, t_floor));
  l.total = ops::add(l.l_t, ops::add(l.l_a_unsup, ops::scale(l.l_gw, w.lambda3)));
  return l;
}

}  // namespace pauie::training
