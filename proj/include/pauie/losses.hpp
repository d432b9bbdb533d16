#pragma once

#include <optional>

#include "pauie/net.hpp"

// Objectives of the semi-supervised scheme. Every squared norm is a mean
// over its elements.
namespace pauie::training {

using nn::Tensor;
using nn::Var;

struct LossWeights {
  double lambda1 = 0.001;       // backward degradation
  double lambda2 = 0.005;       // supervised ambient
  double lambda3 = 10.0;        // gray world
  double lambda_unsup = 0.001;  // unsupervised scheme

  void validate() const;
};

double loss_sup(double l_fwd, double l_bwd, double l_a_sup, const LossWeights& w);
double loss_unsup(double l_t, double l_a_unsup, double l_gw, const LossWeights& w);
double loss_semi_sup(double sup, double unsup, const LossWeights& w);

Var loss_fwd(const Var& reference, const Var& enhanced);
Var loss_bwd(const Var& input, const Var& redegraded);
/// Mean squared distance of the blurred input to the broadcast ambient estimate.
Var loss_a_sup(const Tensor& input, const Var& a_hat, double sigma);
Var loss_t_unsup(const Var& t2_hat, const Var& t1_hat, double alpha);
Var loss_a_unsup(const Var& a2_hat, const Var& a1_hat);
Var loss_gray_world(const Var& j1_hat);

/// Batched re-degradation I2 = alpha I1 + (1 - alpha) A1. Plain data: no graph.
Tensor unsup_pair(const Tensor& i1, const Tensor& a1, double alpha);

struct SupervisedLosses {
  Var l_fwd, l_bwd, l_a_sup, total;
};

struct UnsupervisedLosses {
  Var l_t, l_a_unsup, l_gw, total;
  Tensor i2;
};

/// Forward pass on a labeled batch and the bi-directional objective.
SupervisedLosses supervised_losses(net::PaUieNet& model, const Tensor& degraded, const Tensor& reference,
                                   const LossWeights& w, double t_floor = 0.05);

/// Two forward passes (I1, then the derived I2) and the unsupervised objective.
/// `fixed_i2` replaces the derived I2, holding the second input constant.
UnsupervisedLosses unsupervised_losses(net::PaUieNet& model, const Tensor& i1, double alpha, const LossWeights& w,
                                       const std::optional<Tensor>& fixed_i2 = std::nullopt, double t_floor = 0.05);

/// Blur scale of the supervised ambient loss for a given training resolution.
inline double ambient_blur_sigma(std::size_t input_size) { return static_cast<double>(input_size) / 8.0; }

}  // namespace pauie::training
