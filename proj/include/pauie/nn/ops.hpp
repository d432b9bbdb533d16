#pragma once

#include <cstddef>

#include "pauie/nn/autograd.hpp"

// Differentiable primitives. Feature maps are NCHW, token sequences are
// [batch, tokens, dim], ambient estimates are [batch, 3].
namespace pauie::nn::ops {

/// 'Same' convolution, odd square kernel, stride 1. `bias` may be undefined.
Var conv2d(const Var& x, const Var& weight, const Var& bias);

/// Batch normalization over (N, H, W). In training mode normalizes with batch
/// statistics and updates the running buffers; otherwise uses the buffers.
Var batch_norm2d(const Var& x, const Var& gamma, const Var& beta, Tensor& running_mean,
                 Tensor& running_var, bool training, double momentum = 0.1, double eps = 1e-5);

Var relu(const Var& x);
Var sigmoid(const Var& x);
/// Exact (erf) GELU.
Var gelu(const Var& x);

Var max_pool2(const Var& x);
/// Non-overlapping factor x factor average pooling.
Var avg_pool(const Var& x, std::size_t factor);
/// Bilinear resize with half-pixel alignment.
Var upsample_bilinear(const Var& x, std::size_t height, std::size_t width);
/// [N,C,H,W] -> [N,C].
Var global_avg_pool(const Var& x);

Var concat_channels(const Var& a, const Var& b);
Var slice_channels(const Var& x, std::size_t begin, std::size_t end);

/// Affine map on the last axis: y = x W^T + b, W is [out, in].
Var linear(const Var& x, const Var& weight, const Var& bias);
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);
/// Multi-head scaled dot-product self-attention on packed [B, L, 3D] q|k|v.
Var self_attention(const Var& qkv, std::size_t heads);

/// Same data under a new shape of equal size.
Var reshape(const Var& x, Shape shape);

Var add(const Var& a, const Var& b);
Var scale(const Var& x, double s);

/// [N,C,H,W] -> [N,H*W,C].
Var spatial_to_tokens(const Var& x);
/// [N,H*W,C] -> [N,C,H,W].
Var tokens_to_spatial(const Var& tokens, std::size_t height, std::size_t width);
/// Learned [D] token placed in front of every sequence.
Var prepend_token(const Var& token, const Var& seq);
/// seq [N,L,D] + pos [L,D].
Var add_positional(const Var& seq, const Var& pos);
Var slice_tokens(const Var& seq, std::size_t begin, std::size_t end);
Var concat_tokens(const Var& a, const Var& b);

/// Multiplies the red plane of [N,3,H,W] by 2 w[n]; [N,1] weights.
Var scale_red(const Var& img, const Var& weight);

/// J = (I - (1 - t') A) / t', t' = max(t, t_floor). No clamping.
Var ifm_enhance(const Var& degraded, const Var& t, const Var& ambient, double t_floor);
/// I = J t + (1 - t) A. No clamping.
Var ifm_degrade(const Var& clean, const Var& t, const Var& ambient);

/// Mean squared error over every element.
Var mse(const Var& a, const Var& b);
/// Mean over pixels and channels of (map - broadcast ambient)^2.
Var mse_to_ambient(const Var& map, const Var& ambient);
/// Batch mean of sum_c (mean(J^c) - 0.5)^2.
Var gray_world_loss(const Var& img);

}  // namespace pauie::nn::ops
