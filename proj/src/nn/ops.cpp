#include "pauie/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pauie/kernels.hpp"

namespace pauie::nn::ops {

namespace {

Node& parent(Node& self, std::size_t i) { return *self.parents[i]; }
bool wants(Node& self, std::size_t i) { return self.parents[i]->requires_grad; }

void require_rank(const Var& v, std::size_t rank, const char* op) {
  if (v.value().rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_string(v.shape()));
  }
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

// Source index pairs and weights for 1-D half-pixel bilinear resampling.
struct Lerp {
  std::vector<std::size_t> lo, hi;
  std::vector<double> w;
};
Lerp lerp_table(std::size_t in, std::size_t out) {
  Lerp t;
  t.lo.resize(out);
  t.hi.resize(out);
  t.w.resize(out);
  const double s = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t i = 0; i < out; ++i) {
    const double f = std::max(0.0, (static_cast<double>(i) + 0.5) * s - 0.5);
    const auto lo = std::min(static_cast<std::size_t>(f), in - 1);
    t.lo[i] = lo;
    t.hi[i] = std::min(lo + 1, in - 1);
    t.w[i] = f - static_cast<double>(lo);
  }
  return t;
}

template <class F, class D>
Var unary(const Var& x, F f, D df) {
  Tensor out(x.shape());
  auto in = x.value().data();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = f(in[i]);
  return make_result(std::move(out), {x}, [df](Node& self) {
    Node& p = parent(self, 0);
    auto& g = p.grad_buffer();
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i] * df(p.value[i], self.value[i]);
  });
}

}  // namespace

Var conv2d(const Var& x, const Var& weight, const Var& bias) {
  require_rank(x, 4, "conv2d");
  require_rank(weight, 4, "conv2d weight");
  kernels::ConvShape s;
  s.batch = x.dim(0);
  s.in_channels = x.dim(1);
  s.height = x.dim(2);
  s.width = x.dim(3);
  s.out_channels = weight.dim(0);
  s.kernel = weight.dim(2);
  if (weight.dim(1) != s.in_channels || weight.dim(3) != s.kernel || s.kernel % 2 == 0) {
    throw DimensionError("conv2d: weight " + shape_string(weight.shape()) + " incompatible with input " +
                         shape_string(x.shape()));
  }
  const bool has_bias = bias.defined();
  Tensor out({s.batch, s.out_channels, s.height, s.width});
  kernels::omp::conv2d_forward(s, x.value().data(), weight.value().data(),
                               has_bias ? bias.value().data() : std::span<const double>{}, out.data());
  std::vector<Var> parents{x, weight};
  if (has_bias) parents.push_back(bias);
  return make_result(std::move(out), std::move(parents), [s, has_bias](Node& self) {
    if (wants(self, 0)) {
      kernels::omp::conv2d_backward_input(s, self.grad.data(), parent(self, 1).value.data(),
                                          parent(self, 0).grad_buffer().data());
    }
    const bool gw = wants(self, 1), gb = has_bias && wants(self, 2);
    if (gw || gb) {
      Tensor scratch_w;
      std::span<double> wgrad;
      if (gw) {
        wgrad = parent(self, 1).grad_buffer().data();
      } else {
        scratch_w = Tensor(parent(self, 1).value.shape());
        wgrad = scratch_w.data();
      }
      kernels::omp::conv2d_backward_weight(s, parent(self, 0).value.data(), self.grad.data(), wgrad,
                                           gb ? parent(self, 2).grad_buffer().data() : std::span<double>{});
    }
  });
}

Var batch_norm2d(const Var& x, const Var& gamma, const Var& beta, Tensor& running_mean,
                 Tensor& running_var, bool training, double momentum, double eps) {
  require_rank(x, 4, "batch_norm2d");
  const std::size_t N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  const std::size_t M = N * HW;
  if (gamma.value().numel() != C || beta.value().numel() != C || running_mean.numel() != C ||
      running_var.numel() != C) {
    throw DimensionError("batch_norm2d: parameter size does not match channels");
  }
  if (training && M < 2) throw DimensionError("batch_norm2d: training needs more than one value per channel");
  const auto& in = x.value();
  Tensor out(x.shape());
  Tensor xhat(x.shape());
  std::vector<double> inv_std(C);
  for (std::size_t c = 0; c < C; ++c) {
    double mu, var;
    if (training) {
      double acc = 0.0;
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t i = 0; i < HW; ++i) acc += in[(n * C + c) * HW + i];
      mu = acc / static_cast<double>(M);
      double sq = 0.0;
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t i = 0; i < HW; ++i) {
          const double d = in[(n * C + c) * HW + i] - mu;
          sq += d * d;
        }
      var = sq / static_cast<double>(M);
      running_mean[c] = (1.0 - momentum) * running_mean[c] + momentum * mu;
      running_var[c] = (1.0 - momentum) * running_var[c] +
                       momentum * var * static_cast<double>(M) / static_cast<double>(M - 1);
    } else {
      mu = running_mean[c];
      var = running_var[c];
    }
    inv_std[c] = 1.0 / std::sqrt(var + eps);
    const double g = gamma.value()[c], b = beta.value()[c];
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t i = 0; i < HW; ++i) {
        const std::size_t k = (n * C + c) * HW + i;
        xhat[k] = (in[k] - mu) * inv_std[c];
        out[k] = g * xhat[k] + b;
      }
  }
  return make_result(std::move(out), {x, gamma, beta},
                     [xhat = std::move(xhat), inv_std, N, C, HW, M, training](Node& self) {
                       const auto& gy = self.grad;
                       const auto& gam = parent(self, 1).value;
                       for (std::size_t c = 0; c < C; ++c) {
                         double sum_g = 0.0, sum_gx = 0.0;
                         for (std::size_t n = 0; n < N; ++n)
                           for (std::size_t i = 0; i < HW; ++i) {
                             const std::size_t k = (n * C + c) * HW + i;
                             sum_g += gy[k];
                             sum_gx += gy[k] * xhat[k];
                           }
                         if (wants(self, 1)) parent(self, 1).grad_buffer()[c] += sum_gx;
                         if (wants(self, 2)) parent(self, 2).grad_buffer()[c] += sum_g;
                         if (!wants(self, 0)) continue;
                         auto& gx = parent(self, 0).grad_buffer();
                         const double scale = gam[c] * inv_std[c];
                         const double inv_m = 1.0 / static_cast<double>(M);
                         for (std::size_t n = 0; n < N; ++n)
                           for (std::size_t i = 0; i < HW; ++i) {
                             const std::size_t k = (n * C + c) * HW + i;
                             gx[k] += training ? scale * (gy[k] - inv_m * sum_g - xhat[k] * inv_m * sum_gx)
                                               : scale * gy[k];
                           }
                       }
                     });
}

Var relu(const Var& x) {
  Tensor out(x.shape());
  std::vector<bool> on(out.numel());
  auto in = x.value().data();
  for (std::size_t i = 0; i < out.numel(); ++i) {
    on[i] = BranchPin::take(in[i] > 0.0);
    out[i] = on[i] ? in[i] : 0.0;
  }
  return make_result(std::move(out), {x}, [on = std::move(on)](Node& self) {
    auto& g = parent(self, 0).grad_buffer();
    for (std::size_t i = 0; i < g.numel(); ++i)
      if (on[i]) g[i] += self.grad[i];
  });
}

Var sigmoid(const Var& x) {
  return unary(x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
               [](double, double out) { return out * (1.0 - out); });
}

Var gelu(const Var& x) {
  constexpr double inv_sqrt2 = 0.7071067811865475244;
  constexpr double inv_sqrt2pi = 0.3989422804014326779;
  return unary(x, [](double v) { return 0.5 * v * (1.0 + std::erf(v * inv_sqrt2)); },
               [](double v, double) {
                 return 0.5 * (1.0 + std::erf(v * inv_sqrt2)) + v * inv_sqrt2pi * std::exp(-0.5 * v * v);
               });
}

Var max_pool2(const Var& x) {
  require_rank(x, 4, "max_pool2");
  const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (H % 2 || W % 2) throw DimensionError("max_pool2: odd spatial size " + shape_string(x.shape()));
  const std::size_t oh = H / 2, ow = W / 2;
  Tensor out({N, C, oh, ow});
  std::vector<std::size_t> argmax(out.numel());
  const auto& in = x.value();
  for (std::size_t p = 0; p < N * C; ++p)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t xx = 0; xx < ow; ++xx) {
        std::size_t best = (p * H + 2 * y) * W + 2 * xx;
        for (std::size_t dy = 0; dy < 2; ++dy)
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t k = (p * H + 2 * y + dy) * W + 2 * xx + dx;
            if (in[k] > in[best]) best = k;
          }
        best = BranchPin::take(best);
        const std::size_t o = (p * oh + y) * ow + xx;
        out[o] = in[best];
        argmax[o] = best;
      }
  return make_result(std::move(out), {x}, [argmax = std::move(argmax)](Node& self) {
    auto& g = parent(self, 0).grad_buffer();
    for (std::size_t o = 0; o < argmax.size(); ++o) g[argmax[o]] += self.grad[o];
  });
}

Var avg_pool(const Var& x, std::size_t f) {
  require_rank(x, 4, "avg_pool");
  const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (f == 0 || H % f || W % f) {
    throw DimensionError("avg_pool: size " + shape_string(x.shape()) + " not divisible by " + std::to_string(f));
  }
  if (f == 1) return x;
  const std::size_t oh = H / f, ow = W / f;
  const double inv = 1.0 / static_cast<double>(f * f);
  Tensor out({N, C, oh, ow});
  const auto& in = x.value();
  for (std::size_t p = 0; p < N * C; ++p)
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t xx = 0; xx < W; ++xx) out[(p * oh + y / f) * ow + xx / f] += in[(p * H + y) * W + xx] * inv;
  return make_result(std::move(out), {x}, [N, C, H, W, f, oh, ow, inv](Node& self) {
    auto& g = parent(self, 0).grad_buffer();
    for (std::size_t p = 0; p < N * C; ++p)
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t xx = 0; xx < W; ++xx) g[(p * H + y) * W + xx] += self.grad[(p * oh + y / f) * ow + xx / f] * inv;
  });
}

Var upsample_bilinear(const Var& x, std::size_t height, std::size_t width) {
  require_rank(x, 4, "upsample_bilinear");
  const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (H == height && W == width) return x;
  const Lerp ty = lerp_table(H, height), tx = lerp_table(W, width);
  Tensor out({N, C, height, width});
  const auto& in = x.value();
  for (std::size_t p = 0; p < N * C; ++p) {
    const double* src = in.ptr() + p * H * W;
    double* dst = out.ptr() + p * height * width;
    for (std::size_t y = 0; y < height; ++y) {
      const double* r0 = src + ty.lo[y] * W;
      const double* r1 = src + ty.hi[y] * W;
      const double wy = ty.w[y];
      for (std::size_t xx = 0; xx < width; ++xx) {
        const double wx = tx.w[xx];
        const double top = r0[tx.lo[xx]] * (1.0 - wx) + r0[tx.hi[xx]] * wx;
        const double bot = r1[tx.lo[xx]] * (1.0 - wx) + r1[tx.hi[xx]] * wx;
        dst[y * width + xx] = top * (1.0 - wy) + bot * wy;
      }
    }
  }
  return make_result(std::move(out), {x}, [ty, tx, N, C, H, W, height, width](Node& self) {
    auto& g = parent(self, 0).grad_buffer();
    for (std::size_t p = 0; p < N * C; ++p) {
      double* dst = g.ptr() + p * H * W;
      const double* src = self.grad.ptr() + p * height * width;
      for (std::size_t y = 0; y < height; ++y) {
        const double wy = ty.w[y];
        for (std::size_t xx = 0; xx < width; ++xx) {
          const double go = src[y * width + xx];
          const double wx = tx.w[xx];
          dst[ty.lo[y] * W + tx.lo[xx]] += go * (1.0 - wy) * (1.0 - wx);
          dst[ty.lo[y] * W + tx.hi[xx]] += go * (1.0 - wy) * wx;
          dst[ty.hi[y] * W + tx.lo[xx]] += go * wy * (1.0 - wx);
          dst[ty.hi[y] * W + tx.hi[xx]] += go * wy * wx;
        }
      }
    }
  });
}

Var global_avg_pool(const Var& x) {
  require_rank(x, 4, "global_avg_pool");
  const std::size_t N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  Tensor out({N, C});
  const auto& in = x.value();
  for (std::size_t p = 0; p < N * C; ++p) {
    double acc = 0.0;
    for (std::size_t i = 0; i < HW; ++i) acc += in[p * HW + i];
    out[p] = acc / static_cast<double>(HW);
  }
  return make_result(std::move(out), {x}, [N, C, HW](Node& self) {
    auto& g = parent(self, 0).grad_buffer();
    const double inv = 1.0 / static_cast<double>(HW);
    for (std::size_t p = 0; p < N * C; ++p)
      for (std::size_t i = 0; i < HW; ++i) g[p * HW + i] += self.grad[p] * inv;
  });
}

Var concat_channels(const Var& a, const Var& b) {
  require_rank(a, 4, "concat_channels");
  require_rank(b, 4, "concat_channels");
  const std::size_t N = a.dim(0), Ca = a.dim(1), Cb = b.dim(1), HW = a.dim(2) * a.dim(3);
  if (b.dim(0) != N || b.dim(2) != a.dim(2) || b.dim(3) != a.dim(3)) {
    throw DimensionError("concat_channels: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  Tensor out({N, Ca + Cb, a.dim(2), a.dim(3)});
  for (std::size_t n = 0; n < N; ++n) {
    std::copy_n(a.value().ptr() + n * Ca * HW, Ca * HW, out.ptr() + n * (Ca + Cb) * HW);
    std::copy_n(b.value().ptr() + n * Cb * HW, Cb * HW, out.ptr() + (n * (Ca + Cb) + Ca) * HW);
  }
  return make_result(std::move(out), {a, b}, [N, Ca, Cb, HW](Node& self) {
    for (std::size_t n = 0; n < N; ++n) {
      const double* g = self.grad.ptr() + n * (Ca + Cb) * HW;
      if (wants(self, 0)) {
        double* ga = parent(self, 0).grad_buffer().ptr() + n * Ca * HW;
        for (std::size_t i = 0; i < Ca * HW; ++i) ga[i] += g[i];
      }
      if (wants(self, 1)) {
        double* gb = parent(self, 1).grad_buffer().ptr() + n * Cb * HW;
        for (std::size_t i = 0; i < Cb * HW; ++i) gb[i] += g[Ca * HW + i];
      }
    }
  });
}

Var slice_channels(const Var& x, std::size_t begin, std::size_t end) {
  require_rank(x, 4, "slice_channels");
  const std::size_t N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  if (begin >= end || end > C) throw DimensionError("slice_channels: bad range");
  const std::size_t S = end - begin;
  Tensor out({N, S, x.dim(2), x.dim(3)});
  for (std::size_t n = 0; n < N; ++n)
    std::copy_n(x.value().ptr() + (n * C + begin) * HW, S * HW, out.ptr() + n * S * HW);
  return make_result(std::move(out), {x}, [N, C, HW, begin, S](Node& self) {
    auto& g = parent(self, 0).grad_buffer();
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t i = 0; i < S * HW; ++i) g[(n * C + begin) * HW + i] += self.grad[n * S * HW + i];
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  require_rank(weight, 2, "linear weight");
  const std::size_t in_f = weight.dim(1), out_f = weight.dim(0);
  if (x.value().rank() == 0 || x.shape().back() != in_f) {
    throw DimensionError("linear: input " + shape_string(x.shape()) + " vs weight " + shape_string(weight.shape()));
  }
  const bool has_bias = bias.defined();
  const std::size_t rows = x.value().numel() / in_f;
  Shape shape = x.shape();
  shape.back() = out_f;
  Tensor out(shape);
  const double* X = x.value().ptr();
  const double* Wt = weight.value().ptr();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t o = 0; o < out_f; ++o) {
      double acc = has_bias ? bias.value()[o] : 0.0;
      const double* xr = X + r * in_f;
      const double* wr = Wt + o * in_f;
      for (std::size_t i = 0; i < in_f; ++i) acc += xr[i] * wr[i];
      out[r * out_f + o] = acc;
    }
  std::vector<Var> parents{x, weight};
  if (has_bias) parents.push_back(bias);
  return make_result(std::move(out), std::move(parents), [rows, in_f, out_f, has_bias](Node& self) {
    const double* G = self.grad.ptr();
    const double* X = parent(self, 0).value.ptr();
    const double* Wt = parent(self, 1).value.ptr();
    if (wants(self, 0)) {
      double* gx = parent(self, 0).grad_buffer().ptr();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t o = 0; o < out_f; ++o) {
          const double g = G[r * out_f + o];
          const double* wr = Wt + o * in_f;
          double* gr = gx + r * in_f;
          for (std::size_t i = 0; i < in_f; ++i) gr[i] += g * wr[i];
        }
    }
    if (wants(self, 1)) {
      double* gw = parent(self, 1).grad_buffer().ptr();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t o = 0; o < out_f; ++o) {
          const double g = G[r * out_f + o];
          const double* xr = X + r * in_f;
          double* wr = gw + o * in_f;
          for (std::size_t i = 0; i < in_f; ++i) wr[i] += g * xr[i];
        }
    }
    if (has_bias && wants(self, 2)) {
      auto& gb = parent(self, 2).grad_buffer();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t o = 0; o < out_f; ++o) gb[o] += G[r * out_f + o];
    }
  });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const std::size_t D = x.shape().back();
  if (gamma.value().numel() != D || beta.value().numel() != D) throw DimensionError("layer_norm: size mismatch");
  const std::size_t rows = x.value().numel() / D;
  Tensor out(x.shape()), xhat(x.shape());
  std::vector<double> inv_std(rows);
  const auto& in = x.value();
  for (std::size_t r = 0; r < rows; ++r) {
    double mu = 0.0;
    for (std::size_t i = 0; i < D; ++i) mu += in[r * D + i];
    mu /= static_cast<double>(D);
    double var = 0.0;
    for (std::size_t i = 0; i < D; ++i) var += (in[r * D + i] - mu) * (in[r * D + i] - mu);
    var /= static_cast<double>(D);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t i = 0; i < D; ++i) {
      xhat[r * D + i] = (in[r * D + i] - mu) * inv_std[r];
      out[r * D + i] = gamma.value()[i] * xhat[r * D + i] + beta.value()[i];
    }
  }
  return make_result(std::move(out), {x, gamma, beta}, [xhat = std::move(xhat), inv_std, rows, D](Node& self) {
    const auto& g = self.grad;
    const auto& gam = parent(self, 1).value;
    const bool gx_on = wants(self, 0), gg_on = wants(self, 1), gb_on = wants(self, 2);
    std::vector<double> dxhat(D);
    for (std::size_t r = 0; r < rows; ++r) {
      double sum = 0.0, sum_x = 0.0;
      for (std::size_t i = 0; i < D; ++i) {
        const std::size_t k = r * D + i;
        if (gg_on) parent(self, 1).grad_buffer()[i] += g[k] * xhat[k];
        if (gb_on) parent(self, 2).grad_buffer()[i] += g[k];
        dxhat[i] = g[k] * gam[i];
        sum += dxhat[i];
        sum_x += dxhat[i] * xhat[k];
      }
      if (!gx_on) continue;
      auto& gx = parent(self, 0).grad_buffer();
      const double inv_d = 1.0 / static_cast<double>(D);
      for (std::size_t i = 0; i < D; ++i) {
        const std::size_t k = r * D + i;
        gx[k] += inv_std[r] * (dxhat[i] - inv_d * sum - xhat[k] * inv_d * sum_x);
      }
    }
  });
}

Var self_attention(const Var& qkv, std::size_t heads) {
  require_rank(qkv, 3, "self_attention");
  const std::size_t B = qkv.dim(0), L = qkv.dim(1), D3 = qkv.dim(2);
  if (D3 % 3 || (D3 / 3) % heads) throw DimensionError("self_attention: dim not divisible by 3*heads");
  const std::size_t D = D3 / 3, dh = D / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Tensor out({B, L, D});
  Tensor probs({B, heads, L, L});
  const double* Q = qkv.value().ptr();
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t h = 0; h < heads; ++h) {
      double* P = probs.ptr() + (b * heads + h) * L * L;
      for (std::size_t i = 0; i < L; ++i) {
        const double* qi = Q + (b * L + i) * D3 + h * dh;
        double mx = -INFINITY;
        for (std::size_t j = 0; j < L; ++j) {
          const double* kj = Q + (b * L + j) * D3 + D + h * dh;
          double s = 0.0;
          for (std::size_t k = 0; k < dh; ++k) s += qi[k] * kj[k];
          P[i * L + j] = s * scale;
          mx = std::max(mx, P[i * L + j]);
        }
        double z = 0.0;
        for (std::size_t j = 0; j < L; ++j) {
          P[i * L + j] = std::exp(P[i * L + j] - mx);
          z += P[i * L + j];
        }
        for (std::size_t j = 0; j < L; ++j) P[i * L + j] /= z;
        double* oi = out.ptr() + (b * L + i) * D + h * dh;
        for (std::size_t j = 0; j < L; ++j) {
          const double* vj = Q + (b * L + j) * D3 + 2 * D + h * dh;
          const double p = P[i * L + j];
          for (std::size_t k = 0; k < dh; ++k) oi[k] += p * vj[k];
        }
      }
    }
  return make_result(std::move(out), {qkv}, [probs = std::move(probs), B, L, D, D3, dh, heads, scale](Node& self) {
    const double* Q = parent(self, 0).value.ptr();
    double* G = parent(self, 0).grad_buffer().ptr();
    const double* GO = self.grad.ptr();
    std::vector<double> dP(L * L), dS(L * L);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t h = 0; h < heads; ++h) {
        const double* P = probs.ptr() + (b * heads + h) * L * L;
        for (std::size_t i = 0; i < L; ++i) {
          const double* goi = GO + (b * L + i) * D + h * dh;
          for (std::size_t j = 0; j < L; ++j) {
            const double* vj = Q + (b * L + j) * D3 + 2 * D + h * dh;
            double* gvj = G + (b * L + j) * D3 + 2 * D + h * dh;
            double s = 0.0;
            for (std::size_t k = 0; k < dh; ++k) {
              s += goi[k] * vj[k];
              gvj[k] += P[i * L + j] * goi[k];
            }
            dP[i * L + j] = s;
          }
          double dot = 0.0;
          for (std::size_t j = 0; j < L; ++j) dot += dP[i * L + j] * P[i * L + j];
          for (std::size_t j = 0; j < L; ++j) dS[i * L + j] = P[i * L + j] * (dP[i * L + j] - dot) * scale;
        }
        for (std::size_t i = 0; i < L; ++i) {
          const double* qi = Q + (b * L + i) * D3 + h * dh;
          double* gqi = G + (b * L + i) * D3 + h * dh;
          for (std::size_t j = 0; j < L; ++j) {
            const double* kj = Q + (b * L + j) * D3 + D + h * dh;
            double* gkj = G + (b * L + j) * D3 + D + h * dh;
            const double ds = dS[i * L + j];
            for (std::size_t k = 0; k < dh; ++k) {
              gqi[k] += ds * kj[k];
              gkj[k] += ds * qi[k];
            }
          }
        }
      }
  });
}

Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return make_result(std::move(out), {x}, [](Node& self) {
    auto& g = parent(self, 0).grad_buffer();
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i];
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] + b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (!wants(self, p)) continue;
      auto& g = parent(self, p).grad_buffer();
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i];
    }
  });
}

Var scale(const Var& x, double s) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = s * x.value()[i];
  return make_result(std::move(out), {x}, [s](Node& self) {
    auto& g = parent(self, 0).grad_buffer();
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += s * self.grad[i];
  });
}

Var spatial_to_tokens(const Var& x) {
  require_rank(x, 4, "spatial_to_tokens");
  const std::size_t N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  Tensor out({N, HW, C});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t i = 0; i < HW; ++i) out[(n * HW + i) * C + c] = x.value()[(n * C + c) * HW + i];
  return make_result(std::move(out), {x}, [N, C, HW](Node& self) {
    auto& g = parent(self, 0).grad_buffer();
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < HW; ++i) g[(n * C + c) * HW + i] += self.grad[(n * HW + i) * C + c];
  });
}

Var tokens_to_spatial(const Var& tokens, std::size_t height, std::size_t width) {
  require_rank(tokens, 3, "tokens_to_spatial");
  const std::size_t N = tokens.dim(0), L = tokens.dim(1), C = tokens.dim(2);
  if (L != height * width) {
    throw DimensionError("tokens_to_spatial: " + std::to_string(L) + " tokens do not fold to " +
                         std::to_string(height) + "x" + std::to_string(width));
  }
  Tensor out({N, C, height, width});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t i = 0; i < L; ++i)
      for (std::size_t c = 0; c < C; ++c) out[(n * C + c) * L + i] = tokens.value()[(n * L + i) * C + c];
  return make_result(std::move(out), {tokens}, [N, L, C](Node& self) {
    auto& g = parent(self, 0).grad_buffer();
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t i = 0; i < L; ++i)
        for (std::size_t c = 0; c < C; ++c) g[(n * L + i) * C + c] += self.grad[(n * C + c) * L + i];
  });
}

Var prepend_token(const Var& token, const Var& seq) {
  require_rank(seq, 3, "prepend_token");
  const std::size_t N = seq.dim(0), L = seq.dim(1), D = seq.dim(2);
  if (token.value().numel() != D) throw DimensionError("prepend_token: token size mismatch");
  Tensor out({N, L + 1, D});
  for (std::size_t n = 0; n < N; ++n) {
    std::copy_n(token.value().ptr(), D, out.ptr() + n * (L + 1) * D);
    std::copy_n(seq.value().ptr() + n * L * D, L * D, out.ptr() + (n * (L + 1) + 1) * D);
  }
  return make_result(std::move(out), {token, seq}, [N, L, D](Node& self) {
    for (std::size_t n = 0; n < N; ++n) {
      const double* g = self.grad.ptr() + n * (L + 1) * D;
      if (wants(self, 0)) {
        auto& gt = parent(self, 0).grad_buffer();
        for (std::size_t i = 0; i < D; ++i) gt[i] += g[i];
      }
      if (wants(self, 1)) {
        double* gs = parent(self, 1).grad_buffer().ptr() + n * L * D;
        for (std::size_t i = 0; i < L * D; ++i) gs[i] += g[D + i];
      }
    }
  });
}

Var add_positional(const Var& seq, const Var& pos) {
  require_rank(seq, 3, "add_positional");
  const std::size_t N = seq.dim(0), LD = seq.dim(1) * seq.dim(2);
  if (pos.value().numel() != LD) throw DimensionError("add_positional: embedding size mismatch");
  Tensor out(seq.shape());
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t i = 0; i < LD; ++i) out[n * LD + i] = seq.value()[n * LD + i] + pos.value()[i];
  return make_result(std::move(out), {seq, pos}, [N, LD](Node& self) {
    if (wants(self, 0)) {
      auto& g = parent(self, 0).grad_buffer();
      for (std::size_t i = 0; i < N * LD; ++i) g[i] += self.grad[i];
    }
    if (wants(self, 1)) {
      auto& g = parent(self, 1).grad_buffer();
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t i = 0; i < LD; ++i) g[i] += self.grad[n * LD + i];
    }
  });
}

Var slice_tokens(const Var& seq, std::size_t begin, std::size_t end) {
  require_rank(seq, 3, "slice_tokens");
  const std::size_t N = seq.dim(0), L = seq.dim(1), D = seq.dim(2);
  if (begin >= end || end > L) throw DimensionError("slice_tokens: bad range");
  const std::size_t S = end - begin;
  Tensor out({N, S, D});
  for (std::size_t n = 0; n < N; ++n)
    std::copy_n(seq.value().ptr() + (n * L + begin) * D, S * D, out.ptr() + n * S * D);
  return make_result(std::move(out), {seq}, [N, L, D, begin, S](Node& self) {
    auto& g = parent(self, 0).grad_buffer();
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t i = 0; i < S * D; ++i) g[(n * L + begin) * D + i] += self.grad[n * S * D + i];
  });
}

Var concat_tokens(const Var& a, const Var& b) {
  require_rank(a, 3, "concat_tokens");
  require_rank(b, 3, "concat_tokens");
  const std::size_t N = a.dim(0), La = a.dim(1), Lb = b.dim(1), D = a.dim(2);
  if (b.dim(0) != N || b.dim(2) != D) throw DimensionError("concat_tokens: shape mismatch");
  Tensor out({N, La + Lb, D});
  for (std::size_t n = 0; n < N; ++n) {
    std::copy_n(a.value().ptr() + n * La * D, La * D, out.ptr() + n * (La + Lb) * D);
    std::copy_n(b.value().ptr() + n * Lb * D, Lb * D, out.ptr() + (n * (La + Lb) + La) * D);
  }
  return make_result(std::move(out), {a, b}, [N, La, Lb, D](Node& self) {
    for (std::size_t n = 0; n < N; ++n) {
      const double* g = self.grad.ptr() + n * (La + Lb) * D;
      if (wants(self, 0)) {
        double* ga = parent(self, 0).grad_buffer().ptr() + n * La * D;
        for (std::size_t i = 0; i < La * D; ++i) ga[i] += g[i];
      }
      if (wants(self, 1)) {
        double* gb = parent(self, 1).grad_buffer().ptr() + n * Lb * D;
        for (std::size_t i = 0; i < Lb * D; ++i) gb[i] += g[La * D + i];
      }
    }
  });
}

Var scale_red(const Var& img, const Var& weight) {
  require_rank(img, 4, "scale_red");
  const std::size_t N = img.dim(0), HW = img.dim(2) * img.dim(3);
  if (img.dim(1) != 3 || weight.value().numel() != N) throw DimensionError("scale_red: expects [N,3,H,W] and [N,1]");
  Tensor out = img.value();
  for (std::size_t n = 0; n < N; ++n) {
    const double s = 2.0 * weight.value()[n];
    double* red = out.ptr() + n * 3 * HW;
    for (std::size_t i = 0; i < HW; ++i) red[i] *= s;
  }
  return make_result(std::move(out), {img, weight}, [N, HW](Node& self) {
    const auto& in = parent(self, 0).value;
    const auto& w = parent(self, 1).value;
    for (std::size_t n = 0; n < N; ++n) {
      const double* g = self.grad.ptr() + n * 3 * HW;
      if (wants(self, 0)) {
        double* gi = parent(self, 0).grad_buffer().ptr() + n * 3 * HW;
        for (std::size_t i = 0; i < HW; ++i) gi[i] += 2.0 * w[n] * g[i];
        for (std::size_t i = HW; i < 3 * HW; ++i) gi[i] += g[i];
      }
      if (wants(self, 1)) {
        double acc = 0.0;
        const double* red = in.ptr() + n * 3 * HW;
        for (std::size_t i = 0; i < HW; ++i) acc += 2.0 * red[i] * g[i];
        parent(self, 1).grad_buffer()[n] += acc;
      }
    }
  });
}

namespace {
void check_ifm_shapes(const Var& img, const Var& t, const Var& ambient, const char* op) {
  require_rank(img, 4, op);
  require_same_shape(img, t, op);
  if (img.dim(1) != 3 || ambient.value().numel() != img.dim(0) * 3) {
    throw DimensionError(std::string(op) + ": expects [N,3,H,W] maps and [N,3] ambient");
  }
}
}  // namespace

Var ifm_enhance(const Var& degraded, const Var& t, const Var& ambient, double t_floor) {
  check_ifm_shapes(degraded, t, ambient, "ifm_enhance");
  if (!(t_floor > 0.0 && t_floor < 1.0)) throw ParameterError("ifm_enhance: t_floor must lie in (0,1)");
  const std::size_t NC = degraded.dim(0) * 3, HW = degraded.dim(2) * degraded.dim(3);
  Tensor out(degraded.shape());
  std::vector<bool> active(NC * HW);
  for (std::size_t p = 0; p < NC; ++p) {
    const double a = ambient.value()[p];
    for (std::size_t i = 0; i < HW; ++i) {
      const std::size_t k = p * HW + i;
      active[k] = BranchPin::take(t.value()[k] > t_floor);
      const double tt = active[k] ? t.value()[k] : t_floor;
      out[k] = (degraded.value()[k] - (1.0 - tt) * a) / tt;
    }
  }
  return make_result(std::move(out), {degraded, t, ambient},
                     [NC, HW, t_floor, active = std::move(active)](Node& self) {
    const auto& I = parent(self, 0).value;
    const auto& T = parent(self, 1).value;
    const auto& A = parent(self, 2).value;
    for (std::size_t p = 0; p < NC; ++p) {
      double ga = 0.0;
      for (std::size_t i = 0; i < HW; ++i) {
        const std::size_t k = p * HW + i;
        const double g = self.grad[k];
        const double tt = active[k] ? T[k] : t_floor;
        if (wants(self, 0)) parent(self, 0).grad_buffer()[k] += g / tt;
        if (wants(self, 1) && active[k]) parent(self, 1).grad_buffer()[k] += -g * (I[k] - A[p]) / (tt * tt);
        ga += g * (1.0 - 1.0 / tt);
      }
      if (wants(self, 2)) parent(self, 2).grad_buffer()[p] += ga;
    }
  });
}

Var ifm_degrade(const Var& clean, const Var& t, const Var& ambient) {
  check_ifm_shapes(clean, t, ambient, "ifm_degrade");
  const std::size_t NC = clean.dim(0) * 3, HW = clean.dim(2) * clean.dim(3);
  Tensor out(clean.shape());
  for (std::size_t p = 0; p < NC; ++p) {
    const double a = ambient.value()[p];
    for (std::size_t i = 0; i < HW; ++i) {
      const std::size_t k = p * HW + i;
      out[k] = clean.value()[k] * t.value()[k] + (1.0 - t.value()[k]) * a;
    }
  }
  return make_result(std::move(out), {clean, t, ambient}, [NC, HW](Node& self) {
    const auto& J = parent(self, 0).value;
    const auto& T = parent(self, 1).value;
    const auto& A = parent(self, 2).value;
    for (std::size_t p = 0; p < NC; ++p) {
      double ga = 0.0;
      for (std::size_t i = 0; i < HW; ++i) {
        const std::size_t k = p * HW + i;
        const double g = self.grad[k];
        if (wants(self, 0)) parent(self, 0).grad_buffer()[k] += g * T[k];
        if (wants(self, 1)) parent(self, 1).grad_buffer()[k] += g * (J[k] - A[p]);
        ga += g * (1.0 - T[k]);
      }
      if (wants(self, 2)) parent(self, 2).grad_buffer()[p] += ga;
    }
  });
}

Var mse(const Var& a, const Var& b) {
  require_same_shape(a, b, "mse");
  const std::size_t n = a.value().numel();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a.value()[i] - b.value()[i];
    acc += d * d;
  }
  return make_result(Tensor({1}, acc / static_cast<double>(n)), {a, b}, [n](Node& self) {
    const double s = 2.0 * self.grad[0] / static_cast<double>(n);
    const auto& av = parent(self, 0).value;
    const auto& bv = parent(self, 1).value;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = s * (av[i] - bv[i]);
      if (wants(self, 0)) parent(self, 0).grad_buffer()[i] += d;
      if (wants(self, 1)) parent(self, 1).grad_buffer()[i] -= d;
    }
  });
}

Var mse_to_ambient(const Var& map, const Var& ambient) {
  require_rank(map, 4, "mse_to_ambient");
  const std::size_t NC = map.dim(0) * map.dim(1), HW = map.dim(2) * map.dim(3);
  if (ambient.value().numel() != NC) throw DimensionError("mse_to_ambient: ambient must be [N,C]");
  const double total = static_cast<double>(NC * HW);
  double acc = 0.0;
  for (std::size_t p = 0; p < NC; ++p)
    for (std::size_t i = 0; i < HW; ++i) {
      const double d = map.value()[p * HW + i] - ambient.value()[p];
      acc += d * d;
    }
  return make_result(Tensor({1}, acc / total), {map, ambient}, [NC, HW, total](Node& self) {
    const double s = 2.0 * self.grad[0] / total;
    const auto& m = parent(self, 0).value;
    const auto& a = parent(self, 1).value;
    for (std::size_t p = 0; p < NC; ++p) {
      double ga = 0.0;
      for (std::size_t i = 0; i < HW; ++i) {
        const double d = s * (m[p * HW + i] - a[p]);
        if (wants(self, 0)) parent(self, 0).grad_buffer()[p * HW + i] += d;
        ga -= d;
      }
      if (wants(self, 1)) parent(self, 1).grad_buffer()[p] += ga;
    }
  });
}

Var gray_world_loss(const Var& img) {
  require_rank(img, 4, "gray_world_loss");
  const std::size_t N = img.dim(0), C = img.dim(1), HW = img.dim(2) * img.dim(3);
  std::vector<double> means(N * C);
  double acc = 0.0;
  for (std::size_t p = 0; p < N * C; ++p) {
    double s = 0.0;
    for (std::size_t i = 0; i < HW; ++i) s += img.value()[p * HW + i];
    means[p] = s / static_cast<double>(HW);
    acc += (means[p] - 0.5) * (means[p] - 0.5);
  }
  return make_result(Tensor({1}, acc / static_cast<double>(N)), {img}, [means, N, C, HW](Node& self) {
    auto& g = parent(self, 0).grad_buffer();
    for (std::size_t p = 0; p < N * C; ++p) {
      const double d = self.grad[0] * 2.0 * (means[p] - 0.5) / static_cast<double>(N * HW);
      for (std::size_t i = 0; i < HW; ++i) g[p * HW + i] += d;
    }
  });
}

}  // namespace pauie::nn::ops
