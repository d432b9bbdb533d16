#include <algorithm>
#include <cmath>

#include "pauie/kernels.hpp"

namespace pauie::kernels {

std::vector<double> gaussian_taps(double sigma, double truncate) {
  const auto radius = static_cast<std::size_t>(std::ceil(truncate * sigma));
  std::vector<double> taps(2 * radius + 1);
  double sum = 0.0;
  for (std::size_t i = 0; i < taps.size(); ++i) {
    const double d = static_cast<double>(i) - static_cast<double>(radius);
    taps[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += taps[i];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

namespace ref {

namespace {
long clamp_index(long i, std::size_t n) { return std::clamp<long>(i, 0, static_cast<long>(n) - 1); }
}  // namespace

void conv2d_forward(const ConvShape& s, std::span<const double> input, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> output) {
  const long pad = static_cast<long>(s.kernel / 2);
  const long H = static_cast<long>(s.height), W = static_cast<long>(s.width);
  const long K = static_cast<long>(s.kernel);
  for (std::size_t n = 0; n < s.batch; ++n)
    for (std::size_t o = 0; o < s.out_channels; ++o)
      for (long y = 0; y < H; ++y)
        for (long x = 0; x < W; ++x) {
          double acc = bias.empty() ? 0.0 : bias[o];
          for (std::size_t c = 0; c < s.in_channels; ++c)
            for (long ky = 0; ky < K; ++ky)
              for (long kx = 0; kx < K; ++kx) {
                const long iy = y + ky - pad, ix = x + kx - pad;
                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                acc += weight[((o * s.in_channels + c) * K + ky) * K + kx] *
                       input[((n * s.in_channels + c) * H + iy) * W + ix];
              }
          output[((n * s.out_channels + o) * H + y) * W + x] = acc;
        }
}

void conv2d_backward_input(const ConvShape& s, std::span<const double> grad_output,
                           std::span<const double> weight, std::span<double> grad_input) {
  const long pad = static_cast<long>(s.kernel / 2);
  const long H = static_cast<long>(s.height), W = static_cast<long>(s.width);
  const long K = static_cast<long>(s.kernel);
  for (std::size_t n = 0; n < s.batch; ++n)
    for (std::size_t o = 0; o < s.out_channels; ++o)
      for (long y = 0; y < H; ++y)
        for (long x = 0; x < W; ++x) {
          const double g = grad_output[((n * s.out_channels + o) * H + y) * W + x];
          for (std::size_t c = 0; c < s.in_channels; ++c)
            for (long ky = 0; ky < K; ++ky)
              for (long kx = 0; kx < K; ++kx) {
                const long iy = y + ky - pad, ix = x + kx - pad;
                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                grad_input[((n * s.in_channels + c) * H + iy) * W + ix] +=
                    g * weight[((o * s.in_channels + c) * K + ky) * K + kx];
              }
        }
}

void conv2d_backward_weight(const ConvShape& s, std::span<const double> input,
                            std::span<const double> grad_output, std::span<double> grad_weight,
                            std::span<double> grad_bias) {
  const long pad = static_cast<long>(s.kernel / 2);
  const long H = static_cast<long>(s.height), W = static_cast<long>(s.width);
  const long K = static_cast<long>(s.kernel);
  for (std::size_t n = 0; n < s.batch; ++n)
    for (std::size_t o = 0; o < s.out_channels; ++o)
      for (long y = 0; y < H; ++y)
        for (long x = 0; x < W; ++x) {
          const double g = grad_output[((n * s.out_channels + o) * H + y) * W + x];
          if (!grad_bias.empty()) grad_bias[o] += g;
          for (std::size_t c = 0; c < s.in_channels; ++c)
            for (long ky = 0; ky < K; ++ky)
              for (long kx = 0; kx < K; ++kx) {
                const long iy = y + ky - pad, ix = x + kx - pad;
                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                grad_weight[((o * s.in_channels + c) * K + ky) * K + kx] +=
                    g * input[((n * s.in_channels + c) * H + iy) * W + ix];
              }
        }
}

void gaussian_blur(std::span<const double> src, std::size_t h, std::size_t w, double sigma,
                   std::span<double> dst) {
  const auto taps = gaussian_taps(sigma);
  const long r = static_cast<long>(taps.size() / 2);
  std::vector<double> tmp(h * w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (long k = -r; k <= r; ++k)
        acc += taps[k + r] * src[y * w + clamp_index(static_cast<long>(x) + k, w)];
      tmp[y * w + x] = acc;
    }
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (long k = -r; k <= r; ++k)
        acc += taps[k + r] * tmp[clamp_index(static_cast<long>(y) + k, h) * w + x];
      dst[y * w + x] = acc;
    }
}

void min_filter(std::span<const double> src, std::size_t h, std::size_t w, std::size_t radius,
                std::span<double> dst) {
  const long r = static_cast<long>(radius);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double m = src[y * w + x];
      for (long dy = -r; dy <= r; ++dy)
        for (long dx = -r; dx <= r; ++dx) {
          const long yy = clamp_index(static_cast<long>(y) + dy, h);
          const long xx = clamp_index(static_cast<long>(x) + dx, w);
          m = std::min(m, src[yy * w + xx]);
        }
      dst[y * w + x] = m;
    }
}

void box_mean(std::span<const double> src, std::size_t h, std::size_t w, std::size_t radius,
              std::span<double> dst) {
  const long r = static_cast<long>(radius);
  for (long y = 0; y < static_cast<long>(h); ++y)
    for (long x = 0; x < static_cast<long>(w); ++x) {
      double acc = 0.0;
      std::size_t count = 0;
      for (long yy = std::max(0L, y - r); yy <= std::min<long>(h - 1, y + r); ++yy)
        for (long xx = std::max(0L, x - r); xx <= std::min<long>(w - 1, x + r); ++xx) {
          acc += src[yy * w + xx];
          ++count;
        }
      dst[y * w + x] = acc / static_cast<double>(count);
    }
}

}  // namespace ref
}  // namespace pauie::kernels
