#include <algorithm>
#include <cmath>

#include "pauie/kernels.hpp"

namespace pauie::kernels::omp {

namespace {

// Output rows y for which y + offset stays inside [0, n).
struct Range {
  long begin;
  long end;
};
Range valid_range(long n, long offset) { return {std::max(0L, -offset), std::min(n, n - offset)}; }

}  // namespace

void conv2d_forward(const ConvShape& s, std::span<const double> input, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> output) {
  const long pad = static_cast<long>(s.kernel / 2);
  const long H = static_cast<long>(s.height), W = static_cast<long>(s.width);
  const long K = static_cast<long>(s.kernel);
  const long C = static_cast<long>(s.in_channels), O = static_cast<long>(s.out_channels);
  const long plane = H * W;
  const long jobs = static_cast<long>(s.batch) * O;
#pragma omp parallel for schedule(static)
  for (long job = 0; job < jobs; ++job) {
    const long n = job / O, o = job % O;
    double* out = output.data() + job * plane;
    std::fill(out, out + plane, bias.empty() ? 0.0 : bias[o]);
    for (long c = 0; c < C; ++c) {
      const double* in = input.data() + (n * C + c) * plane;
      const double* wk = weight.data() + (o * C + c) * K * K;
      for (long ky = 0; ky < K; ++ky) {
        const Range ry = valid_range(H, ky - pad);
        for (long kx = 0; kx < K; ++kx) {
          const Range rx = valid_range(W, kx - pad);
          const double wv = wk[ky * K + kx];
          for (long y = ry.begin; y < ry.end; ++y) {
            double* orow = out + y * W;
            const double* irow = in + (y + ky - pad) * W + (kx - pad);
            for (long x = rx.begin; x < rx.end; ++x) orow[x] += wv * irow[x];
          }
        }
      }
    }
  }
}

void conv2d_backward_input(const ConvShape& s, std::span<const double> grad_output,
                           std::span<const double> weight, std::span<double> grad_input) {
  const long pad = static_cast<long>(s.kernel / 2);
  const long H = static_cast<long>(s.height), W = static_cast<long>(s.width);
  const long K = static_cast<long>(s.kernel);
  const long C = static_cast<long>(s.in_channels), O = static_cast<long>(s.out_channels);
  const long plane = H * W;
  const long jobs = static_cast<long>(s.batch) * C;
#pragma omp parallel for schedule(static)
  for (long job = 0; job < jobs; ++job) {
    const long n = job / C, c = job % C;
    double* gin = grad_input.data() + job * plane;
    for (long o = 0; o < O; ++o) {
      const double* gout = grad_output.data() + (n * O + o) * plane;
      const double* wk = weight.data() + (o * C + c) * K * K;
      for (long ky = 0; ky < K; ++ky) {
        const Range ry = valid_range(H, ky - pad);
        for (long kx = 0; kx < K; ++kx) {
          const Range rx = valid_range(W, kx - pad);
          const double wv = wk[ky * K + kx];
          for (long y = ry.begin; y < ry.end; ++y) {
            const double* grow = gout + y * W;
            double* irow = gin + (y + ky - pad) * W + (kx - pad);
            for (long x = rx.begin; x < rx.end; ++x) irow[x] += wv * grow[x];
          }
        }
      }
    }
  }
}

void conv2d_backward_weight(const ConvShape& s, std::span<const double> input,
                            std::span<const double> grad_output, std::span<double> grad_weight,
                            std::span<double> grad_bias) {
  const long pad = static_cast<long>(s.kernel / 2);
  const long H = static_cast<long>(s.height), W = static_cast<long>(s.width);
  const long K = static_cast<long>(s.kernel);
  const long C = static_cast<long>(s.in_channels), O = static_cast<long>(s.out_channels);
  const long N = static_cast<long>(s.batch);
  const long plane = H * W;
#pragma omp parallel for collapse(2) schedule(static)
  for (long o = 0; o < O; ++o) {
    for (long c = 0; c < C; ++c) {
      double* gw = grad_weight.data() + (o * C + c) * K * K;
      for (long ky = 0; ky < K; ++ky) {
        const Range ry = valid_range(H, ky - pad);
        for (long kx = 0; kx < K; ++kx) {
          const Range rx = valid_range(W, kx - pad);
          double acc = 0.0;
          for (long n = 0; n < N; ++n) {
            const double* gout = grad_output.data() + (n * O + o) * plane;
            const double* in = input.data() + (n * C + c) * plane;
            for (long y = ry.begin; y < ry.end; ++y) {
              const double* grow = gout + y * W;
              const double* irow = in + (y + ky - pad) * W + (kx - pad);
              for (long x = rx.begin; x < rx.end; ++x) acc += grow[x] * irow[x];
            }
          }
          gw[ky * K + kx] += acc;
        }
      }
    }
  }
  if (grad_bias.empty()) return;
#pragma omp parallel for schedule(static)
  for (long o = 0; o < O; ++o) {
    double acc = 0.0;
    for (long n = 0; n < N; ++n) {
      const double* gout = grad_output.data() + (n * O + o) * plane;
      for (long i = 0; i < plane; ++i) acc += gout[i];
    }
    grad_bias[o] += acc;
  }
}

void gaussian_blur(std::span<const double> src, std::size_t h, std::size_t w, double sigma,
                   std::span<double> dst) {
  const auto taps = gaussian_taps(sigma);
  const long r = static_cast<long>(taps.size() / 2);
  const long H = static_cast<long>(h), W = static_cast<long>(w);
  std::vector<double> tmp(h * w);
#pragma omp parallel
  {
    std::vector<double> line(static_cast<std::size_t>(std::max(H, W) + 2 * r));
#pragma omp for schedule(static)
    for (long y = 0; y < H; ++y) {
      // Edge-replicated copy of the row so the tap loop is branch-free.
      for (long i = 0; i < W + 2 * r; ++i) line[i] = src[y * W + std::clamp(i - r, 0L, W - 1)];
      for (long x = 0; x < W; ++x) {
        double acc = 0.0;
        for (long k = 0; k <= 2 * r; ++k) acc += taps[k] * line[x + k];
        tmp[y * W + x] = acc;
      }
    }
#pragma omp for schedule(static)
    for (long x = 0; x < W; ++x) {
      for (long i = 0; i < H + 2 * r; ++i) line[i] = tmp[std::clamp(i - r, 0L, H - 1) * W + x];
      for (long y = 0; y < H; ++y) {
        double acc = 0.0;
        for (long k = 0; k <= 2 * r; ++k) acc += taps[k] * line[y + k];
        dst[y * W + x] = acc;
      }
    }
  }
}

void min_filter(std::span<const double> src, std::size_t h, std::size_t w, std::size_t radius,
                std::span<double> dst) {
  const long r = static_cast<long>(radius);
  const long H = static_cast<long>(h), W = static_cast<long>(w);
  std::vector<double> tmp(h * w);
#pragma omp parallel for schedule(static)
  for (long y = 0; y < H; ++y)
    for (long x = 0; x < W; ++x) {
      double m = src[y * W + x];
      for (long xx = std::max(0L, x - r); xx <= std::min(W - 1, x + r); ++xx) m = std::min(m, src[y * W + xx]);
      tmp[y * W + x] = m;
    }
#pragma omp parallel for schedule(static)
  for (long y = 0; y < H; ++y)
    for (long x = 0; x < W; ++x) {
      double m = tmp[y * W + x];
      for (long yy = std::max(0L, y - r); yy <= std::min(H - 1, y + r); ++yy) m = std::min(m, tmp[yy * W + x]);
      dst[y * W + x] = m;
    }
}

void box_mean(std::span<const double> src, std::size_t h, std::size_t w, std::size_t radius,
              std::span<double> dst) {
  const long r = static_cast<long>(radius);
  const long H = static_cast<long>(h), W = static_cast<long>(w);
  // Integral image with a zero border row/column.
  std::vector<double> integral(static_cast<std::size_t>((H + 1) * (W + 1)), 0.0);
  for (long y = 0; y < H; ++y) {
    double row = 0.0;
    for (long x = 0; x < W; ++x) {
      row += src[y * W + x];
      integral[(y + 1) * (W + 1) + x + 1] = integral[y * (W + 1) + x + 1] + row;
    }
  }
#pragma omp parallel for schedule(static)
  for (long y = 0; y < H; ++y) {
    const long y0 = std::max(0L, y - r), y1 = std::min(H - 1, y + r) + 1;
    for (long x = 0; x < W; ++x) {
      const long x0 = std::max(0L, x - r), x1 = std::min(W - 1, x + r) + 1;
      const double sum = integral[y1 * (W + 1) + x1] - integral[y0 * (W + 1) + x1] -
                         integral[y1 * (W + 1) + x0] + integral[y0 * (W + 1) + x0];
      dst[y * W + x] = sum / static_cast<double>((y1 - y0) * (x1 - x0));
    }
  }
}

}  // namespace pauie::kernels::omp
