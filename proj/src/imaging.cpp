#include "pauie/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pauie/kernels.hpp"

namespace pauie::imaging {

template <std::size_t C, class Tag>
Field<C, Tag> gaussian_blur(const Field<C, Tag>& src, double sigma) {
  if (!(sigma > 0.0)) throw ParameterError("gaussian_blur: sigma must be positive");
  Field<C, Tag> out(src.height(), src.width());
  for (std::size_t c = 0; c < C; ++c) {
    kernels::omp::gaussian_blur(src.channel(c), src.height(), src.width(), sigma, out.channel(c));
  }
  return out;
}

ScalarMap channel_mean(const Image& img) {
  ScalarMap out(img.height(), img.width());
  auto o = out.channel(0);
  auto r = img.channel(0), g = img.channel(1), b = img.channel(2);
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = (r[i] + g[i] + b[i]) / 3.0;
  return out;
}

template <std::size_t C, class Tag>
Field<C, Tag> resize_bilinear(const Field<C, Tag>& src, std::size_t height, std::size_t width) {
  if (height == 0 || width == 0 || src.empty()) throw DimensionError("resize_bilinear: empty extent");
  if (height == src.height() && width == src.width()) return src;
  Field<C, Tag> out(height, width);
  const double sy = static_cast<double>(src.height()) / static_cast<double>(height);
  const double sx = static_cast<double>(src.width()) / static_cast<double>(width);
  const long H = static_cast<long>(src.height()), W = static_cast<long>(src.width());
  for (std::size_t y = 0; y < height; ++y) {
    const double fy = std::max(0.0, (static_cast<double>(y) + 0.5) * sy - 0.5);
    const long y0 = std::min(static_cast<long>(fy), H - 1);
    const long y1 = std::min(y0 + 1, H - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < width; ++x) {
      const double fx = std::max(0.0, (static_cast<double>(x) + 0.5) * sx - 0.5);
      const long x0 = std::min(static_cast<long>(fx), W - 1);
      const long x1 = std::min(x0 + 1, W - 1);
      const double wx = fx - static_cast<double>(x0);
      for (std::size_t c = 0; c < C; ++c) {
        const double top = src(c, y0, x0) * (1.0 - wx) + src(c, y0, x1) * wx;
        const double bot = src(c, y1, x0) * (1.0 - wx) + src(c, y1, x1) * wx;
        out(c, y, x) = top * (1.0 - wy) + bot * wy;
      }
    }
  }
  return out;
}

double percentile(std::vector<double>& values, double p) {
  if (values.empty()) throw UndefinedError("percentile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(p, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + (values[hi] - values[lo]) * frac;
}

double mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

template Image gaussian_blur(const Image&, double);
template ScalarMap gaussian_blur(const ScalarMap&, double);
template Image resize_bilinear(const Image&, std::size_t, std::size_t);
template TransmissionMaps resize_bilinear(const TransmissionMaps&, std::size_t, std::size_t);
template DepthMap resize_bilinear(const DepthMap&, std::size_t, std::size_t);

}  // namespace pauie::imaging
