#include "pauie/priors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pauie/imaging.hpp"
#include "pauie/kernels.hpp"

namespace pauie::priors {

namespace {

void check_patch(std::size_t patch) {
  if (patch == 0 || patch % 2 == 0) {
    throw ParameterError("dark_channel: patch must be odd and >= 1, got " + std::to_string(patch));
  }
}

ScalarMap channel_min(const Image& img, DarkChannelKind kind) {
  ScalarMap out(img.height(), img.width());
  auto o = out.channel(0);
  auto r = img.channel(0), g = img.channel(1), b = img.channel(2);
  for (std::size_t i = 0; i < o.size(); ++i) {
    const double gb = std::min(g[i], b[i]);
    o[i] = kind == DarkChannelKind::kRgb ? std::min(r[i], gb) : gb;
  }
  return out;
}

PriorEstimate dark_channel_estimate(const Image& img, const DcpParams& params, DarkChannelKind kind) {
  params.validate();
  const std::size_t n = img.pixels();
  if (n == 0) throw DimensionError("dark channel estimate: empty image");

  // Ambient light: mean color of the brightest pixels of the dark channel.
  const ScalarMap dark = dark_channel(img, params.patch, kind);
  auto dv = dark.channel(0);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const auto count = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(params.top_frac * static_cast<double>(n))));
  std::partial_sort(order.begin(), order.begin() + static_cast<long>(count), order.end(),
                    [&](std::size_t a, std::size_t b) { return dv[a] > dv[b] || (dv[a] == dv[b] && a < b); });

  PriorEstimate est;
  est.method = kind == DarkChannelKind::kRgb ? "dcp" : "udcp";
  for (std::size_t c = 0; c < 3; ++c) {
    double acc = 0.0;
    for (std::size_t k = 0; k < count; ++k) acc += img.channel(c)[order[k]];
    est.a[c] = acc / static_cast<double>(count);
    if (est.a[c] <= 0.0) {
      est.a[c] = 1e-6;
      est.ambient_clamped = true;
    }
  }

  Image normalized(img.height(), img.width());
  for (std::size_t c = 0; c < 3; ++c) {
    auto src = img.channel(c);
    auto dst = normalized.channel(c);
    for (std::size_t i = 0; i < n; ++i) dst[i] = src[i] / est.a[c];
  }
  ScalarMap raw = dark_channel(normalized, params.patch, kind);
  for (double& v : raw.channel(0)) v = 1.0 - params.omega * v;

  ScalarMap refined = guided_filter(imaging::channel_mean(img), raw, params.guided_radius, params.guided_eps);
  est.t = TransmissionMaps(img.height(), img.width());
  auto rv = refined.channel(0);
  for (std::size_t c = 0; c < 3; ++c) {
    auto tc = est.t.channel(c);
    for (std::size_t i = 0; i < n; ++i) tc[i] = std::clamp(rv[i], params.t_floor, 1.0);
  }
  return est;
}

}  // namespace

void DcpParams::validate() const {
  check_patch(patch);
  if (!(omega > 0.0 && omega <= 1.0)) throw ParameterError("dcp: omega must lie in (0,1]");
  if (!(top_frac > 0.0 && top_frac <= 1.0)) throw ParameterError("dcp: top_frac must lie in (0,1]");
  if (!(guided_eps > 0.0)) throw ParameterError("dcp: guided filter eps must be positive");
  if (!(t_floor > 0.0 && t_floor < 1.0)) throw ParameterError("dcp: t_floor must lie in (0,1)");
}

ScalarMap dark_channel(const Image& img, std::size_t patch, DarkChannelKind kind) {
  check_patch(patch);
  const ScalarMap mins = channel_min(img, kind);
  ScalarMap out(img.height(), img.width());
  kernels::omp::min_filter(mins.channel(0), img.height(), img.width(), patch / 2, out.channel(0));
  return out;
}

ScalarMap guided_filter(const ScalarMap& guide, const ScalarMap& src, std::size_t radius, double eps) {
  require_same_extent(guide, src, "guided_filter");
  const std::size_t h = guide.height(), w = guide.width(), n = guide.pixels();
  auto box = [&](std::span<const double> in) {
    std::vector<double> out(n);
    kernels::omp::box_mean(in, h, w, radius, out);
    return out;
  };
  auto I = guide.channel(0);
  auto p = src.channel(0);
  std::vector<double> ip(n), ii(n);
  for (std::size_t i = 0; i < n; ++i) {
    ip[i] = I[i] * p[i];
    ii[i] = I[i] * I[i];
  }
  const auto mean_i = box(I), mean_p = box(p), mean_ip = box(ip), mean_ii = box(ii);
  std::vector<double> a(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double cov = mean_ip[i] - mean_i[i] * mean_p[i];
    const double var = mean_ii[i] - mean_i[i] * mean_i[i];
    a[i] = cov / (var + eps);
    b[i] = mean_p[i] - a[i] * mean_i[i];
  }
  const auto mean_a = box(a), mean_b = box(b);
  ScalarMap out(h, w);
  auto o = out.channel(0);
  for (std::size_t i = 0; i < n; ++i) o[i] = mean_a[i] * I[i] + mean_b[i];
  return out;
}

PriorEstimate dcp_estimate(const Image& img, const DcpParams& params) {
  return dark_channel_estimate(img, params, DarkChannelKind::kRgb);
}

PriorEstimate udcp_estimate(const Image& img, const DcpParams& params) {
  return dark_channel_estimate(img, params, DarkChannelKind::kGreenBlue);
}

Image hist_equalize(const Image& img, std::size_t bins) {
  if (bins < 2) throw ParameterError("hist_equalize: bins must be >= 2");
  Image out(img.height(), img.width());
  const std::size_t n = img.pixels();
  auto bin_of = [bins](double v) {
    const auto b = static_cast<long>(std::floor(std::clamp(v, 0.0, 1.0) * static_cast<double>(bins)));
    return static_cast<std::size_t>(std::min<long>(b, static_cast<long>(bins) - 1));
  };
  for (std::size_t c = 0; c < 3; ++c) {
    std::vector<std::size_t> hist(bins, 0);
    for (double v : img.channel(c)) ++hist[bin_of(v)];
    std::vector<double> cdf(bins);
    std::size_t running = 0;
    for (std::size_t b = 0; b < bins; ++b) {
      running += hist[b];
      cdf[b] = static_cast<double>(running) / static_cast<double>(n);
    }
    auto src = img.channel(c);
    auto dst = out.channel(c);
    for (std::size_t i = 0; i < n; ++i) dst[i] = cdf[bin_of(src[i])];
  }
  return out;
}

Image retinex_msr(const Image& img, const RetinexParams& params) {
  if (params.scales.empty()) throw ParameterError("retinex_msr: at least one scale required");
  for (double s : params.scales) {
    if (!(s > 0.0)) throw ParameterError("retinex_msr: scales must be positive");
  }
  const std::size_t n = img.pixels();
  Image log_ratio(img.height(), img.width(), 0.0);
  for (double sigma : params.scales) {
    const Image blurred = imaging::gaussian_blur(img, sigma);
    for (std::size_t c = 0; c < 3; ++c) {
      auto src = img.channel(c);
      auto bl = blurred.channel(c);
      auto acc = log_ratio.channel(c);
      for (std::size_t i = 0; i < n; ++i) {
        acc[i] += std::log(src[i] + params.eps) - std::log(bl[i] + params.eps);
      }
    }
  }
  const double inv_scales = 1.0 / static_cast<double>(params.scales.size());
  Image out(img.height(), img.width());
  for (std::size_t c = 0; c < 3; ++c) {
    auto r = log_ratio.channel(c);
    for (double& v : r) v *= inv_scales;
    std::vector<double> sorted(r.begin(), r.end());
    const double lo = imaging::percentile(sorted, params.low_percentile);
    const double hi = imaging::percentile(sorted, params.high_percentile);
    auto o = out.channel(c);
    if (hi - lo < 1e-12) {
      std::fill(o.begin(), o.end(), 0.5);
      continue;
    }
    for (std::size_t i = 0; i < n; ++i) o[i] = std::clamp((r[i] - lo) / (hi - lo), 0.0, 1.0);
  }
  return out;
}

GrayWorldResult gray_world(const Image& img) {
  GrayWorldResult res;
  res.image = img;
  for (std::size_t c = 0; c < 3; ++c) {
    const double m = imaging::mean(img.channel(c));
    double s = m > 0.0 ? 0.5 / m : kGrayWorldMaxScale;
    if (s >= kGrayWorldMaxScale) {
      s = kGrayWorldMaxScale;
      res.scale_capped = true;
    }
    res.scale[c] = s;
    for (double& v : res.image.channel(c)) v = std::clamp(v * s, 0.0, 1.0);
  }
  return res;
}

}  // namespace pauie::priors
