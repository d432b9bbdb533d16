#include "pauie/ifm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace pauie::ifm {

Image degrade(const Image& clean, const TransmissionMaps& t, const AmbientLight& a) {
  require_same_extent(clean, t, "degrade");
  Image out(clean.height(), clean.width());
  for (std::size_t c = 0; c < 3; ++c) {
    auto j = clean.channel(c);
    auto tc = t.channel(c);
    auto o = out.channel(c);
    const double ac = a[c];
    for (std::size_t i = 0; i < o.size(); ++i) {
      o[i] = std::clamp(j[i] * tc[i] + (1.0 - tc[i]) * ac, 0.0, 1.0);
    }
  }
  return out;
}

Image enhance_unclamped(const Image& degraded, const TransmissionMaps& t, const AmbientLight& a,
                        double t_floor) {
  require_same_extent(degraded, t, "enhance");
  if (!(t_floor > 0.0 && t_floor < 1.0)) {
    throw ParameterError("enhance: t_floor must lie in (0,1), got " + std::to_string(t_floor));
  }
  Image out(degraded.height(), degraded.width());
  for (std::size_t c = 0; c < 3; ++c) {
    auto in = degraded.channel(c);
    auto tc = t.channel(c);
    auto o = out.channel(c);
    const double ac = a[c];
    for (std::size_t i = 0; i < o.size(); ++i) {
      const double tt = std::max(tc[i], t_floor);
      o[i] = (in[i] - (1.0 - tt) * ac) / tt;
    }
  }
  return out;
}

Image enhance(const Image& degraded, const TransmissionMaps& t, const AmbientLight& a,
              double t_floor) {
  Image out = enhance_unclamped(degraded, t, a, t_floor);
  out.clamp(0.0, 1.0);
  return out;
}

TransmissionMaps transmission_from_depth(const DepthMap& d, const AttenuationCoefficients& beta) {
  if (!beta.valid()) throw ParameterError("transmission_from_depth: beta must be finite and >= 0");
  TransmissionMaps t(d.height(), d.width());
  auto depth = d.channel(0);
  for (double v : depth) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw DomainError("transmission_from_depth: depth must be finite and nonnegative");
    }
  }
  for (std::size_t c = 0; c < 3; ++c) {
    auto tc = t.channel(c);
    for (std::size_t i = 0; i < tc.size(); ++i) {
      // Underflow to 0 would break the (0,1] invariant.
      tc[i] = std::max(std::exp(-beta[c] * depth[i]), std::numeric_limits<double>::min());
    }
  }
  return t;
}

Image synth_degrade(const Image& i1, const AmbientLight& a1, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ParameterError("synth_degrade: alpha must lie in (0,1), got " + std::to_string(alpha));
  }
  Image out(i1.height(), i1.width());
  for (std::size_t c = 0; c < 3; ++c) {
    auto in = i1.channel(c);
    auto o = out.channel(c);
    const double bias = (1.0 - alpha) * a1[c];
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::clamp(alpha * in[i] + bias, 0.0, 1.0);
  }
  return out;
}

TransmissionMaps uniform_transmission(std::size_t h, std::size_t w, double value) {
  return TransmissionMaps(h, w, value);
}

}  // namespace pauie::ifm
