#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "pauie/ifm.hpp"
#include "pauie/image.hpp"

// Classical prior-based estimators and enhancers used as baselines.
namespace pauie::priors {

enum class DarkChannelKind {
  kRgb,        // DCP: minimum over R, G, B
  kGreenBlue,  // UDCP: red excluded
};

/// Local minimum over a patch x patch window of the per-pixel channel minimum.
/// Borders are edge-replicated. `patch` must be odd and >= 1.
ScalarMap dark_channel(const Image& img, std::size_t patch, DarkChannelKind kind = DarkChannelKind::kRgb);

/// Edge-preserving guided filter (gray guide), clipped-window box means.
ScalarMap guided_filter(const ScalarMap& guide, const ScalarMap& src, std::size_t radius, double eps);

struct DcpParams {
  std::size_t patch = 15;
  double omega = 0.95;
  double top_frac = 0.001;
  std::size_t guided_radius = 40;
  double guided_eps = 1e-3;
  double t_floor = ifm::kDefaultTransmissionFloor;

  void validate() const;
};

struct PriorEstimate {
  TransmissionMaps t;
  AmbientLight a;
  std::string method;
  // Set when an ambient component was zero and had to be replaced.
  bool ambient_clamped = false;
};

PriorEstimate dcp_estimate(const Image& img, const DcpParams& params = {});
PriorEstimate udcp_estimate(const Image& img, const DcpParams& params = {});

/// Per-channel global histogram equalization through the discrete CDF.
Image hist_equalize(const Image& img, std::size_t bins = 256);

struct RetinexParams {
  std::vector<double> scales{15.0, 80.0, 250.0};
  double eps = 1e-6;
  double low_percentile = 1.0;
  double high_percentile = 99.0;
};

/// Multi-scale Retinex, per-channel percentile stretch to [0,1].
/// A channel with no dynamic range maps to 0.5.
Image retinex_msr(const Image& img, const RetinexParams& params = {});

inline constexpr double kGrayWorldMaxScale = 100.0;

struct GrayWorldResult {
  Image image;
  std::array<double, 3> scale{1.0, 1.0, 1.0};
  // True if any channel scale hit kGrayWorldMaxScale.
  bool scale_capped = false;
};

/// Scales each channel by 0.5 / mean(channel), clamped to [0,1].
GrayWorldResult gray_world(const Image& img);

}  // namespace pauie::priors
