#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pauie/errors.hpp"

namespace pauie {

/// Planar multi-channel field of doubles: channel-major, then row-major.
/// `Tag` keeps images, transmission maps and depth maps distinct types.
template <std::size_t Channels, class Tag>
class Field {
 public:
  static constexpr std::size_t kChannels = Channels;

  Field() = default;
  Field(std::size_t height, std::size_t width, double fill = 0.0)
      : height_(height), width_(width), data_(Channels * height * width, fill) {}

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t pixels() const { return height_ * width_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t c, std::size_t y, std::size_t x) {
    return data_[(c * height_ + y) * width_ + x];
  }
  double operator()(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * height_ + y) * width_ + x];
  }

  std::span<double> channel(std::size_t c) {
    return {data_.data() + c * pixels(), pixels()};
  }
  std::span<const double> channel(std::size_t c) const {
    return {data_.data() + c * pixels(), pixels()};
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  template <class OtherTag>
  bool same_shape(const Field<Channels, OtherTag>& other) const {
    return height_ == other.height() && width_ == other.width();
  }
  template <std::size_t C2, class OtherTag>
  bool same_extent(const Field<C2, OtherTag>& other) const {
    return height_ == other.height() && width_ == other.width();
  }

  void clamp(double lo, double hi) {
    for (double& v : data_) v = std::clamp(v, lo, hi);
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const Field&, const Field&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> data_;
};

struct ImageTag {};
struct TransmissionTag {};
struct DepthTag {};
struct ScalarMapTag {};

/// RGB intensities in [0,1], channel order R, G, B.
using Image = Field<3, ImageTag>;
/// Per-channel transmittance in (0,1].
using TransmissionMaps = Field<3, TransmissionTag>;
/// Nonnegative scene distance, arbitrary consistent units.
using DepthMap = Field<1, DepthTag>;
/// Single-channel intermediate (dark channel, guide, etc.).
using ScalarMap = Field<1, ScalarMapTag>;

/// Spatially constant veiling light, one value per channel.
struct AmbientLight {
  std::array<double, 3> rgb{0.0, 0.0, 0.0};

  double operator[](std::size_t c) const { return rgb[c]; }
  double& operator[](std::size_t c) { return rgb[c]; }
  bool valid() const {
    return std::all_of(rgb.begin(), rgb.end(),
                       [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; });
  }
  friend bool operator==(const AmbientLight&, const AmbientLight&) = default;
};

/// Per-channel exponential attenuation rates.
struct AttenuationCoefficients {
  std::array<double, 3> beta{0.0, 0.0, 0.0};

  double operator[](std::size_t c) const { return beta[c]; }
  bool valid() const {
    return std::all_of(beta.begin(), beta.end(),
                       [](double v) { return std::isfinite(v) && v >= 0.0; });
  }
  // Red attenuates fastest underwater.
  bool red_dominant() const { return beta[0] >= beta[1] && beta[0] >= beta[2]; }
};

template <std::size_t C1, class T1, std::size_t C2, class T2>
void require_same_extent(const Field<C1, T1>& a, const Field<C2, T2>& b, const char* what) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw DimensionError(std::string(what) + ": shape mismatch (" + std::to_string(a.height()) +
                         "x" + std::to_string(a.width()) + " vs " + std::to_string(b.height()) +
                         "x" + std::to_string(b.width()) + ")");
  }
}

/// Image filled with a constant color.
inline Image constant_image(std::size_t h, std::size_t w, std::array<double, 3> rgb) {
  Image img(h, w);
  for (std::size_t c = 0; c < 3; ++c) std::fill(img.channel(c).begin(), img.channel(c).end(), rgb[c]);
  return img;
}

}  // namespace pauie
