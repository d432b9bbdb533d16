#pragma once

#include "pauie/image.hpp"

// Underwater image formation model:
//   I^c(x) = J^c(x) t^c(x) + (1 - t^c(x)) A^c,   t^c(x) = exp(-beta^c d(x))
namespace pauie::ifm {

inline constexpr double kDefaultTransmissionFloor = 0.05;

/// Forward degradation of a clean image. Output clamped to [0,1].
Image degrade(const Image& clean, const TransmissionMaps& t, const AmbientLight& a);

/// Model inversion J = (I - (1 - t') A) / t' with t' = max(t, t_floor), clamped to [0,1].
Image enhance(const Image& degraded, const TransmissionMaps& t, const AmbientLight& a,
              double t_floor = kDefaultTransmissionFloor);

/// Same inversion without the final clamp; used where losses need raw values.
Image enhance_unclamped(const Image& degraded, const TransmissionMaps& t, const AmbientLight& a,
                        double t_floor = kDefaultTransmissionFloor);

TransmissionMaps transmission_from_depth(const DepthMap& d, const AttenuationCoefficients& beta);

/// Controlled re-degradation I2 = alpha I1 + (1 - alpha) A1, clamped to [0,1].
/// Equivalent to degrading the same clean image with transmission alpha * t1.
Image synth_degrade(const Image& i1, const AmbientLight& a1, double alpha);

/// Constant transmission field.
TransmissionMaps uniform_transmission(std::size_t h, std::size_t w, double value);

}  // namespace pauie::ifm
