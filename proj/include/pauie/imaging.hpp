#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pauie/image.hpp"

// Small image-level helpers shared by priors, metrics and training.
namespace pauie::imaging {

/// Per-channel Gaussian blur, taps truncated at 4 sigma, edge-replicated borders.
template <std::size_t C, class Tag>
Field<C, Tag> gaussian_blur(const Field<C, Tag>& src, double sigma);

/// Per-pixel mean of the three channels.
ScalarMap channel_mean(const Image& img);

/// Bilinear resampling with pixel-center alignment (half-pixel offsets).
template <std::size_t C, class Tag>
Field<C, Tag> resize_bilinear(const Field<C, Tag>& src, std::size_t height, std::size_t width);

/// Linear-interpolated percentile, p in [0,100]. Reorders `values`.
double percentile(std::vector<double>& values, double p);

double mean(std::span<const double> values);

}  // namespace pauie::imaging
