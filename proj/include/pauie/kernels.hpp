#pragma once

#include <cstddef>
#include <span>
#include <vector>

// Data-parallel inner loops. Every kernel exists twice: `ref` is the plain
// serial formulation kept as the test oracle, `omp` is the OpenMP version the
// library calls. Both must agree to rounding (tests/test_kernels.cpp).
namespace pauie::kernels {

/// NCHW convolution, square odd kernel, stride 1, zero "same" padding.
struct ConvShape {
  std::size_t batch = 1;
  std::size_t in_channels = 1;
  std::size_t height = 1;
  std::size_t width = 1;
  std::size_t out_channels = 1;
  std::size_t kernel = 3;

  std::size_t input_size() const { return batch * in_channels * height * width; }
  std::size_t output_size() const { return batch * out_channels * height * width; }
  std::size_t weight_size() const { return out_channels * in_channels * kernel * kernel; }
};

// 1-D Gaussian taps, truncated at `truncate * sigma`, normalized to sum 1.
std::vector<double> gaussian_taps(double sigma, double truncate = 4.0);

namespace ref {

void conv2d_forward(const ConvShape& s, std::span<const double> input, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> output);
// Accumulates into grad_input.
void conv2d_backward_input(const ConvShape& s, std::span<const double> grad_output,
                           std::span<const double> weight, std::span<double> grad_input);
// Accumulates into grad_weight and grad_bias.
void conv2d_backward_weight(const ConvShape& s, std::span<const double> input,
                            std::span<const double> grad_output, std::span<double> grad_weight,
                            std::span<double> grad_bias);

// Separable Gaussian with edge replication.
void gaussian_blur(std::span<const double> src, std::size_t h, std::size_t w, double sigma,
                   std::span<double> dst);
// Square (2r+1)^2 minimum with edge replication.
void min_filter(std::span<const double> src, std::size_t h, std::size_t w, std::size_t radius,
                std::span<double> dst);
// Square (2r+1)^2 mean over the part of the window inside the image.
void box_mean(std::span<const double> src, std::size_t h, std::size_t w, std::size_t radius,
              std::span<double> dst);

}  // namespace ref

namespace omp {

void conv2d_forward(const ConvShape& s, std::span<const double> input, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> output);
void conv2d_backward_input(const ConvShape& s, std::span<const double> grad_output,
                           std::span<const double> weight, std::span<double> grad_input);
void conv2d_backward_weight(const ConvShape& s, std::span<const double> input,
                            std::span<const double> grad_output, std::span<double> grad_weight,
                            std::span<double> grad_bias);

void gaussian_blur(std::span<const double> src, std::size_t h, std::size_t w, double sigma,
                   std::span<double> dst);
void min_filter(std::span<const double> src, std::size_t h, std::size_t w, std::size_t radius,
                std::span<double> dst);
void box_mean(std::span<const double> src, std::size_t h, std::size_t w, std::size_t radius,
              std::span<double> dst);

}  // namespace omp

}  // namespace pauie::kernels
