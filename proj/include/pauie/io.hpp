#pragma once

#include <filesystem>

#include "pauie/image.hpp"

// Image files. Decoded samples are divided by the type's maximum (255 for
// 8-bit, 65535 for 16-bit); no gamma handling. Outputs are 8-bit PNG.
namespace pauie::io {

Image read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const Image& img);

/// Single-channel depth: normalized samples times `scale`.
DepthMap read_depth(const std::filesystem::path& path, double scale = 1.0);
/// 16-bit PNG of depth / scale, clamped to [0,1].
void write_depth(const std::filesystem::path& path, const DepthMap& d, double scale = 1.0);

/// Transmission visualization: the three maps as an RGB image.
void write_transmission(const std::filesystem::path& path, const TransmissionMaps& t);

/// The values an 8-bit encode/decode round trip would produce.
Image quantize8(const Image& img);

/// Extensions accepted as image inputs (lower case, with dot).
bool is_image_file(const std::filesystem::path& path);

}  // namespace pauie::io
