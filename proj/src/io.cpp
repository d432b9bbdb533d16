#include "pauie/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace pauie::io {

namespace {

cv::Mat decode(const std::filesystem::path& path, int flags) {
  if (!std::filesystem::is_regular_file(path)) throw IoError("no such file: " + path.string());
  cv::Mat m;
  try {
    m = cv::imread(path.string(), flags);
  } catch (const cv::Exception& e) {
    throw IoError("cannot decode " + path.string() + ": " + e.what());
  }
  if (m.empty()) throw IoError("cannot decode " + path.string());
  return m;
}

double type_max(const cv::Mat& m) {
  switch (m.depth()) {
    case CV_8U: return 255.0;
    case CV_16U: return 65535.0;
    case CV_32F:
    case CV_64F: return 1.0;
    default: throw IoError("unsupported sample type in image");
  }
}

std::uint8_t quantize8(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

void encode(const std::filesystem::path& path, const cv::Mat& m) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), m);
  } catch (const cv::Exception& e) {
    throw IoError("cannot write " + path.string() + ": " + e.what());
  }
  if (!ok) throw IoError("cannot write " + path.string());
}

}  // namespace

Image read_image(const std::filesystem::path& path) {
  cv::Mat m = decode(path, cv::IMREAD_ANYDEPTH | cv::IMREAD_COLOR);
  cv::Mat f;
  m.convertTo(f, CV_64F);
  // Divide rather than multiply by the reciprocal so decoded values equal
  // quantize8() exactly.
  const double peak = type_max(m);
  Image img(static_cast<std::size_t>(f.rows), static_cast<std::size_t>(f.cols));
  for (int y = 0; y < f.rows; ++y) {
    const auto* row = f.ptr<cv::Vec3d>(y);
    for (int x = 0; x < f.cols; ++x) {
      // OpenCV stores BGR.
      for (std::size_t c = 0; c < 3; ++c) img(c, y, x) = row[x][2 - c] / peak;
    }
  }
  if (!img.all_finite()) throw IoError("non-finite samples in " + path.string());
  return img;
}

void write_image(const std::filesystem::path& path, const Image& img) {
  cv::Mat m(static_cast<int>(img.height()), static_cast<int>(img.width()), CV_8UC3);
  for (int y = 0; y < m.rows; ++y) {
    auto* row = m.ptr<cv::Vec3b>(y);
    for (int x = 0; x < m.cols; ++x) {
      for (std::size_t c = 0; c < 3; ++c) row[x][2 - c] = quantize8(img(c, y, x));
    }
  }
  encode(path, m);
}

DepthMap read_depth(const std::filesystem::path& path, double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw ParameterError("read_depth: scale must be finite and > 0");
  cv::Mat m = decode(path, cv::IMREAD_ANYDEPTH | cv::IMREAD_GRAYSCALE);
  cv::Mat f;
  m.convertTo(f, CV_64F, scale / type_max(m));
  DepthMap d(static_cast<std::size_t>(f.rows), static_cast<std::size_t>(f.cols));
  for (int y = 0; y < f.rows; ++y) {
    const auto* row = f.ptr<double>(y);
    for (int x = 0; x < f.cols; ++x) d(0, y, x) = row[x];
  }
  return d;
}

void write_depth(const std::filesystem::path& path, const DepthMap& d, double scale) {
  cv::Mat m(static_cast<int>(d.height()), static_cast<int>(d.width()), CV_16UC1);
  for (int y = 0; y < m.rows; ++y) {
    auto* row = m.ptr<std::uint16_t>(y);
    for (int x = 0; x < m.cols; ++x) {
      row[x] = static_cast<std::uint16_t>(std::lround(std::clamp(d(0, y, x) / scale, 0.0, 1.0) * 65535.0));
    }
  }
  encode(path, m);
}

void write_transmission(const std::filesystem::path& path, const TransmissionMaps& t) {
  Image img(t.height(), t.width());
  std::copy(t.data().begin(), t.data().end(), img.data().begin());
  write_image(path, img);
}

Image quantize8(const Image& img) {
  Image out = img;
  for (auto& v : out.data()) v = quantize8(v) / 255.0;
  return out;
}

bool is_image_file(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp" || ext == ".tif" || ext == ".tiff";
}

}  // namespace pauie::io
