#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pauie/image.hpp"

// Full-reference, no-reference and transmission-evaluation metrics.
namespace pauie::metrics {

inline constexpr double kPsnrCap = 100.0;

/// 10 log10(1 / MSE), peak 1.0, capped at kPsnrCap.
double psnr(const Image& a, const Image& b);

struct SsimParams {
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

/// Mean SSIM, Gaussian window over valid positions, averaged over channels.
double ssim(const Image& a, const Image& b, const SsimParams& params = {});

// UIQM = c1 UICM + c2 UISM + c3 UIConM. Colorfulness statistics are taken on
// the 0..255 intensity scale; the block measures are scale invariant.
inline constexpr double kUiqmC1 = 0.0282;
inline constexpr double kUiqmC2 = 0.2953;
inline constexpr double kUiqmC3 = 3.5753;
inline constexpr std::size_t kMetricBlock = 8;
inline constexpr double kTrimFraction = 0.1;

struct UiqmTerms {
  double uicm = 0.0;
  double uism = 0.0;
  double uiconm = 0.0;
  double value() const { return kUiqmC1 * uicm + kUiqmC2 * uism + kUiqmC3 * uiconm; }
};

UiqmTerms uiqm_terms(const Image& img);
double uiqm(const Image& img);

// UCIQE = c1 sigma_chroma + c2 con_l + c3 mu_sat on CIELab (D65), with L and
// chroma normalized by 100.
inline constexpr double kUciqeC1 = 0.4680;
inline constexpr double kUciqeC2 = 0.2745;
inline constexpr double kUciqeC3 = 0.2576;

struct UciqeTerms {
  double chroma_std = 0.0;
  double luminance_contrast = 0.0;
  double mean_saturation = 0.0;
  double value() const {
    return kUciqeC1 * chroma_std + kUciqeC2 * luminance_contrast + kUciqeC3 * mean_saturation;
  }
};

UciqeTerms uciqe_terms(const Image& img);
double uciqe(const Image& img);

/// Pearson correlation of -ln t^channel against depth. Throws UndefinedError
/// when either series has zero variance.
double pcc_transmission(const TransmissionMaps& t, const DepthMap& d, std::size_t channel = 0);

/// Mean angle in degrees between corresponding RGB vectors; pixels where
/// either norm is below 1e-8 are skipped. Throws UndefinedError if none remain.
double angular_error(const Image& a, const Image& b);

double pearson(std::span<const double> x, std::span<const double> y);

struct MetricReport {
  std::string image_id;
  std::optional<double> psnr;
  std::optional<double> ssim;
  std::optional<double> uiqm;
  std::optional<double> uciqe;
  std::optional<double> pcc;
  std::optional<double> angular_error;
  // Empty on success; otherwise the failure message for this item.
  std::string error;

  bool ok() const { return error.empty(); }
};

/// Header shared by every command that writes metric rows.
std::string csv_header();
std::string csv_row(const MetricReport& r);
/// Field-wise mean over successful rows that carry the field.
MetricReport mean_report(const std::vector<MetricReport>& rows);
void write_csv(std::ostream& os, const std::vector<MetricReport>& rows, bool with_mean = true);

struct ParsedCsv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};
ParsedCsv parse_csv(std::istream& is);

}  // namespace pauie::metrics
