#include "pauie/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>

#include "pauie/imaging.hpp"

namespace pauie::metrics {

namespace {

constexpr double kDeg = 180.0 / std::numbers::pi;

// Valid-mode separable filtering with a normalized Gaussian window.
std::vector<double> filter_valid(std::span<const double> src, std::size_t h, std::size_t w,
                                 const std::vector<double>& taps) {
  const std::size_t k = taps.size();
  const std::size_t oh = h - k + 1, ow = w - k + 1;
  std::vector<double> tmp(h * ow), out(oh * ow);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t i = 0; i < k; ++i) acc += taps[i] * src[y * w + x + i];
      tmp[y * ow + x] = acc;
    }
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t i = 0; i < k; ++i) acc += taps[i] * tmp[(y + i) * ow + x];
      out[y * ow + x] = acc;
    }
  return out;
}

// Asymmetric alpha-trimmed mean: drop ceil(aK) lowest, floor(aK) highest.
double trimmed_mean(std::vector<double> v, double alpha) {
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size();
  const auto lo = static_cast<std::size_t>(std::ceil(alpha * static_cast<double>(k)));
  const auto hi = static_cast<std::size_t>(std::floor(alpha * static_cast<double>(k)));
  if (lo + hi >= k) return imaging::mean(v);
  double acc = 0.0;
  for (std::size_t i = lo; i < k - hi; ++i) acc += v[i];
  return acc / static_cast<double>(k - lo - hi);
}

double variance_about(std::span<const double> v, double mu) {
  double acc = 0.0;
  for (double x : v) acc += (x - mu) * (x - mu);
  return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}

std::vector<double> sobel_magnitude(std::span<const double> src, std::size_t h, std::size_t w) {
  std::vector<double> out(h * w);
  auto at = [&](long y, long x) {
    y = std::clamp<long>(y, 0, static_cast<long>(h) - 1);
    x = std::clamp<long>(x, 0, static_cast<long>(w) - 1);
    return src[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)];
  };
  for (long y = 0; y < static_cast<long>(h); ++y)
    for (long x = 0; x < static_cast<long>(w); ++x) {
      const double gx = (at(y - 1, x + 1) + 2.0 * at(y, x + 1) + at(y + 1, x + 1)) -
                        (at(y - 1, x - 1) + 2.0 * at(y, x - 1) + at(y + 1, x - 1));
      const double gy = (at(y + 1, x - 1) + 2.0 * at(y + 1, x) + at(y + 1, x + 1)) -
                        (at(y - 1, x - 1) + 2.0 * at(y - 1, x) + at(y - 1, x + 1));
      out[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)] = std::hypot(gx, gy);
    }
  return out;
}

// Block EME: 2/(k1 k2) sum log(max/min); blocks with a zero extreme contribute 0.
double eme(std::span<const double> v, std::size_t h, std::size_t w, std::size_t block) {
  const std::size_t by = h / block, bx = w / block;
  if (by == 0 || bx == 0) return 0.0;
  double acc = 0.0;
  for (std::size_t j = 0; j < by; ++j)
    for (std::size_t i = 0; i < bx; ++i) {
      double mx = -INFINITY, mn = INFINITY;
      for (std::size_t y = j * block; y < (j + 1) * block; ++y)
        for (std::size_t x = i * block; x < (i + 1) * block; ++x) {
          mx = std::max(mx, v[y * w + x]);
          mn = std::min(mn, v[y * w + x]);
        }
      if (mn > 0.0 && mx > 0.0) acc += std::log(mx / mn);
    }
  return 2.0 / static_cast<double>(by * bx) * acc;
}

// Block contrast -1/(k1 k2) sum rho log rho, rho = (max-min)/(max+min) over all channels.
double log_amee(const Image& img, std::size_t block) {
  const std::size_t h = img.height(), w = img.width();
  const std::size_t by = h / block, bx = w / block;
  if (by == 0 || bx == 0) return 0.0;
  double acc = 0.0;
  for (std::size_t j = 0; j < by; ++j)
    for (std::size_t i = 0; i < bx; ++i) {
      double mx = -INFINITY, mn = INFINITY;
      for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = j * block; y < (j + 1) * block; ++y)
          for (std::size_t x = i * block; x < (i + 1) * block; ++x) {
            mx = std::max(mx, img(c, y, x));
            mn = std::min(mn, img(c, y, x));
          }
      const double top = mx - mn, bot = mx + mn;
      if (top > 0.0 && bot > 0.0) {
        const double rho = top / bot;
        acc += rho * std::log(rho);
      }
    }
  return -acc / static_cast<double>(by * bx);
}

struct Lab {
  double l, a, b;
};

Lab to_lab(double r, double g, double b) {
  // Linear RGB (sRGB primaries) to XYZ, pre-divided by the D65 white point.
  const double x = (0.4124564 * r + 0.3575761 * g + 0.1804375 * b) / 0.95047;
  const double y = (0.2126729 * r + 0.7151522 * g + 0.0721750 * b) / 1.00000;
  const double z = (0.0193339 * r + 0.1191920 * g + 0.9503041 * b) / 1.08883;
  auto f = [](double t) {
    constexpr double d = 6.0 / 29.0;
    return t > d * d * d ? std::cbrt(t) : t / (3.0 * d * d) + 4.0 / 29.0;
  };
  const double fx = f(x), fy = f(y), fz = f(z);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

std::string format_field(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream os;
  os << std::setprecision(10) << *v;
  return os.str();
}

}  // namespace

double psnr(const Image& a, const Image& b) {
  require_same_extent(a, b, "psnr");
  double acc = 0.0;
  auto da = a.data(), db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) acc += (da[i] - db[i]) * (da[i] - db[i]);
  const double mse = acc / static_cast<double>(da.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const Image& a, const Image& b, const SsimParams& p) {
  require_same_extent(a, b, "ssim");
  const std::size_t h = a.height(), w = a.width();
  if (h < p.window || w < p.window) {
    throw ParameterError("ssim: image smaller than the " + std::to_string(p.window) + "x" +
                         std::to_string(p.window) + " window");
  }
  std::vector<double> taps(p.window);
  const double center = static_cast<double>(p.window - 1) / 2.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < p.window; ++i) {
    const double d = static_cast<double>(i) - center;
    taps[i] = std::exp(-d * d / (2.0 * p.sigma * p.sigma));
    sum += taps[i];
  }
  for (double& t : taps) t /= sum;
  const double c1 = p.k1 * p.k1, c2 = p.k2 * p.k2;

  double total = 0.0;
  const std::size_t n = h * w;
  for (std::size_t c = 0; c < 3; ++c) {
    auto x = a.channel(c), y = b.channel(c);
    std::vector<double> xx(n), yy(n), xy(n);
    for (std::size_t i = 0; i < n; ++i) {
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = filter_valid(x, h, w, taps), my = filter_valid(y, h, w, taps);
    const auto sxx = filter_valid(xx, h, w, taps), syy = filter_valid(yy, h, w, taps),
               sxy = filter_valid(xy, h, w, taps);
    double acc = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i];
      const double vy = syy[i] - my[i] * my[i];
      const double cov = sxy[i] - mx[i] * my[i];
      acc += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    total += acc / static_cast<double>(mx.size());
  }
  return std::clamp(total / 3.0, -1.0, 1.0);
}

UiqmTerms uiqm_terms(const Image& img) {
  UiqmTerms terms;
  const std::size_t n = img.pixels();
  if (n == 0) return terms;
  std::vector<double> rg(n), yb(n);
  auto r = img.channel(0), g = img.channel(1), b = img.channel(2);
  for (std::size_t i = 0; i < n; ++i) {
    const double R = 255.0 * r[i], G = 255.0 * g[i], B = 255.0 * b[i];
    rg[i] = R - G;
    yb[i] = 0.5 * (R + G) - B;
  }
  const double mu_rg = trimmed_mean(rg, kTrimFraction), mu_yb = trimmed_mean(yb, kTrimFraction);
  const double var_rg = variance_about(rg, mu_rg), var_yb = variance_about(yb, mu_yb);
  terms.uicm = -0.0268 * std::sqrt(mu_rg * mu_rg + mu_yb * mu_yb) + 0.1586 * std::sqrt(var_rg + var_yb);

  constexpr double kLuma[3] = {0.299, 0.587, 0.114};
  for (std::size_t c = 0; c < 3; ++c) {
    auto ch = img.channel(c);
    auto edges = sobel_magnitude(ch, img.height(), img.width());
    for (std::size_t i = 0; i < n; ++i) edges[i] *= ch[i];
    terms.uism += kLuma[c] * eme(edges, img.height(), img.width(), kMetricBlock);
  }
  terms.uiconm = log_amee(img, kMetricBlock);
  return terms;
}

double uiqm(const Image& img) { return uiqm_terms(img).value(); }

UciqeTerms uciqe_terms(const Image& img) {
  UciqeTerms terms;
  const std::size_t n = img.pixels();
  if (n == 0) return terms;
  std::vector<double> lum(n), chroma(n);
  double sat_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Lab lab = to_lab(img.channel(0)[i], img.channel(1)[i], img.channel(2)[i]);
    lum[i] = lab.l / 100.0;
    chroma[i] = std::hypot(lab.a, lab.b) / 100.0;
    const double denom = std::hypot(chroma[i], lum[i]);
    sat_sum += denom > 0.0 ? chroma[i] / denom : 0.0;
  }
  const double mu_c = imaging::mean(chroma);
  terms.chroma_std = std::sqrt(variance_about(chroma, mu_c));
  terms.luminance_contrast = imaging::percentile(lum, 99.0) - imaging::percentile(lum, 1.0);
  terms.mean_saturation = sat_sum / static_cast<double>(n);
  return terms;
}

double uciqe(const Image& img) { return uciqe_terms(img).value(); }

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionError("pearson: length mismatch");
  if (x.size() < 2) throw UndefinedError("pearson: need at least two samples");
  // Test for a constant series exactly; the accumulated sum of squares of a
  // constant would otherwise carry rounding residue from the mean.
  auto constant = [](std::span<const double> v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return *lo == *hi;
  };
  if (constant(x) || constant(y)) throw UndefinedError("pearson: zero variance");
  const double mx = imaging::mean(x), my = imaging::mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) throw UndefinedError("pearson: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double pcc_transmission(const TransmissionMaps& t, const DepthMap& d, std::size_t channel) {
  require_same_extent(t, d, "pcc_transmission");
  if (channel > 2) throw ParameterError("pcc_transmission: channel must be 0, 1 or 2");
  auto tc = t.channel(channel);
  std::vector<double> neg_log(tc.size());
  for (std::size_t i = 0; i < tc.size(); ++i) {
    if (!(tc[i] > 0.0)) throw DomainError("pcc_transmission: transmission must be positive");
    neg_log[i] = -std::log(tc[i]);
  }
  return pearson(neg_log, d.channel(0));
}

double angular_error(const Image& a, const Image& b) {
  require_same_extent(a, b, "angular_error");
  double acc = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < a.pixels(); ++i) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
      const double x = a.channel(c)[i], y = b.channel(c)[i];
      dot += x * y;
      na += x * x;
      nb += y * y;
    }
    na = std::sqrt(na);
    nb = std::sqrt(nb);
    if (na < 1e-8 || nb < 1e-8) continue;
    acc += std::acos(std::clamp(dot / (na * nb), -1.0, 1.0)) * kDeg;
    ++used;
  }
  if (used == 0) throw UndefinedError("angular_error: every pixel has a near-zero vector");
  return acc / static_cast<double>(used);
}

std::string csv_header() { return "image_id,psnr,ssim,uiqm,uciqe,pcc,angular_error_deg,status"; }

std::string csv_row(const MetricReport& r) {
  std::string status = r.ok() ? "ok" : "error: " + r.error;
  std::replace(status.begin(), status.end(), ',', ';');
  std::replace(status.begin(), status.end(), '\n', ' ');
  return r.image_id + "," + format_field(r.psnr) + "," + format_field(r.ssim) + "," +
         format_field(r.uiqm) + "," + format_field(r.uciqe) + "," + format_field(r.pcc) + "," +
         format_field(r.angular_error) + "," + status;
}

MetricReport mean_report(const std::vector<MetricReport>& rows) {
  MetricReport out;
  out.image_id = "mean";
  auto average = [&](auto member) -> std::optional<double> {
    double acc = 0.0;
    std::size_t n = 0;
    for (const auto& r : rows) {
      if (r.ok() && (r.*member)) {
        acc += *(r.*member);
        ++n;
      }
    }
    if (n == 0) return std::nullopt;
    return acc / static_cast<double>(n);
  };
  out.psnr = average(&MetricReport::psnr);
  out.ssim = average(&MetricReport::ssim);
  out.uiqm = average(&MetricReport::uiqm);
  out.uciqe = average(&MetricReport::uciqe);
  out.pcc = average(&MetricReport::pcc);
  out.angular_error = average(&MetricReport::angular_error);
  return out;
}

void write_csv(std::ostream& os, const std::vector<MetricReport>& rows, bool with_mean) {
  os << csv_header() << '\n';
  for (const auto& r : rows) os << csv_row(r) << '\n';
  if (with_mean) os << csv_row(mean_report(rows)) << '\n';
}

ParsedCsv parse_csv(std::istream& is) {
  ParsedCsv out;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(s);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!s.empty() && s.back() == ',') cells.emplace_back();
    return cells;
  };
  if (std::getline(is, line)) out.header = split(line);
  while (std::getline(is, line)) {
    if (!line.empty()) out.rows.push_back(split(line));
  }
  return out;
}

}  // namespace pauie::metrics
