#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "pauie/ifm.hpp"
#include "pauie/metrics.hpp"
#include "support/metric_oracles.hpp"

using namespace pauie;
using namespace pauie::metrics;

namespace {

Image random_image(std::size_t h, std::size_t w, std::uint32_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Image img(h, w);
  for (double& v : img.data()) v = u(rng);
  return img;
}

DepthMap ramp(std::size_t h, std::size_t w) {
  DepthMap d(h, w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) d(0, y, x) = 0.5 + 3.0 * (x + 0.5 * y) / (w + 0.5 * h);
  return d;
}

}  // namespace

TEST(Psnr, Examples) {
  const auto a = constant_image(16, 16, {0.5, 0.5, 0.5});
  EXPECT_DOUBLE_EQ(psnr(a, a), kPsnrCap);
  EXPECT_NEAR(psnr(a, constant_image(16, 16, {0.6, 0.6, 0.6})), 20.0, 1e-6);
  const double v = 0.5 + std::sqrt(1e-3);
  EXPECT_NEAR(psnr(a, constant_image(16, 16, {v, v, v})), 30.0, 1e-6);
  EXPECT_THROW(psnr(a, Image(8, 16)), DimensionError);
}

TEST(Psnr, SymmetricAndMonotoneInNoise) {
  const auto img = random_image(24, 24, 3, 0.2, 0.8);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Image noise(24, 24);
  for (double& v : noise.data()) v = u(rng);
  double prev = kPsnrCap + 1;
  for (double amp : {0.01, 0.02, 0.05, 0.1, 0.2}) {
    Image b = img;
    for (std::size_t i = 0; i < b.size(); ++i) b.data()[i] += amp * noise.data()[i];
    const double p = psnr(img, b);
    EXPECT_DOUBLE_EQ(p, psnr(b, img));
    EXPECT_LT(p, prev);
    prev = p;
  }
}

TEST(Ssim, Identity) {
  for (std::uint32_t s = 0; s < 5; ++s) {
    const auto a = random_image(20, 23, s);
    EXPECT_NEAR(ssim(a, a), 1.0, 1e-9);
  }
}

TEST(Ssim, ConstantsAreLuminanceOnly) {
  constexpr double c1 = 0.01 * 0.01;
  const double expect = (2 * 0.5 * 0.6 + c1) / (0.25 + 0.36 + c1);
  EXPECT_NEAR(ssim(constant_image(16, 16, {0.5, 0.5, 0.5}), constant_image(16, 16, {0.6, 0.6, 0.6})),
              expect, 1e-6);
}

TEST(Ssim, CheckerboardAgainstInverse) {
  Image a(16, 16), b(16, 16);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < 16; ++y)
      for (std::size_t x = 0; x < 16; ++x) {
        a(c, y, x) = (x + y) % 2 ? 1.0 : 0.0;
        b(c, y, x) = 1.0 - a(c, y, x);
      }
  EXPECT_LE(ssim(a, b), 0.0);
}

TEST(Ssim, BoundedAndErrors) {
  for (std::uint32_t s = 0; s < 5; ++s) {
    const double v = ssim(random_image(16, 16, s), random_image(16, 16, s + 100));
    EXPECT_LE(std::abs(v), 1.0);
  }
  EXPECT_THROW(ssim(Image(10, 20), Image(10, 20)), ParameterError);
  EXPECT_THROW(ssim(Image(12, 12), Image(12, 13)), DimensionError);
}

TEST(Uiqm, GrayConstantIsZero) {
  const auto g = constant_image(32, 32, {0.4, 0.4, 0.4});
  const auto t = uiqm_terms(g);
  EXPECT_NEAR(t.uicm, 0.0, 1e-9);
  EXPECT_NEAR(t.uism, 0.0, 1e-9);
  EXPECT_NEAR(t.uiconm, 0.0, 1e-9);
  EXPECT_NEAR(uiqm(g), 0.0, 1e-9);
}

TEST(Uiqm, MatchesDirectOracle) {
  for (std::uint32_t s : {1u, 2u, 3u}) {
    const auto img = random_image(40, 48, s);
    const auto t = uiqm_terms(img);
    EXPECT_NEAR(t.uicm, testkit::oracle::uicm(img), 1e-6);
    EXPECT_NEAR(t.uism, testkit::oracle::uism(img), 1e-6);
    EXPECT_NEAR(t.uiconm, testkit::oracle::uiconm(img), 1e-6);
    EXPECT_NEAR(uiqm(img), testkit::oracle::uiqm(img), 1e-6);
  }
}

TEST(Uiqm, RedGreenColorfulnessIncreasesScore) {
  auto gray = constant_image(32, 32, {0.5, 0.5, 0.5});
  auto tinted = gray;
  for (std::size_t y = 0; y < 32; ++y)
    for (std::size_t x = 0; x < 32; ++x) {
      const bool r = (x / 4 + y / 4) % 2;
      tinted(0, y, x) = r ? 0.9 : 0.1;
      tinted(1, y, x) = r ? 0.1 : 0.9;
    }
  EXPECT_GT(uiqm(tinted), uiqm(gray));
}

TEST(Uciqe, MatchesDirectOracle) {
  for (std::uint32_t s : {4u, 5u, 6u}) {
    const auto img = random_image(33, 29, s);
    EXPECT_NEAR(uciqe(img), testkit::oracle::uciqe(img), 1e-6);
  }
}

TEST(Uciqe, DegenerateCases) {
  const auto c = constant_image(16, 16, {0.2, 0.5, 0.7});
  const auto tc = uciqe_terms(c);
  EXPECT_NEAR(tc.chroma_std, 0.0, 1e-12);
  EXPECT_NEAR(tc.luminance_contrast, 0.0, 1e-12);
  EXPECT_GT(tc.mean_saturation, 0.0);
  EXPECT_NEAR(uciqe(c), kUciqeC3 * tc.mean_saturation, 1e-12);

  Image g(16, 16);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t y = 0; y < 16; ++y)
    for (std::size_t x = 0; x < 16; ++x) {
      const double v = u(rng);
      for (std::size_t ch = 0; ch < 3; ++ch) g(ch, y, x) = v;
    }
  const auto tg = uciqe_terms(g);
  // D65-normalized gray has a* = b* = 0 only up to matrix rounding.
  EXPECT_NEAR(tg.chroma_std, 0.0, 1e-5);
  EXPECT_NEAR(tg.mean_saturation, 0.0, 1e-4);
  EXPECT_GT(tg.luminance_contrast, 0.0);
  EXPECT_NEAR(uciqe(g), kUciqeC2 * tg.luminance_contrast, 1e-4);
}

TEST(NoReference, InvariantToWholeBlockTranslation) {
  const auto img = random_image(32, 32, 11);
  Image shifted(32, 32);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < 32; ++y)
      for (std::size_t x = 0; x < 32; ++x) shifted(c, y, (x + 8) % 32) = img(c, y, x);
  EXPECT_NEAR(uciqe(shifted), uciqe(img), 1e-9);
  // Sobel sees the wrap seam, so compare the block terms that are purely local
  // to block content.
  EXPECT_NEAR(uiqm_terms(shifted).uicm, uiqm_terms(img).uicm, 1e-9);
  EXPECT_NEAR(uiqm_terms(shifted).uiconm, uiqm_terms(img).uiconm, 1e-9);

  // A block-periodic pattern is translation invariant under every term.
  Image tile(32, 32);
  const auto base = random_image(8, 8, 12, 0.1, 0.9);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < 32; ++y)
      for (std::size_t x = 0; x < 32; ++x) tile(c, y, x) = base(c, y % 8, x % 8);
  Image tile_shift(32, 32);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < 32; ++y)
      for (std::size_t x = 0; x < 32; ++x) tile_shift(c, (y + 8) % 32, x) = tile(c, y, x);
  EXPECT_NEAR(uiqm(tile_shift), uiqm(tile), 1e-9);
}

TEST(Pcc, ExactFromDepth) {
  const auto d = ramp(32, 32);
  const auto t = ifm::transmission_from_depth(d, {{0.5, 0.1, 0.08}});
  EXPECT_NEAR(pcc_transmission(t, d, 0), 1.0, 1e-9);
  EXPECT_NEAR(pcc_transmission(t, d, 2), 1.0, 1e-9);
}

TEST(Pcc, NoisyLogTransmission) {
  const auto d = ramp(64, 64);
  auto t = ifm::transmission_from_depth(d, {{0.5, 0.1, 0.08}});
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n(0.0, 0.01);
  for (double& v : t.channel(0)) v = std::exp(std::log(v) - n(rng));
  EXPECT_GT(pcc_transmission(t, d, 0), 0.99);
}

TEST(Pcc, UndefinedOnConstantSeries) {
  const auto d = ramp(8, 8);
  TransmissionMaps t(8, 8, 0.5);
  EXPECT_THROW(pcc_transmission(t, d, 0), UndefinedError);
  EXPECT_THROW(pcc_transmission(ifm::transmission_from_depth(d, {{0.5, 0.1, 0.1}}), DepthMap(8, 8, 1.0), 0),
               UndefinedError);
}

TEST(Pcc, AffineDepthInvariance) {
  const auto d = ramp(16, 16);
  auto t = ifm::transmission_from_depth(d, {{0.4, 0.1, 0.1}});
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.9, 1.1);
  for (double& v : t.channel(0)) v = std::min(1.0, v * u(rng));
  const double base = pcc_transmission(t, d, 0);
  DepthMap d2 = d;
  for (double& v : d2.data()) v = 3.7 * v + 12.0;
  EXPECT_NEAR(pcc_transmission(t, d2, 0), base, 1e-12);
  EXPECT_LE(std::abs(base), 1.0);
}

TEST(AngularError, Examples) {
  const auto r = constant_image(8, 8, {1, 0, 0});
  EXPECT_NEAR(angular_error(r, constant_image(8, 8, {0, 1, 0})), 90.0, 1e-6);
  EXPECT_NEAR(angular_error(constant_image(8, 8, {1, 1, 0}), r), 45.0, 1e-6);
  const auto a = random_image(8, 8, 1, 0.1, 1.0);
  EXPECT_NEAR(angular_error(a, a), 0.0, 1e-6);
  EXPECT_THROW(angular_error(Image(8, 8), Image(8, 8)), UndefinedError);
}

TEST(AngularError, ScaleInvariant) {
  const auto a = random_image(12, 12, 2, 0.05, 1.0);
  const auto b = random_image(12, 12, 3, 0.05, 1.0);
  Image a2 = a, b2 = b;
  for (double& v : a2.data()) v *= 0.3;
  for (double& v : b2.data()) v *= 2.5;
  const double e = angular_error(a, b);
  EXPECT_NEAR(angular_error(a2, b), e, 1e-9);
  EXPECT_NEAR(angular_error(a, b2), e, 1e-9);
  EXPECT_GE(e, 0.0);
  EXPECT_LE(e, 180.0);
}

TEST(Csv, RowsMeanAndParse) {
  MetricReport a{"a", 20.0, 0.8, 1.0, 0.5, std::nullopt, 3.0, ""};
  MetricReport b{"b", 30.0, 0.6, 2.0, 0.7, 0.9, std::nullopt, ""};
  MetricReport bad{"c", std::nullopt, std::nullopt, std::nullopt, std::nullopt, std::nullopt, std::nullopt,
                   "read failed"};
  const auto m = mean_report({a, b, bad});
  EXPECT_DOUBLE_EQ(*m.psnr, 25.0);
  EXPECT_DOUBLE_EQ(*m.ssim, 0.7);
  EXPECT_DOUBLE_EQ(*m.pcc, 0.9);
  EXPECT_DOUBLE_EQ(*m.angular_error, 3.0);

  std::stringstream ss;
  write_csv(ss, {a, b, bad});
  const auto parsed = parse_csv(ss);
  ASSERT_GE(parsed.header.size(), 7u);
  EXPECT_EQ(parsed.header[0], "image_id");
  EXPECT_EQ(parsed.header[6], "angular_error_deg");
  ASSERT_EQ(parsed.rows.size(), 4u);
  EXPECT_EQ(parsed.rows[0][0], "a");
  EXPECT_EQ(parsed.rows[0][5], "");
  EXPECT_NEAR(std::stod(parsed.rows[1][1]), 30.0, 1e-12);
  EXPECT_EQ(parsed.rows[2][7].rfind("error", 0), 0u);
  EXPECT_EQ(parsed.rows[3][0], "mean");
}
