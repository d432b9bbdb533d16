#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "pauie/ifm.hpp"
#include "pauie/imaging.hpp"
#include "pauie/priors.hpp"
#include "support/random_fields.hpp"

using namespace pauie;
using namespace pauie::priors;
using pauie::testkit::random_image;

namespace {

ScalarMap brute_dark(const Image& img, std::size_t patch, bool with_red) {
  const long h = img.height(), w = img.width(), r = patch / 2;
  ScalarMap out(h, w);
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x) {
      double m = 1e9;
      for (long dy = -r; dy <= r; ++dy)
        for (long dx = -r; dx <= r; ++dx) {
          const long yy = std::clamp(y + dy, 0L, h - 1), xx = std::clamp(x + dx, 0L, w - 1);
          for (std::size_t c = with_red ? 0 : 1; c < 3; ++c) m = std::min(m, img(c, yy, xx));
        }
      out(0, y, x) = m;
    }
  return out;
}

}  // namespace

TEST(DarkChannel, ConstantImages) {
  for (double v : {0.0, 1.0}) {
    const auto d = dark_channel(constant_image(9, 9, {v, v, v}), 5);
    for (double x : d.data()) EXPECT_EQ(x, v);
  }
  EXPECT_THROW(dark_channel(Image(4, 4), 4), ParameterError);
  EXPECT_THROW(dark_channel(Image(4, 4), 0), ParameterError);
}

TEST(DarkChannel, MatchesBruteForceErosion) {
  auto img = constant_image(5, 5, {0.9, 0.9, 0.9});
  img(1, 2, 3) = 0.1;
  EXPECT_EQ(dark_channel(img, 3), brute_dark(img, 3, true));
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto r = random_image(11, 14, s);
    EXPECT_EQ(dark_channel(r, 5), brute_dark(r, 5, true));
    EXPECT_EQ(dark_channel(r, 3, DarkChannelKind::kGreenBlue), brute_dark(r, 3, false));
  }
}

TEST(DarkChannel, BoundedByChannelMinimumAndUdcpAboveDcp) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto img = random_image(16, 16, 100 + s);
    const auto dcp = dark_channel(img, 7);
    const auto udcp = dark_channel(img, 7, DarkChannelKind::kGreenBlue);
    for (std::size_t y = 0; y < 16; ++y)
      for (std::size_t x = 0; x < 16; ++x) {
        EXPECT_LE(dcp(0, y, x), std::min({img(0, y, x), img(1, y, x), img(2, y, x)}));
        EXPECT_GE(udcp(0, y, x), dcp(0, y, x));
      }
  }
}

TEST(DarkChannel, UdcpIgnoresRed) {
  const auto img = constant_image(8, 8, {0.0, 1.0, 1.0});
  const auto udcp = dark_channel(img, 3, DarkChannelKind::kGreenBlue);
  const auto dcp = dark_channel(img, 3);
  for (double v : udcp.data()) EXPECT_EQ(v, 1.0);
  for (double v : dcp.data()) EXPECT_EQ(v, 0.0);
}

TEST(Dcp, ConstantImages) {
  const auto white = dcp_estimate(constant_image(32, 32, {1, 1, 1}));
  for (double v : white.t.data()) EXPECT_NEAR(v, 0.05, 1e-9);
  EXPECT_EQ(white.a, (AmbientLight{{1, 1, 1}}));
  EXPECT_EQ(white.method, "dcp");

  const auto black = dcp_estimate(constant_image(32, 32, {0, 0, 0}));
  for (double v : black.t.data()) EXPECT_NEAR(v, 1.0, 1e-9);
  EXPECT_TRUE(black.ambient_clamped);
  EXPECT_TRUE(black.a.valid());

  const auto gray = constant_image(20, 20, {0.5, 0.5, 0.5});
  const auto d = dcp_estimate(gray), u = udcp_estimate(gray);
  EXPECT_EQ(d.t, u.t);
  EXPECT_EQ(d.a, u.a);
  EXPECT_EQ(u.method, "udcp");
}

TEST(Dcp, ParameterValidation) {
  const auto img = random_image(16, 16, 1);
  DcpParams p;
  p.omega = 0.0;
  EXPECT_THROW(dcp_estimate(img, p), ParameterError);
  p = {};
  p.top_frac = 1.5;
  EXPECT_THROW(udcp_estimate(img, p), ParameterError);
  p = {};
  p.patch = 8;
  EXPECT_THROW(dcp_estimate(img, p), ParameterError);
}

TEST(Dcp, TransmissionWithinFloorAndOne) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto img = random_image(24, 24, 50 + s);
    for (const auto& est : {dcp_estimate(img), udcp_estimate(img)}) {
      for (double v : est.t.data()) {
        EXPECT_GE(v, 0.05);
        EXPECT_LE(v, 1.0);
      }
      EXPECT_TRUE(est.a.valid());
    }
  }
}

TEST(Dcp, RecoversPiecewiseTransmission) {
  // Top strip is almost pure veiling light so the ambient estimate lands on A;
  // below it two halves with t = 0.4 and t = 0.8. Every pixel of J has one
  // zero channel so the clean dark channel vanishes.
  const std::size_t h = 112, w = 128;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.2, 1.0);
  Image j(h, w);
  TransmissionMaps t(h, w);
  auto truth = [&](std::size_t y, std::size_t x) { return y < 32 ? 0.02 : (x < w / 2 ? 0.4 : 0.8); };
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        j(c, y, x) = (x + y) % 3 == c ? 0.0 : u(rng);
        t(c, y, x) = truth(y, x);
      }
    }
  const AmbientLight a{{0.8, 0.8, 0.8}};
  DcpParams p;
  p.patch = 7;
  p.guided_radius = 6;
  const auto est = dcp_estimate(ifm::degrade(j, t, a), p);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(est.a[c], 0.8, 0.05);
  const std::size_t margin = 24;
  for (std::size_t y = 32 + margin; y < h - 4; ++y)
    for (std::size_t x = 4; x < w - 4; ++x) {
      if (x + margin > w / 2 && x < w / 2 + margin) continue;
      ASSERT_NEAR(est.t(0, y, x), truth(y, x), 0.1) << y << "," << x;
    }
}

TEST(GuidedFilter, ConstantSourcePreservedAndMeanKept) {
  const auto g = random_image(20, 20, 4);
  const ScalarMap guide = imaging::channel_mean(g);
  const auto flat = guided_filter(guide, ScalarMap(20, 20, 0.3), 4, 1e-3);
  for (double v : flat.data()) EXPECT_NEAR(v, 0.3, 1e-9);

  std::mt19937_64 rng(8);
  for (int k = 0; k < 5; ++k) {
    const auto src = testkit::random_field<ScalarMap>(32, 32, rng, 0.05, 1.0);
    const auto gd = testkit::random_field<ScalarMap>(32, 32, rng);
    const auto out = guided_filter(gd, src, 5, 1e-3);
    EXPECT_NEAR(imaging::mean(out.data()), imaging::mean(src.data()), 0.05);
  }
  EXPECT_THROW(guided_filter(guide, ScalarMap(10, 20), 2, 1e-3), DimensionError);
}

TEST(HistEqualize, Examples) {
  const auto c = hist_equalize(constant_image(6, 6, {0.3, 0.3, 0.3}));
  for (double v : c.data()) EXPECT_DOUBLE_EQ(v, 1.0);

  Image two(4, 4);
  for (std::size_t ch = 0; ch < 3; ++ch)
    for (std::size_t y = 0; y < 4; ++y)
      for (std::size_t x = 0; x < 4; ++x) two(ch, y, x) = y < 2 ? 0.25 : 0.75;
  const auto e = hist_equalize(two, 256);
  for (std::size_t ch = 0; ch < 3; ++ch)
    for (std::size_t y = 0; y < 4; ++y)
      for (std::size_t x = 0; x < 4; ++x) EXPECT_DOUBLE_EQ(e(ch, y, x), y < 2 ? 0.5 : 1.0);
  EXPECT_THROW(hist_equalize(two, 1), ParameterError);
}

TEST(HistEqualize, OutputCdfNearLinear) {
  // One pixel per level in each bin: a shuffled uniform ramp.
  const std::size_t bins = 64, h = 32, w = 64;
  std::vector<double> ramp(h * w);
  for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = (i + 0.5) / ramp.size();
  std::mt19937_64 rng(2);
  Image img(h, w);
  for (std::size_t c = 0; c < 3; ++c) {
    std::shuffle(ramp.begin(), ramp.end(), rng);
    std::copy(ramp.begin(), ramp.end(), img.channel(c).begin());
  }
  const auto out = hist_equalize(img, bins);
  for (std::size_t c = 0; c < 3; ++c) {
    std::vector<double> v(out.channel(c).begin(), out.channel(c).end());
    std::sort(v.begin(), v.end());
    for (std::size_t k = 0; k <= 100; ++k) {
      const double level = k / 100.0;
      const double frac =
          static_cast<double>(std::upper_bound(v.begin(), v.end(), level) - v.begin()) / v.size();
      EXPECT_LE(std::abs(frac - level), 1.0 / bins + 1e-12) << level;
    }
  }
}

TEST(HistEqualize, IdempotentUpToBinning) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto img = random_image(24, 24, 30 + s);
    for (std::size_t bins : {16u, 256u}) {
      const auto once = hist_equalize(img, bins);
      const auto twice = hist_equalize(once, bins);
      for (std::size_t i = 0; i < once.size(); ++i)
        EXPECT_LE(std::abs(once.data()[i] - twice.data()[i]), 1.0 / bins + 1e-12);
      for (double v : once.data()) EXPECT_TRUE(v >= 0.0 && v <= 1.0);
    }
  }
}

TEST(Retinex, ConstantMapsToHalf) {
  const auto out = retinex_msr(constant_image(16, 16, {0.4, 0.0, 1.0}));
  for (double v : out.data()) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(Retinex, EdgesExceedBlobInterior) {
  Image img = constant_image(64, 64, {0.1, 0.1, 0.1});
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < 64; ++y)
      for (std::size_t x = 0; x < 64; ++x)
        if (std::hypot(double(y) - 32, double(x) - 32) <= 12) img(c, y, x) = 0.9;
  RetinexParams p;
  p.scales = {4.0};
  const auto out = retinex_msr(img, p);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_GT(out(c, 32, 43), out(c, 32, 32));
}

TEST(Retinex, FiniteWithZerosAndValidatesScales) {
  auto img = random_image(20, 20, 9);
  for (std::size_t x = 0; x < 20; ++x) img(1, 5, x) = 0.0;
  const auto out = retinex_msr(img);
  EXPECT_TRUE(out.all_finite());
  for (double v : out.data()) EXPECT_TRUE(v >= 0.0 && v <= 1.0);
  RetinexParams p;
  p.scales = {};
  EXPECT_THROW(retinex_msr(img, p), ParameterError);
  p.scales = {5.0, -1.0};
  EXPECT_THROW(retinex_msr(img, p), ParameterError);
}

TEST(GrayWorld, Examples) {
  const auto r = gray_world(constant_image(4, 4, {0.25, 0.5, 1.0}));
  for (double v : r.image.data()) EXPECT_NEAR(v, 0.5, 1e-15);
  EXPECT_FALSE(r.scale_capped);

  const auto half = constant_image(4, 4, {0.5, 0.5, 0.5});
  EXPECT_EQ(gray_world(half).image, half);

  const auto z = gray_world(constant_image(4, 4, {0.0, 0.4, 0.4}));
  EXPECT_TRUE(z.scale_capped);
  EXPECT_DOUBLE_EQ(z.scale[0], kGrayWorldMaxScale);
}

TEST(GrayWorld, MeansAreHalfWithoutClamping) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto img = random_image(16, 16, 70 + s, 0.2, 0.4);
    const auto r = gray_world(img);
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(imaging::mean(r.image.channel(c)), 0.5, 1e-6);
  }
}
