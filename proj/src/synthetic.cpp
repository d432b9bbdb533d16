#include "pauie/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pauie/ifm.hpp"

namespace pauie::synthetic {

Image smooth_image(std::size_t h, std::size_t w, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image img(h, w);
  for (std::size_t c = 0; c < 3; ++c) {
    const double base = 0.35 + 0.5 * u(rng);
    const double gx = 0.5 * (u(rng) - 0.5), gy = 0.5 * (u(rng) - 0.5);
    const double amp = 0.1 * u(rng);
    const double fx = 1.0 + 2.0 * u(rng), fy = 1.0 + 2.0 * u(rng), phase = 2.0 * std::numbers::pi * u(rng);
    for (std::size_t y = 0; y < h; ++y) {
      const double ty = (y + 0.5) / static_cast<double>(h);
      for (std::size_t x = 0; x < w; ++x) {
        const double tx = (x + 0.5) / static_cast<double>(w);
        const double v = base + gx * (tx - 0.5) + gy * (ty - 0.5) +
                         amp * std::sin(2.0 * std::numbers::pi * (fx * tx + fy * ty) + phase);
        img(c, y, x) = std::clamp(v, 0.02, 0.98);
      }
    }
  }
  return img;
}

DepthMap ramp_depth(std::size_t h, std::size_t w, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 2.0 * std::numbers::pi);
  const double theta = u(rng);
  const double dx = std::cos(theta), dy = std::sin(theta);
  // Project pixel centres on the ramp direction and rescale to [lo, hi].
  const double span = std::abs(dx) * w + std::abs(dy) * h;
  DepthMap d(h, w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double proj = dx * (x + 0.5 - 0.5 * w) + dy * (y + 0.5 - 0.5 * h);
      d(0, y, x) = lo + (hi - lo) * (proj / span + 0.5);
    }
  }
  return d;
}

Scene make_scene(std::size_t h, std::size_t w, std::mt19937_64& rng, const SceneParams& p) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Scene s;
  s.clean = smooth_image(h, w, rng);
  s.depth = ramp_depth(h, w, p.depth_min, p.depth_max, rng);
  s.beta.beta = {p.beta_red_min + (p.beta_red_max - p.beta_red_min) * u(rng),
                 p.beta_gb_min + (p.beta_gb_max - p.beta_gb_min) * u(rng),
                 p.beta_gb_min + (p.beta_gb_max - p.beta_gb_min) * u(rng)};
  s.ambient.rgb = {0.01 + 0.05 * u(rng), 0.45 + 0.3 * u(rng), 0.5 + 0.35 * u(rng)};
  s.transmission = ifm::transmission_from_depth(s.depth, s.beta);
  s.degraded = ifm::degrade(s.clean, s.transmission, s.ambient);
  return s;
}

std::vector<Scene> make_scenes(std::size_t count, std::size_t h, std::size_t w, std::uint64_t seed,
                               const SceneParams& p) {
  std::mt19937_64 rng(seed);
  std::vector<Scene> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(make_scene(h, w, rng, p));
  return out;
}

}  // namespace pauie::synthetic
