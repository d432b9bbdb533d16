#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "pauie/image.hpp"

// Seeded synthetic underwater scenes: smooth clean radiance, a planar depth
// ramp, red-dominant attenuation and a blue-green veiling light.
namespace pauie::synthetic {

struct SceneParams {
  double depth_min = 0.5;
  double depth_max = 4.0;
  // Attenuation per unit depth; red is drawn from the largest interval.
  double beta_red_min = 0.35, beta_red_max = 0.6;
  double beta_gb_min = 0.05, beta_gb_max = 0.25;
};

struct Scene {
  Image clean;
  DepthMap depth;
  AttenuationCoefficients beta;
  AmbientLight ambient;
  TransmissionMaps transmission;
  Image degraded;
};

Image smooth_image(std::size_t h, std::size_t w, std::mt19937_64& rng);
DepthMap ramp_depth(std::size_t h, std::size_t w, double lo, double hi, std::mt19937_64& rng);
Scene make_scene(std::size_t h, std::size_t w, std::mt19937_64& rng, const SceneParams& p = {});
std::vector<Scene> make_scenes(std::size_t count, std::size_t h, std::size_t w, std::uint64_t seed,
                               const SceneParams& p = {});

}  // namespace pauie::synthetic
