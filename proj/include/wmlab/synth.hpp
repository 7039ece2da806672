#pragma once

#include "wmlab/image.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace wmlab {

/// Parameters of the dead-leaves scene generator. The defaults give 8x8
/// block-DCT statistics close to those of natural photographs.
struct SceneParams {
  int size = 256;
  /// Disk radii follow a 1/r^3 density on [min_radius, size/2].
  double min_radius = 8.0;
  int max_disks = 3000;
  /// Chroma deviation relative to the disk luminance.
  double saturation = 0.25;
  /// Per-image colour cast.
  double tint = 0.15;
  /// Linear shading slope (std, per pixel, in units of 1/size).
  double shading = 0.3;
  /// Amplitude of the additive 1/f texture.
  double texture = 0.01;
  double blur_sigma = 0.8;
  double noise = 0.004;
};

/// One occluding dead-leaves scene, deterministic in `seed`, RGB in [0,1].
ColorImage dead_leaves_scene(std::uint64_t seed, const SceneParams &params = {});

/// `count` scenes with seeds derived from `seed`.
std::vector<ColorImage> synthetic_corpus(std::uint64_t seed, int count,
                                         const SceneParams &params = {});

/// Writes scenes as img_0000.png ... and returns the paths.
std::vector<std::filesystem::path> write_corpus(const std::filesystem::path &dir,
                                                std::uint64_t seed, int count,
                                                const SceneParams &params = {});

/// Zero-mean, unit-std Gaussian noise whose radial power spectrum falls as
/// |k|^-alpha.
RasterPlane power_law_noise(int width, int height, double alpha, std::uint64_t seed);

} // namespace wmlab
