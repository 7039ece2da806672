#include "wmlab/synth.hpp"

#include "wmlab/errors.hpp"
#include "wmlab/png_io.hpp"
#include "wmlab/rng.hpp"
#include "wmlab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace wmlab {

namespace {

int reflect(int i, int n) {
  // scipy.ndimage 'reflect': d c b a | a b c d | d c b a
  while (i < 0 || i >= n) {
    i = i < 0 ? -i - 1 : 2 * n - i - 1;
  }
  return i;
}

void gaussian_blur(RasterPlane &plane, double sigma) {
  if (sigma <= 0.0) {
    return;
  }
  const int radius = static_cast<int>(4.0 * sigma + 0.5);
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (double &v : k) {
    v /= sum;
  }
  const int w = plane.width();
  const int h = plane.height();
  RasterPlane tmp(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        s += k[i + radius] * plane.at(reflect(x + i, w), y);
      }
      tmp.at(x, y) = s;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        s += k[i + radius] * tmp.at(x, reflect(y + i, h));
      }
      plane.at(x, y) = s;
    }
  }
}

} // namespace

RasterPlane power_law_noise(int width, int height, double alpha, std::uint64_t seed) {
  if (width < 2 || height < 2) {
    throw DimensionError("power_law_noise: plane must be at least 2x2");
  }
  Rng rng(seed);
  RasterPlane white(width, height);
  for (double &v : white.samples()) {
    v = rng.gaussian();
  }
  Spectrum spec = fft_centered(white);
  for (int row = 0; row < spec.height; ++row) {
    for (int col = 0; col < spec.width; ++col) {
      const double f = std::hypot(spec.freq_x(col), spec.freq_y(row));
      spec.at(col, row) *= f > 0.0 ? std::pow(f, -alpha / 2.0) : 0.0;
    }
  }
  RasterPlane out = ifft_centered(spec);
  const double mean = plane_mean(out);
  const double sd = plane_stddev(out);
  for (double &v : out.samples()) {
    v = (v - mean) / sd;
  }
  return out;
}

ColorImage dead_leaves_scene(std::uint64_t seed, const SceneParams &p) {
  if (p.size < 16 || !(p.min_radius > 0.0) || p.min_radius >= p.size / 2.0) {
    throw PreconditionError("dead_leaves_scene: bad size or radius range");
  }
  const int n = p.size;
  Rng rng(seed);
  ColorImage img(n, n);
  std::vector<char> filled(static_cast<std::size_t>(n) * n, 0);
  std::size_t remaining = filled.size();

  std::array<double, 3> tint{};
  for (double &t : tint) {
    t = rng.uniform(-p.tint, p.tint);
  }
  const double inv_min = 1.0 / (p.min_radius * p.min_radius);
  const double inv_max = 1.0 / ((n / 2.0) * (n / 2.0));
  for (int d = 0; d < p.max_disks && remaining > 0; ++d) {
    const double r = 1.0 / std::sqrt(inv_min - rng.uniform() * (inv_min - inv_max));
    const double cx = rng.uniform(-r, n + r);
    const double cy = rng.uniform(-r, n + r);
    const double lum = rng.uniform(0.1, 0.9);
    const double room = std::min(lum, 1.0 - lum);
    std::array<double, 3> col{};
    for (int c = 0; c < 3; ++c) {
      col[c] = lum + p.saturation * rng.uniform(-0.5, 0.5) * 2.0 * room + tint[c] * room;
    }
    const double gx = rng.gaussian(0.0, p.shading / n);
    const double gy = rng.gaussian(0.0, p.shading / n);

    const int x0 = std::max(0, static_cast<int>(std::floor(cx - r)));
    const int x1 = std::min(n - 1, static_cast<int>(std::ceil(cx + r)));
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - r)));
    const int y1 = std::min(n - 1, static_cast<int>(std::ceil(cy + r)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * n + x;
        const double dx = x - cx;
        const double dy = y - cy;
        if (filled[i] || dx * dx + dy * dy >= r * r) {
          continue;
        }
        const double shade = dx * gx + dy * gy;
        for (int c = 0; c < 3; ++c) {
          img.planes[c].at(x, y) = col[c] + shade;
        }
        filled[i] = 1;
        --remaining;
      }
    }
  }

  const RasterPlane texture = power_law_noise(n, n, 2.0, derive_seed(seed, 7));
  for (int c = 0; c < 3; ++c) {
    auto s = img.planes[c].samples();
    const auto t = texture.samples();
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] += p.texture * t[i];
    }
    gaussian_blur(img.planes[c], p.blur_sigma);
  }
  Rng noise(derive_seed(seed, 11));
  for (RasterPlane &plane : img.planes) {
    for (double &v : plane.samples()) {
      v = std::clamp(v + noise.gaussian(0.0, p.noise), 0.0, 1.0);
    }
  }
  return img;
}

std::vector<ColorImage> synthetic_corpus(std::uint64_t seed, int count, const SceneParams &params) {
  std::vector<ColorImage> out;
  out.reserve(static_cast<std::size_t>(std::max(count, 0)));
  for (int i = 0; i < count; ++i) {
    out.push_back(dead_leaves_scene(derive_seed(seed, static_cast<std::uint64_t>(i)), params));
  }
  return out;
}

std::vector<std::filesystem::path> write_corpus(const std::filesystem::path &dir, std::uint64_t seed,
                                                int count, const SceneParams &params) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> paths;
  for (int i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "img_%04d.png", i);
    const auto path = dir / name;
    save_image(dead_leaves_scene(derive_seed(seed, static_cast<std::uint64_t>(i)), params), path);
    paths.push_back(path);
  }
  return paths;
}

} // namespace wmlab
