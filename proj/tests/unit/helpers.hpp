#pragma once

#include "wmlab/image.hpp"
#include "wmlab/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

namespace testing {

inline wmlab::RasterPlane random_plane(int w, int h, std::uint64_t seed) {
  wmlab::Rng rng(seed);
  wmlab::RasterPlane p(w, h);
  for (double &v : p.samples()) {
    v = rng.uniform();
  }
  return p;
}

inline wmlab::ColorImage random_image(int w, int h, std::uint64_t seed) {
  return wmlab::ColorImage(random_plane(w, h, seed), random_plane(w, h, seed + 1),
                           random_plane(w, h, seed + 2), wmlab::ColorSpace::RGB);
}

inline double max_abs_diff(const wmlab::RasterPlane &a, const wmlab::RasterPlane &b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a.samples()[i] - b.samples()[i]));
  }
  return m;
}

inline double max_abs_diff(const wmlab::ColorImage &a, const wmlab::ColorImage &b) {
  double m = 0.0;
  for (int c = 0; c < 3; ++c) {
    m = std::max(m, max_abs_diff(a.planes[c], b.planes[c]));
  }
  return m;
}

// Fresh directory under the system temp dir, removed on scope exit.
class ScratchDir {
public:
  explicit ScratchDir(const std::string &tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("wmlab-test-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir &) = delete;
  ScratchDir &operator=(const ScratchDir &) = delete;

  const std::filesystem::path &path() const { return path_; }
  std::filesystem::path operator/(const std::string &name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

} // namespace testing
