#pragma once

#include "wmlab/synth.hpp"

#include <vector>

namespace testing {

// Shared synthetic scenes, generated once per process.
inline const std::vector<wmlab::ColorImage> &scenes(int count) {
  static std::vector<wmlab::ColorImage> cache;
  if (static_cast<int>(cache.size()) < count) {
    cache = wmlab::synthetic_corpus(777, count);
  }
  return cache;
}

} // namespace testing
