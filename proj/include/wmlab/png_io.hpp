#pragma once

#include "wmlab/image.hpp"

#include <filesystem>

namespace wmlab {

/// Reads an 8-bit PNG (RGB, gray or palette without transparency) into an RGB
/// image with samples byte/255. Alpha channels and 16-bit depths are rejected.
/// Throws ImageIoError with a code identifying the failure.
ColorImage load_image(const std::filesystem::path &path);

/// Writes an RGB image as 8-bit PNG; samples are clamped to [0,1] and rounded
/// half away from zero.
void save_image(const ColorImage &img, const std::filesystem::path &path);

} // namespace wmlab
