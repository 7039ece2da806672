#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace wmlab {

/// Single-channel floating-point image, row-major. Samples nominally live in
/// [0,1]; intermediate results may leave that range and are clamped only when
/// written to disk.
class RasterPlane {
public:
  RasterPlane() = default;
  RasterPlane(int width, int height, double fill = 0.0);
  RasterPlane(int width, int height, std::vector<double> samples);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }

  double &at(int x, int y) { return samples_[static_cast<std::size_t>(y) * width_ + x]; }
  double at(int x, int y) const { return samples_[static_cast<std::size_t>(y) * width_ + x]; }
  /// Edge-replicating read; coordinates outside the plane clamp to the border.
  double at_clamped(int x, int y) const;

  std::span<double> samples() noexcept { return samples_; }
  std::span<const double> samples() const noexcept { return samples_; }

  bool same_shape(const RasterPlane &other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> samples_;
};

enum class ColorSpace { RGB, YCbCr };

/// Three equally-sized planes tagged with the color space they encode.
/// For YCbCr the channel order is (Y, Cb, Cr).
struct ColorImage {
  std::array<RasterPlane, 3> planes;
  ColorSpace space = ColorSpace::RGB;

  ColorImage() = default;
  ColorImage(int width, int height, ColorSpace cs = ColorSpace::RGB);
  ColorImage(RasterPlane c0, RasterPlane c1, RasterPlane c2, ColorSpace cs);

  int width() const noexcept { return planes[0].width(); }
  int height() const noexcept { return planes[0].height(); }
  bool same_shape(const ColorImage &other) const noexcept {
    return planes[0].same_shape(other.planes[0]);
  }
};

struct ColorStats {
  std::array<double, 3> mean{};
  std::array<double, 3> stddev{};
};

/// Full-range BT.601. Throws ColorSpaceError when the input tag is wrong.
ColorImage rgb_to_ycbcr(const ColorImage &img);
ColorImage ycbcr_to_rgb(const ColorImage &img);

/// Y plane of an image in either color space.
RasterPlane luminance(const ColorImage &img);

/// Population mean and standard deviation per channel.
ColorStats channel_stats(const ColorImage &img);
double plane_mean(const RasterPlane &p);
double plane_stddev(const RasterPlane &p);

/// Copy with every sample clamped to [0,1] and rounded to the 8-bit grid.
ColorImage quantize8(const ColorImage &img);

} // namespace wmlab
