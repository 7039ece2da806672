#include "wmlab/image.hpp"

#include "wmlab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace wmlab {

namespace {
// BT.601 luma weights, full range.
constexpr double kR = 0.299;
constexpr double kG = 0.587;
constexpr double kB = 0.114;
constexpr double kCb = 2.0 * (1.0 - kB); // 1.772
constexpr double kCr = 2.0 * (1.0 - kR); // 1.402

void require_shape(int width, int height, std::size_t n) {
  if (width < 0 || height < 0 ||
      n != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw DimensionError("sample count does not match " + std::to_string(width) + "x" +
                         std::to_string(height));
  }
}
} // namespace

RasterPlane::RasterPlane(int width, int height, double fill)
    : width_(width), height_(height),
      samples_(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0), fill) {
  require_shape(width, height, samples_.size());
}

RasterPlane::RasterPlane(int width, int height, std::vector<double> samples)
    : width_(width), height_(height), samples_(std::move(samples)) {
  require_shape(width, height, samples_.size());
}

double RasterPlane::at_clamped(int x, int y) const {
  x = std::clamp(x, 0, width_ - 1);
  y = std::clamp(y, 0, height_ - 1);
  return at(x, y);
}

ColorImage::ColorImage(int width, int height, ColorSpace cs)
    : planes{RasterPlane(width, height), RasterPlane(width, height), RasterPlane(width, height)},
      space(cs) {}

ColorImage::ColorImage(RasterPlane c0, RasterPlane c1, RasterPlane c2, ColorSpace cs)
    : planes{std::move(c0), std::move(c1), std::move(c2)}, space(cs) {
  if (!planes[0].same_shape(planes[1]) || !planes[0].same_shape(planes[2])) {
    throw DimensionError("color planes differ in size");
  }
}

ColorImage rgb_to_ycbcr(const ColorImage &img) {
  if (img.space != ColorSpace::RGB) {
    throw ColorSpaceError("rgb_to_ycbcr: input is not tagged RGB");
  }
  ColorImage out(img.width(), img.height(), ColorSpace::YCbCr);
  const auto r = img.planes[0].samples();
  const auto g = img.planes[1].samples();
  const auto b = img.planes[2].samples();
  auto y = out.planes[0].samples();
  auto cb = out.planes[1].samples();
  auto cr = out.planes[2].samples();
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double luma = kR * r[i] + kG * g[i] + kB * b[i];
    y[i] = luma;
    cb[i] = 0.5 + (b[i] - luma) / kCb;
    cr[i] = 0.5 + (r[i] - luma) / kCr;
  }
  return out;
}

ColorImage ycbcr_to_rgb(const ColorImage &img) {
  if (img.space != ColorSpace::YCbCr) {
    throw ColorSpaceError("ycbcr_to_rgb: input is not tagged YCbCr");
  }
  ColorImage out(img.width(), img.height(), ColorSpace::RGB);
  const auto y = img.planes[0].samples();
  const auto cb = img.planes[1].samples();
  const auto cr = img.planes[2].samples();
  auto r = out.planes[0].samples();
  auto g = out.planes[1].samples();
  auto b = out.planes[2].samples();
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double red = y[i] + kCr * (cr[i] - 0.5);
    const double blue = y[i] + kCb * (cb[i] - 0.5);
    r[i] = red;
    b[i] = blue;
    g[i] = (y[i] - kR * red - kB * blue) / kG;
  }
  return out;
}

RasterPlane luminance(const ColorImage &img) {
  if (img.space == ColorSpace::YCbCr) {
    return img.planes[0];
  }
  return rgb_to_ycbcr(img).planes[0];
}

double plane_mean(const RasterPlane &p) {
  if (p.empty()) {
    return 0.0;
  }
  double sum = 0.0;
  for (double v : p.samples()) {
    sum += v;
  }
  return sum / static_cast<double>(p.size());
}

double plane_stddev(const RasterPlane &p) {
  if (p.empty()) {
    return 0.0;
  }
  const double mu = plane_mean(p);
  double ss = 0.0;
  for (double v : p.samples()) {
    ss += (v - mu) * (v - mu);
  }
  return std::sqrt(ss / static_cast<double>(p.size()));
}

ColorStats channel_stats(const ColorImage &img) {
  ColorStats s;
  for (int c = 0; c < 3; ++c) {
    s.mean[c] = plane_mean(img.planes[c]);
    s.stddev[c] = plane_stddev(img.planes[c]);
  }
  return s;
}

ColorImage quantize8(const ColorImage &img) {
  ColorImage out = img;
  for (auto &plane : out.planes) {
    for (double &v : plane.samples()) {
      v = static_cast<double>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)) / 255.0;
    }
  }
  return out;
}

} // namespace wmlab
