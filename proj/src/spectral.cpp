#include "wmlab/spectral.hpp"

#include "wmlab/errors.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <tuple>

namespace wmlab {

namespace {

struct DctMatrix {
  // basis[u][x] = c(u) cos(pi (2x+1) u / 16)
  std::array<std::array<double, kBlock>, kBlock> basis{};
  DctMatrix() {
    for (int u = 0; u < kBlock; ++u) {
      const double scale = u == 0 ? std::sqrt(1.0 / kBlock) : std::sqrt(2.0 / kBlock);
      for (int x = 0; x < kBlock; ++x) {
        basis[u][x] = scale * std::cos(std::numbers::pi * (2 * x + 1) * u / (2.0 * kBlock));
      }
    }
  }
};

const DctMatrix &dct_matrix() {
  static const DctMatrix m;
  return m;
}

int round_up(int n, int m) { return (n + m - 1) / m * m; }

} // namespace

void dct8_block_forward(std::span<const double, kBlockArea> pixels,
                        std::span<double, kBlockArea> coeffs) {
  const auto &c = dct_matrix().basis;
  std::array<double, kBlockArea> tmp{};
  // rows: tmp[y][v] = sum_x c[v][x] p[y][x]
  for (int y = 0; y < kBlock; ++y) {
    for (int v = 0; v < kBlock; ++v) {
      double s = 0.0;
      for (int x = 0; x < kBlock; ++x) {
        s += c[v][x] * pixels[y * kBlock + x];
      }
      tmp[y * kBlock + v] = s;
    }
  }
  // columns: out[u][v] = sum_y c[u][y] tmp[y][v]
  for (int u = 0; u < kBlock; ++u) {
    for (int v = 0; v < kBlock; ++v) {
      double s = 0.0;
      for (int y = 0; y < kBlock; ++y) {
        s += c[u][y] * tmp[y * kBlock + v];
      }
      coeffs[u * kBlock + v] = s;
    }
  }
}

void dct8_block_inverse(std::span<const double, kBlockArea> coeffs,
                        std::span<double, kBlockArea> pixels) {
  const auto &c = dct_matrix().basis;
  std::array<double, kBlockArea> tmp{};
  for (int y = 0; y < kBlock; ++y) {
    for (int v = 0; v < kBlock; ++v) {
      double s = 0.0;
      for (int u = 0; u < kBlock; ++u) {
        s += c[u][y] * coeffs[u * kBlock + v];
      }
      tmp[y * kBlock + v] = s;
    }
  }
  for (int y = 0; y < kBlock; ++y) {
    for (int x = 0; x < kBlock; ++x) {
      double s = 0.0;
      for (int v = 0; v < kBlock; ++v) {
        s += c[v][x] * tmp[y * kBlock + v];
      }
      pixels[y * kBlock + x] = s;
    }
  }
}

DctGrid dct8_forward(const RasterPlane &plane) {
  DctGrid grid;
  grid.source_width = plane.width();
  grid.source_height = plane.height();
  grid.block_cols = round_up(plane.width(), kBlock) / kBlock;
  grid.block_rows = round_up(plane.height(), kBlock) / kBlock;
  grid.coeffs.assign(static_cast<std::size_t>(grid.block_count()) * kBlockArea, 0.0);
  if (plane.empty()) {
    return grid;
  }
  std::array<double, kBlockArea> pixels{};
  for (int br = 0; br < grid.block_rows; ++br) {
    for (int bc = 0; bc < grid.block_cols; ++bc) {
      for (int y = 0; y < kBlock; ++y) {
        for (int x = 0; x < kBlock; ++x) {
          pixels[y * kBlock + x] = plane.at_clamped(bc * kBlock + x, br * kBlock + y);
        }
      }
      dct8_block_forward(pixels, grid.block(br, bc));
    }
  }
  return grid;
}

RasterPlane dct8_inverse(const DctGrid &grid) {
  RasterPlane out(grid.source_width, grid.source_height);
  std::array<double, kBlockArea> pixels{};
  for (int br = 0; br < grid.block_rows; ++br) {
    for (int bc = 0; bc < grid.block_cols; ++bc) {
      dct8_block_inverse(grid.block(br, bc), pixels);
      for (int y = 0; y < kBlock; ++y) {
        const int py = br * kBlock + y;
        if (py >= out.height()) {
          break;
        }
        for (int x = 0; x < kBlock; ++x) {
          const int px = bc * kBlock + x;
          if (px >= out.width()) {
            break;
          }
          out.at(px, py) = pixels[y * kBlock + x];
        }
      }
    }
  }
  return out;
}

SubbandSet haar_dwt(const RasterPlane &plane) {
  SubbandSet s;
  s.source_width = plane.width();
  s.source_height = plane.height();
  const int hw = round_up(plane.width(), 2) / 2;
  const int hh = round_up(plane.height(), 2) / 2;
  s.ll = RasterPlane(hw, hh);
  s.lh = RasterPlane(hw, hh);
  s.hl = RasterPlane(hw, hh);
  s.hh = RasterPlane(hw, hh);
  for (int y = 0; y < hh; ++y) {
    for (int x = 0; x < hw; ++x) {
      const double a = plane.at_clamped(2 * x, 2 * y);
      const double b = plane.at_clamped(2 * x + 1, 2 * y);
      const double c = plane.at_clamped(2 * x, 2 * y + 1);
      const double d = plane.at_clamped(2 * x + 1, 2 * y + 1);
      s.ll.at(x, y) = 0.5 * (a + b + c + d);
      s.hl.at(x, y) = 0.5 * (a - b + c - d);
      s.lh.at(x, y) = 0.5 * (a + b - c - d);
      s.hh.at(x, y) = 0.5 * (a - b - c + d);
    }
  }
  return s;
}

RasterPlane haar_idwt(const SubbandSet &bands) {
  if (!bands.ll.same_shape(bands.lh) || !bands.ll.same_shape(bands.hl) ||
      !bands.ll.same_shape(bands.hh)) {
    throw DimensionError("haar_idwt: subbands differ in size");
  }
  RasterPlane full(2 * bands.ll.width(), 2 * bands.ll.height());
  for (int y = 0; y < bands.ll.height(); ++y) {
    for (int x = 0; x < bands.ll.width(); ++x) {
      const double ll = bands.ll.at(x, y);
      const double hl = bands.hl.at(x, y);
      const double lh = bands.lh.at(x, y);
      const double hh = bands.hh.at(x, y);
      full.at(2 * x, 2 * y) = 0.5 * (ll + hl + lh + hh);
      full.at(2 * x + 1, 2 * y) = 0.5 * (ll - hl + lh - hh);
      full.at(2 * x, 2 * y + 1) = 0.5 * (ll + hl - lh - hh);
      full.at(2 * x + 1, 2 * y + 1) = 0.5 * (ll - hl - lh + hh);
    }
  }
  if (full.width() == bands.source_width && full.height() == bands.source_height) {
    return full;
  }
  RasterPlane out(bands.source_width, bands.source_height);
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      out.at(x, y) = full.at(x, y);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

// FFTW planning is not thread-safe; execution with the new-array interface is.
class PlanCache {
public:
  fftw_plan get(int width, int height, int sign) {
    std::lock_guard<std::mutex> lock(mutex_);
    const auto key = std::make_tuple(width, height, sign);
    auto it = plans_.find(key);
    if (it != plans_.end()) {
      return it->second;
    }
    auto *in = fftw_alloc_complex(static_cast<std::size_t>(width) * height);
    auto *out = fftw_alloc_complex(static_cast<std::size_t>(width) * height);
    fftw_plan plan = fftw_plan_dft_2d(height, width, in, out, sign, FFTW_ESTIMATE);
    fftw_free(in);
    fftw_free(out);
    plans_.emplace(key, plan);
    return plan;
  }
  ~PlanCache() {
    for (auto &[key, plan] : plans_) {
      fftw_destroy_plan(plan);
    }
  }

private:
  std::mutex mutex_;
  std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

PlanCache &plan_cache() {
  static PlanCache cache;
  return cache;
}

struct FftwBuffer {
  explicit FftwBuffer(std::size_t n) : data(fftw_alloc_complex(n)) {}
  ~FftwBuffer() { fftw_free(data); }
  FftwBuffer(const FftwBuffer &) = delete;
  FftwBuffer &operator=(const FftwBuffer &) = delete;
  fftw_complex *data;
};

} // namespace

std::size_t Spectrum::index_of(int kx, int ky) const noexcept {
  int col = (kx + width / 2) % width;
  int row = (ky + height / 2) % height;
  if (col < 0) {
    col += width;
  }
  if (row < 0) {
    row += height;
  }
  return static_cast<std::size_t>(row) * width + col;
}

Spectrum fft_centered(const RasterPlane &plane) {
  const int w = plane.width();
  const int h = plane.height();
  Spectrum s;
  s.width = w;
  s.height = h;
  if (plane.empty()) {
    return s;
  }
  const std::size_t n = plane.size();
  FftwBuffer in(n);
  FftwBuffer out(n);
  const auto src = plane.samples();
  for (std::size_t i = 0; i < n; ++i) {
    in.data[i][0] = src[i];
    in.data[i][1] = 0.0;
  }
  fftw_execute_dft(plan_cache().get(w, h, FFTW_FORWARD), in.data, out.data);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  s.coeffs.resize(n);
  for (int row = 0; row < h; ++row) {
    const int dst_row = (row + h / 2) % h;
    for (int col = 0; col < w; ++col) {
      const int dst_col = (col + w / 2) % w;
      const auto &v = out.data[static_cast<std::size_t>(row) * w + col];
      s.coeffs[static_cast<std::size_t>(dst_row) * w + dst_col] = {v[0] * scale, v[1] * scale};
    }
  }
  return s;
}

RasterPlane ifft_centered(const Spectrum &spectrum) {
  const int w = spectrum.width;
  const int h = spectrum.height;
  RasterPlane out(w, h);
  if (spectrum.coeffs.empty()) {
    return out;
  }
  const std::size_t n = spectrum.coeffs.size();
  FftwBuffer in(n);
  FftwBuffer res(n);
  for (int row = 0; row < h; ++row) {
    const int src_row = (row + h / 2) % h;
    for (int col = 0; col < w; ++col) {
      const int src_col = (col + w / 2) % w;
      const auto &v = spectrum.coeffs[static_cast<std::size_t>(src_row) * w + src_col];
      auto &dst = in.data[static_cast<std::size_t>(row) * w + col];
      dst[0] = v.real();
      dst[1] = v.imag();
    }
  }
  fftw_execute_dft(plan_cache().get(w, h, FFTW_BACKWARD), in.data, res.data);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  auto dst = out.samples();
  for (std::size_t i = 0; i < n; ++i) {
    dst[i] = res.data[i][0] * scale;
  }
  return out;
}

// ---------------------------------------------------------------------------

int RadialProfile::bin_of(double f) const noexcept {
  if (f <= 0.0 || edges.empty() || f > edges.back()) {
    return -1;
  }
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    if (f > edges[i] && f <= edges[i + 1]) {
      return static_cast<int>(i);
    }
  }
  return -1;
}

RadialProfile radial_profile(const Spectrum &spectrum, int n_bins) {
  if (n_bins < 4) {
    throw PreconditionError("radial_profile needs at least 4 bins");
  }
  RadialProfile p;
  double f_max = 0.0;
  for (int row = 0; row < spectrum.height; ++row) {
    for (int col = 0; col < spectrum.width; ++col) {
      f_max = std::max(f_max, std::hypot(spectrum.freq_x(col), spectrum.freq_y(row)));
    }
  }
  p.edges.resize(n_bins + 1);
  p.edges[0] = 0.0;
  for (int i = 1; i <= n_bins; ++i) {
    p.edges[i] = std::pow(std::max(f_max, 1.0), static_cast<double>(i) / n_bins);
  }
  p.edges[n_bins] = std::max(f_max, 1.0);
  p.power.assign(n_bins, 0.0);
  p.counts.assign(n_bins, 0);
  std::vector<double> radius_sum(n_bins, 0.0);
  const double log_max = std::log(std::max(f_max, 1.0));
  for (int row = 0; row < spectrum.height; ++row) {
    for (int col = 0; col < spectrum.width; ++col) {
      const double f = std::hypot(spectrum.freq_x(col), spectrum.freq_y(row));
      if (f <= 0.0) {
        continue;
      }
      int bin = f <= 1.0 || log_max <= 0.0
                    ? 0
                    : static_cast<int>(std::ceil(std::log(f) / log_max * n_bins)) - 1;
      bin = std::clamp(bin, 0, n_bins - 1);
      // guard the log rounding at bin edges
      while (bin > 0 && f <= p.edges[bin]) {
        --bin;
      }
      while (bin < n_bins - 1 && f > p.edges[bin + 1]) {
        ++bin;
      }
      p.power[bin] += std::norm(spectrum.at(col, row));
      radius_sum[bin] += f;
      ++p.counts[bin];
    }
  }
  p.centers.resize(n_bins);
  for (int i = 0; i < n_bins; ++i) {
    if (p.counts[i] > 0) {
      p.power[i] /= static_cast<double>(p.counts[i]);
      p.centers[i] = radius_sum[i] / static_cast<double>(p.counts[i]);
    } else {
      p.centers[i] = i == 0 ? 0.5 * p.edges[1] : std::sqrt(p.edges[i] * p.edges[i + 1]);
    }
  }
  return p;
}

double SpectralPrior::predict(double f) const { return std::exp(intercept - alpha * std::log(f)); }

namespace {
std::vector<std::pair<double, double>> log_points(const RadialProfile &profile) {
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < profile.bins(); ++i) {
    if (profile.power[i] > 0.0 && profile.centers[i] > 0.0) {
      pts.emplace_back(std::log(profile.centers[i]), std::log(profile.power[i]));
    }
  }
  if (pts.size() < 2) {
    throw DegenerateSpectrumError("fewer than two radial bins carry power");
  }
  return pts;
}
} // namespace

SpectralPrior fit_prior(const RadialProfile &profile) {
  const auto pts = log_points(profile);
  double mx = 0.0;
  double my = 0.0;
  for (const auto &[x, y] : pts) {
    mx += x;
    my += y;
  }
  mx /= static_cast<double>(pts.size());
  my /= static_cast<double>(pts.size());
  double sxx = 0.0;
  double sxy = 0.0;
  for (const auto &[x, y] : pts) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  if (sxx <= 0.0) {
    throw DegenerateSpectrumError("radial bins share a single frequency");
  }
  const double slope = sxy / sxx;
  return SpectralPrior{my - slope * mx, -slope};
}

SpectralPrior fit_prior_fixed_alpha(const RadialProfile &profile, double alpha) {
  const auto pts = log_points(profile);
  double sum = 0.0;
  for (const auto &[x, y] : pts) {
    sum += y + alpha * x;
  }
  return SpectralPrior{sum / static_cast<double>(pts.size()), alpha};
}

} // namespace wmlab
