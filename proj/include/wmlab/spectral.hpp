#pragma once

#include "wmlab/image.hpp"

#include <array>
#include <complex>
#include <span>
#include <vector>

namespace wmlab {

// ---------------------------------------------------------------------------
// 8x8 blockwise DCT-II, orthonormal.

inline constexpr int kBlock = 8;
inline constexpr int kBlockArea = kBlock * kBlock;

/// Coefficients of every 8x8 block of a plane. The source plane is padded to a
/// multiple of 8 by edge replication; source_width/source_height remember the
/// original size so the inverse can crop. Within a block, coefficient (u,v)
/// sits at u*8+v, u being the vertical and v the horizontal frequency.
struct DctGrid {
  int block_rows = 0;
  int block_cols = 0;
  int source_width = 0;
  int source_height = 0;
  std::vector<double> coeffs;

  std::span<double, kBlockArea> block(int row, int col) {
    return std::span<double, kBlockArea>(
        coeffs.data() + (static_cast<std::size_t>(row) * block_cols + col) * kBlockArea,
        kBlockArea);
  }
  std::span<const double, kBlockArea> block(int row, int col) const {
    return std::span<const double, kBlockArea>(
        coeffs.data() + (static_cast<std::size_t>(row) * block_cols + col) * kBlockArea,
        kBlockArea);
  }
  int block_count() const noexcept { return block_rows * block_cols; }
};

/// DCT band of coefficient (u,v): u+v in [0,14].
constexpr int dct_band(int u, int v) noexcept { return u + v; }

void dct8_block_forward(std::span<const double, kBlockArea> pixels,
                        std::span<double, kBlockArea> coeffs);
void dct8_block_inverse(std::span<const double, kBlockArea> coeffs,
                        std::span<double, kBlockArea> pixels);

DctGrid dct8_forward(const RasterPlane &plane);
RasterPlane dct8_inverse(const DctGrid &grid);

// ---------------------------------------------------------------------------
// Single-level orthonormal Haar DWT.

/// For each 2x2 cell [[a,b],[c,d]]: ll=(a+b+c+d)/2, hl=(a-b+c-d)/2 (horizontal
/// detail), lh=(a+b-c-d)/2 (vertical detail), hh=(a-b-c+d)/2. Odd sizes are
/// padded by edge replication and cropped again on the inverse.
struct SubbandSet {
  RasterPlane ll;
  RasterPlane lh;
  RasterPlane hl;
  RasterPlane hh;
  int source_width = 0;
  int source_height = 0;
};

SubbandSet haar_dwt(const RasterPlane &plane);
RasterPlane haar_idwt(const SubbandSet &bands);

// ---------------------------------------------------------------------------
// Centered 2-D DFT with unitary scaling (sum |X|^2 == sum |x|^2).

struct Spectrum {
  int width = 0;
  int height = 0;
  /// Row-major, DC at (width/2, height/2).
  std::vector<std::complex<double>> coeffs;

  int center_x() const noexcept { return width / 2; }
  int center_y() const noexcept { return height / 2; }
  /// Signed frequency of a storage column/row.
  int freq_x(int col) const noexcept { return col - width / 2; }
  int freq_y(int row) const noexcept { return row - height / 2; }

  std::complex<double> &at(int col, int row) {
    return coeffs[static_cast<std::size_t>(row) * width + col];
  }
  const std::complex<double> &at(int col, int row) const {
    return coeffs[static_cast<std::size_t>(row) * width + col];
  }
  /// Storage index of signed frequency (kx, ky), wrapping periodically.
  std::size_t index_of(int kx, int ky) const noexcept;
};

Spectrum fft_centered(const RasterPlane &plane);
/// Real part of the inverse transform.
RasterPlane ifft_centered(const Spectrum &spectrum);

// ---------------------------------------------------------------------------
// Radial power statistics and the 1/f^alpha prior.

struct RadialProfile {
  /// n+1 edges; bin i covers (edges[i], edges[i+1]].
  std::vector<double> edges;
  /// Mean radius of the coefficients in each bin (geometric bin centre when
  /// a bin is empty).
  std::vector<double> centers;
  /// Mean |X|^2 per bin; zero for empty bins.
  std::vector<double> power;
  std::vector<std::size_t> counts;

  std::size_t bins() const noexcept { return power.size(); }
  /// Bin containing radius f, or -1 when f is 0 or beyond the last edge.
  int bin_of(double f) const noexcept;
};

inline constexpr int kDefaultRadialBins = 32;

/// Log-spaced annuli over (0, f_max], f = sqrt(kx^2 + ky^2); DC excluded.
RadialProfile radial_profile(const Spectrum &spectrum, int n_bins = kDefaultRadialBins);

/// log(power) = intercept - alpha * log(f).
struct SpectralPrior {
  double intercept = 0.0;
  double alpha = 0.0;

  double predict(double f) const;
};

/// Least-squares fit over bins with strictly positive power. Throws
/// DegenerateSpectrumError with fewer than two such bins.
SpectralPrior fit_prior(const RadialProfile &profile);
/// Same, with alpha held fixed; only the intercept is fitted.
SpectralPrior fit_prior_fixed_alpha(const RadialProfile &profile, double alpha);

} // namespace wmlab
