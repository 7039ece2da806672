#pragma once

#include "wmlab/image.hpp"

#include <span>

namespace wmlab {

struct DetectionReport;

/// Reported instead of +inf when two images are identical.
inline constexpr double kPsnrCap = 99.0;

struct QualityReport {
  double psnr = 0.0;
  double ssim = 0.0;
  double ssim_lum = 0.0;
};

/// 10 log10(1/MSE) over all RGB samples, peak 1.0. Returns kPsnrCap when the
/// largest absolute difference is below 1e-12; near-identical images may
/// score above it.
double psnr(const ColorImage &a, const ColorImage &b);

/// Mean SSIM (11x11 Gaussian window, sigma 1.5, K1=0.01, K2=0.03, L=1) over
/// the positions where the window fits.
double ssim_plane(const RasterPlane &a, const RasterPlane &b);
/// SSIM averaged over the three RGB channels.
double ssim(const ColorImage &a, const ColorImage &b);
/// SSIM of the BT.601 luminance planes only.
double ssim_lum(const ColorImage &a, const ColorImage &b);

QualityReport quality(const ColorImage &attacked, const ColorImage &reference);

/// Exact P(X >= k) for X ~ Binomial(n, 1/2), 0 <= k <= n <= 64.
double binom_tail_p(int k, int n);

enum class Alternative { two_sided, greater };

/// Wilcoxon signed-rank test on paired samples, differences x - y. Zero
/// differences are dropped; ties get average ranks. Exact null distribution
/// for up to 25 non-zero pairs, normal approximation with tie correction
/// beyond. `greater` tests whether x tends to exceed y.
double wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y,
                            Alternative alternative);

inline constexpr int kWilcoxonExactLimit = 25;

/// True when the watermark was not detected under the policy the report was
/// produced with.
bool attack_success(const DetectionReport &report);

} // namespace wmlab
