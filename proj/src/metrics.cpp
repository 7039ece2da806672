#include "wmlab/metrics.hpp"

#include "wmlab/errors.hpp"
#include "wmlab/watermarks.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <vector>

namespace wmlab {

namespace {

ColorImage as_rgb(const ColorImage &img) {
  return img.space == ColorSpace::RGB ? img : ycbcr_to_rgb(img);
}

void require_same_shape(const ColorImage &a, const ColorImage &b, const char *what) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(what) + ": images differ in size");
  }
}

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kC1 = (0.01 * 1.0) * (0.01 * 1.0);
constexpr double kC2 = (0.03 * 1.0) * (0.03 * 1.0);

std::array<double, kSsimWindow> gaussian_window() {
  std::array<double, kSsimWindow> w{};
  double sum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - kSsimWindow / 2;
    w[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    sum += w[i];
  }
  for (double &v : w) {
    v /= sum;
  }
  return w;
}

// Valid-region separable filtering: output is (w-10) x (h-10).
std::vector<double> filter_valid(const std::vector<double> &src, int width, int height,
                                 const std::array<double, kSsimWindow> &w) {
  const int ow = width - kSsimWindow + 1;
  const int oh = height - kSsimWindow + 1;
  std::vector<double> tmp(static_cast<std::size_t>(ow) * height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) {
        s += w[k] * src[static_cast<std::size_t>(y) * width + x + k];
      }
      tmp[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) {
        s += w[k] * tmp[static_cast<std::size_t>(y + k) * ow + x];
      }
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  return out;
}

} // namespace

double psnr(const ColorImage &a, const ColorImage &b) {
  require_same_shape(a, b, "psnr");
  const ColorImage ra = as_rgb(a);
  const ColorImage rb = as_rgb(b);
  double sse = 0.0;
  double max_diff = 0.0;
  std::size_t n = 0;
  for (int c = 0; c < 3; ++c) {
    const auto pa = ra.planes[c].samples();
    const auto pb = rb.planes[c].samples();
    for (std::size_t i = 0; i < pa.size(); ++i) {
      const double d = pa[i] - pb[i];
      sse += d * d;
      max_diff = std::max(max_diff, std::abs(d));
    }
    n += pa.size();
  }
  if (max_diff < 1e-12 || n == 0) {
    return kPsnrCap;
  }
  return 10.0 * std::log10(static_cast<double>(n) / sse);
}

double ssim_plane(const RasterPlane &a, const RasterPlane &b) {
  if (!a.same_shape(b)) {
    throw DimensionError("ssim: planes differ in size");
  }
  if (a.width() < kSsimWindow || a.height() < kSsimWindow) {
    throw DimensionError("ssim: image smaller than the 11x11 window");
  }
  const int w = a.width();
  const int h = a.height();
  const std::size_t n = a.size();
  std::vector<double> x(a.samples().begin(), a.samples().end());
  std::vector<double> y(b.samples().begin(), b.samples().end());
  std::vector<double> xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto win = gaussian_window();
  const auto mx = filter_valid(x, w, h, win);
  const auto my = filter_valid(y, w, h, win);
  const auto sxx = filter_valid(xx, w, h, win);
  const auto syy = filter_valid(yy, w, h, win);
  const auto sxy = filter_valid(xy, w, h, win);
  double total = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = sxx[i] - mx[i] * mx[i];
    const double vy = syy[i] - my[i] * my[i];
    const double cov = sxy[i] - mx[i] * my[i];
    const double num = (2.0 * mx[i] * my[i] + kC1) * (2.0 * cov + kC2);
    const double den = (mx[i] * mx[i] + my[i] * my[i] + kC1) * (vx + vy + kC2);
    total += num / den;
  }
  return total / static_cast<double>(mx.size());
}

double ssim(const ColorImage &a, const ColorImage &b) {
  require_same_shape(a, b, "ssim");
  const ColorImage ra = as_rgb(a);
  const ColorImage rb = as_rgb(b);
  double sum = 0.0;
  for (int c = 0; c < 3; ++c) {
    sum += ssim_plane(ra.planes[c], rb.planes[c]);
  }
  return sum / 3.0;
}

double ssim_lum(const ColorImage &a, const ColorImage &b) {
  require_same_shape(a, b, "ssim_lum");
  return ssim_plane(luminance(a), luminance(b));
}

QualityReport quality(const ColorImage &attacked, const ColorImage &reference) {
  return QualityReport{psnr(attacked, reference), ssim(attacked, reference),
                       ssim_lum(attacked, reference)};
}

double binom_tail_p(int k, int n) {
  if (n < 0 || n > 64 || k < 0) {
    throw PreconditionError("binom_tail_p: need 0 <= k and n <= 64");
  }
  if (k > n) {
    throw PreconditionError("binom_tail_p: k exceeds n");
  }
  // Pascal row in 128-bit integers; C(64, 32) < 2^63.
  std::vector<unsigned __int128> row(n + 1, 0);
  row[0] = 1;
  for (int i = 1; i <= n; ++i) {
    for (int j = i; j > 0; --j) {
      row[j] += row[j - 1];
    }
  }
  unsigned __int128 tail = 0;
  for (int i = k; i <= n; ++i) {
    tail += row[i];
  }
  const long double p = std::ldexp(static_cast<long double>(tail), -n);
  return static_cast<double>(p);
}

double wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y,
                            Alternative alternative) {
  if (x.size() != y.size()) {
    throw PreconditionError("wilcoxon: samples differ in length");
  }
  std::vector<double> diffs;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    if (d != 0.0) {
      diffs.push_back(d);
    }
  }
  if (diffs.empty()) {
    throw PreconditionError("wilcoxon: all differences are zero");
  }
  const std::size_t n = diffs.size();
  if (n < 5) {
    throw PreconditionError("wilcoxon: fewer than 5 non-zero differences");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(diffs[a]) < std::abs(diffs[b]);
  });
  // Doubled ranks stay integral under tie averaging.
  std::vector<long> rank2(n);
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::abs(diffs[order[j + 1]]) == std::abs(diffs[order[i]])) {
      ++j;
    }
    const long doubled = static_cast<long>(i + 1 + j + 1);
    for (std::size_t k = i; k <= j; ++k) {
      rank2[order[k]] = doubled;
    }
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  long w_plus2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (diffs[i] > 0.0) {
      w_plus2 += rank2[i];
    }
  }

  double p_upper = 0.0;
  double p_lower = 0.0;
  if (n <= kWilcoxonExactLimit) {
    const long total2 = std::accumulate(rank2.begin(), rank2.end(), 0L);
    std::vector<std::uint64_t> counts(static_cast<std::size_t>(total2) + 1, 0);
    counts[0] = 1;
    long reach = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (long s = reach; s >= 0; --s) {
        if (counts[s] != 0) {
          counts[s + rank2[i]] += counts[s];
        }
      }
      reach += rank2[i];
    }
    const long double denom = std::ldexp(1.0L, static_cast<int>(n));
    long double upper = 0.0L;
    long double lower = 0.0L;
    for (long s = 0; s <= total2; ++s) {
      if (s >= w_plus2) {
        upper += static_cast<long double>(counts[s]);
      }
      if (s <= w_plus2) {
        lower += static_cast<long double>(counts[s]);
      }
    }
    p_upper = static_cast<double>(upper / denom);
    p_lower = static_cast<double>(lower / denom);
  } else {
    const double nn = static_cast<double>(n);
    const double mean = nn * (nn + 1.0) / 4.0;
    const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
    const double z = (0.5 * static_cast<double>(w_plus2) - mean) / std::sqrt(var);
    p_upper = 0.5 * std::erfc(z / std::sqrt(2.0));
    p_lower = 0.5 * std::erfc(-z / std::sqrt(2.0));
  }
  if (alternative == Alternative::greater) {
    return p_upper;
  }
  return std::min(1.0, 2.0 * std::min(p_upper, p_lower));
}

bool attack_success(const DetectionReport &report) { return !report.detected; }

} // namespace wmlab
