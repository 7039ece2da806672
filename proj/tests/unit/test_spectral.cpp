#include "helpers.hpp"

#include "wmlab/errors.hpp"
#include "wmlab/png_io.hpp"
#include "wmlab/spectral.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace wmlab;

namespace {

double basis(int u, int x) {
  const double a = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
  return a * std::cos((2 * x + 1) * u * std::numbers::pi / 16.0);
}

double energy(const RasterPlane &p) {
  double s = 0.0;
  for (double v : p.samples()) {
    s += v * v;
  }
  return s;
}

} // namespace

TEST_CASE("dct8 block matches the analytic basis") {
  std::array<double, kBlockArea> px{};
  std::array<double, kBlockArea> co{};
  for (int y = 0; y < kBlock; ++y) {
    for (int x = 0; x < kBlock; ++x) {
      px.fill(0.0);
      px[y * kBlock + x] = 1.0;
      dct8_block_forward(px, co);
      for (int u = 0; u < kBlock; ++u) {
        for (int v = 0; v < kBlock; ++v) {
          CHECK(std::abs(co[u * kBlock + v] - basis(u, y) * basis(v, x)) < 1e-12);
        }
      }
    }
  }
}

TEST_CASE("dct8 constant block and round trip with padding") {
  const DctGrid g = dct8_forward(RasterPlane(8, 8, 0.25));
  CHECK(g.coeffs[0] == doctest::Approx(2.0).epsilon(1e-12));
  for (int i = 1; i < kBlockArea; ++i) {
    CHECK(std::abs(g.coeffs[i]) < 1e-12);
  }
  for (int size : {8, 13, 64, 255}) {
    const RasterPlane p = testing::random_plane(size, size + 3, size);
    const DctGrid grid = dct8_forward(p);
    CHECK(grid.block_cols == (size + 7) / 8);
    const RasterPlane back = dct8_inverse(grid);
    REQUIRE(back.same_shape(p));
    CHECK(testing::max_abs_diff(back, p) < 1e-9);
  }
  // Parseval on an unpadded plane
  const RasterPlane p = testing::random_plane(64, 40, 77);
  const DctGrid grid = dct8_forward(p);
  double e = 0.0;
  for (double c : grid.coeffs) {
    e += c * c;
  }
  CHECK(std::abs(e - energy(p)) / energy(p) < 1e-9);
}

TEST_CASE("haar 2x2 hand evaluation") {
  RasterPlane p(2, 2, std::vector<double>{1.0, 2.0, 3.0, 5.0});
  const SubbandSet s = haar_dwt(p);
  CHECK(s.ll.at(0, 0) == doctest::Approx((1 + 2 + 3 + 5) / 2.0));
  CHECK(s.hl.at(0, 0) == doctest::Approx((1 - 2 + 3 - 5) / 2.0));
  CHECK(s.lh.at(0, 0) == doctest::Approx((1 + 2 - 3 - 5) / 2.0));
  CHECK(s.hh.at(0, 0) == doctest::Approx((1 - 2 - 3 + 5) / 2.0));

  const SubbandSet c = haar_dwt(RasterPlane(6, 4, 0.4));
  CHECK(c.ll.at(1, 1) == doctest::Approx(0.8));
  CHECK(c.hh.at(2, 1) == 0.0);
}

TEST_CASE("haar round trip and parseval") {
  for (int size : {8, 9, 64, 255}) {
    const RasterPlane p = testing::random_plane(size, size + 1, 100 + size);
    CHECK(testing::max_abs_diff(haar_idwt(haar_dwt(p)), p) < 1e-9);
  }
  const RasterPlane p = testing::random_plane(64, 32, 8);
  const SubbandSet s = haar_dwt(p);
  const double e = energy(s.ll) + energy(s.lh) + energy(s.hl) + energy(s.hh);
  CHECK(std::abs(e - energy(p)) / energy(p) < 1e-9);
}

TEST_CASE("fft centered: constant, cosine and round trip") {
  const Spectrum c = fft_centered(RasterPlane(16, 12, 0.5));
  for (int row = 0; row < c.height; ++row) {
    for (int col = 0; col < c.width; ++col) {
      if (col == c.center_x() && row == c.center_y()) {
        CHECK(std::abs(c.at(col, row)) > 1.0);
      } else {
        CHECK(std::abs(c.at(col, row)) < 1e-12);
      }
    }
  }

  const int n = 32;
  const int k = 5;
  RasterPlane cosine(n, n);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      cosine.at(x, y) = std::cos(2.0 * std::numbers::pi * k * x / n);
    }
  }
  const Spectrum s = fft_centered(cosine);
  // unitary: a cosine of unit amplitude puts n/2 at +-k
  CHECK(std::abs(s.coeffs[s.index_of(k, 0)]) == doctest::Approx(n / 2.0));
  CHECK(std::abs(s.coeffs[s.index_of(-k, 0)]) == doctest::Approx(n / 2.0));
  double rest = 0.0;
  for (const auto &v : s.coeffs) {
    rest += std::norm(v);
  }
  CHECK(rest == doctest::Approx(2.0 * (n / 2.0) * (n / 2.0)));

  for (int size : {8, 15, 64, 255}) {
    const RasterPlane p = testing::random_plane(size, size + 2, 300 + size);
    const Spectrum sp = fft_centered(p);
    double e = 0.0;
    for (const auto &v : sp.coeffs) {
      e += std::norm(v);
    }
    CHECK(std::abs(e - energy(p)) / energy(p) < 1e-9);
    // conjugate symmetry of a real input
    CHECK(std::abs(sp.coeffs[sp.index_of(3, 2)] - std::conj(sp.coeffs[sp.index_of(-3, -2)])) < 1e-9);
    CHECK(testing::max_abs_diff(ifft_centered(sp), p) < 1e-9);
  }
}

TEST_CASE("transforms are linear") {
  const RasterPlane a = testing::random_plane(24, 16, 1);
  const RasterPlane b = testing::random_plane(24, 16, 2);
  RasterPlane mix(24, 16);
  for (std::size_t i = 0; i < mix.size(); ++i) {
    mix.samples()[i] = 2.0 * a.samples()[i] - 0.5 * b.samples()[i];
  }
  const DctGrid da = dct8_forward(a);
  const DctGrid db = dct8_forward(b);
  const DctGrid dm = dct8_forward(mix);
  for (std::size_t i = 0; i < dm.coeffs.size(); ++i) {
    CHECK(std::abs(dm.coeffs[i] - (2.0 * da.coeffs[i] - 0.5 * db.coeffs[i])) < 1e-9);
  }
  const Spectrum fa = fft_centered(a);
  const Spectrum fb = fft_centered(b);
  const Spectrum fm = fft_centered(mix);
  for (std::size_t i = 0; i < fm.coeffs.size(); ++i) {
    CHECK(std::abs(fm.coeffs[i] - (2.0 * fa.coeffs[i] - 0.5 * fb.coeffs[i])) < 1e-9);
  }
}

TEST_CASE("radial profile") {
  const RadialProfile zero = radial_profile(fft_centered(RasterPlane(64, 64, 0.3)));
  CHECK(zero.bins() == static_cast<std::size_t>(kDefaultRadialBins));
  for (double p : zero.power) {
    CHECK(p == 0.0);
  }
  for (std::size_t i = 0; i + 1 < zero.edges.size(); ++i) {
    CHECK(zero.edges[i] < zero.edges[i + 1]);
  }

  // Monte-Carlo mean over realisations; the innermost annuli hold few samples
  Rng rng(4);
  std::vector<double> mean_power(kDefaultRadialBins, 0.0);
  std::vector<std::size_t> counts;
  const int realisations = 16;
  for (int k = 0; k < realisations; ++k) {
    RasterPlane noise(256, 256);
    for (double &v : noise.samples()) {
      v = rng.gaussian();
    }
    const RadialProfile rp = radial_profile(fft_centered(noise));
    counts = rp.counts;
    for (std::size_t i = 0; i < rp.bins(); ++i) {
      mean_power[i] += rp.power[i] / realisations;
    }
  }
  double lo = 1e300;
  double hi = 0.0;
  for (std::size_t i = 0; i < mean_power.size(); ++i) {
    if (counts[i] > 0) {
      lo = std::min(lo, mean_power[i]);
      hi = std::max(hi, mean_power[i]);
    }
  }
  CHECK(hi / lo < 3.0);

  // a ring of radius 40 injected into the spectrum
  Spectrum ring = fft_centered(RasterPlane(128, 128, 0.0));
  for (int row = 0; row < ring.height; ++row) {
    for (int col = 0; col < ring.width; ++col) {
      const double f = std::hypot(ring.freq_x(col), ring.freq_y(row));
      if (std::abs(f - 40.0) < 0.5) {
        ring.at(col, row) = 1.0;
      }
    }
  }
  const RadialProfile rp = radial_profile(ring);
  int best = 0;
  for (std::size_t i = 0; i < rp.bins(); ++i) {
    if (rp.power[i] > rp.power[best]) {
      best = static_cast<int>(i);
    }
  }
  CHECK(best == rp.bin_of(40.0));
}

TEST_CASE("fit_prior") {
  RadialProfile p;
  for (int i = 0; i <= 10; ++i) {
    p.edges.push_back(std::pow(2.0, i * 0.5));
  }
  for (int i = 0; i < 10; ++i) {
    const double f = std::sqrt(p.edges[i] * p.edges[i + 1]);
    p.centers.push_back(f);
    p.power.push_back(3.0 / f);
    p.counts.push_back(4);
  }
  const SpectralPrior one = fit_prior(p);
  CHECK(std::abs(one.alpha - 1.0) < 1e-6);
  CHECK(one.predict(5.0) == doctest::Approx(3.0 / 5.0).epsilon(1e-9));

  for (double &v : p.power) {
    v = 2.0;
  }
  CHECK(std::abs(fit_prior(p).alpha) < 1e-6);
  CHECK(fit_prior_fixed_alpha(p, 1.0).alpha == 1.0);

  for (std::size_t i = 1; i < p.power.size(); ++i) {
    p.power[i] = 0.0;
  }
  CHECK_THROWS_AS(fit_prior(p), DegenerateSpectrumError);
}

TEST_CASE("natural photograph has a 1/f amplitude spectrum") {
  const ColorImage photo = load_image(std::filesystem::path(WMLAB_TEST_DATA) / "astronaut_256.png");
  const SpectralPrior prior = fit_prior(radial_profile(fft_centered(luminance(photo))));
  // the fit is on power, so the amplitude exponent is half of it
  const double amplitude_alpha = prior.alpha / 2.0;
  CHECK(amplitude_alpha >= 0.5);
  CHECK(amplitude_alpha <= 2.0);
}
