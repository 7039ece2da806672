#include "corpus.hpp"
#include "helpers.hpp"

#include "wmlab/attack.hpp"
#include "wmlab/errors.hpp"
#include "wmlab/metrics.hpp"
#include "wmlab/spectral.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace wmlab;

namespace {

ColorImage gray(const RasterPlane &p) { return ColorImage(p, p, p, ColorSpace::RGB); }

// Hermitian spectrum with |X| = f^-1 exactly and random phases.
RasterPlane exact_pink(int n, std::uint64_t seed) {
  Spectrum s = fft_centered(RasterPlane(n, n, 0.0));
  Rng rng(seed);
  for (int row = 0; row < n; ++row) {
    for (int col = 0; col < n; ++col) {
      const int kx = s.freq_x(col);
      const int ky = s.freq_y(row);
      if (kx == 0 && ky == 0) {
        continue;
      }
      const std::size_t mirror = s.index_of(-kx, -ky);
      const std::size_t here = s.index_of(kx, ky);
      if (mirror < here) {
        continue;
      }
      const double mag = 1.0 / std::hypot(kx, ky);
      const double phase = mirror == here ? 0.0 : rng.uniform(0.0, 2.0 * std::numbers::pi);
      s.coeffs[here] = std::polar(mag, phase);
      s.coeffs[mirror] = std::conj(s.coeffs[here]);
    }
  }
  s.at(s.center_x(), s.center_y()) = 0.5 * n;
  return ifft_centered(s);
}

double step_tv(const RasterPlane &p) {
  double tv = 0.0;
  for (int y = 0; y < p.height(); ++y) {
    for (int x = 0; x < p.width(); ++x) {
      const double dx = x + 1 < p.width() ? p.at(x + 1, y) - p.at(x, y) : 0.0;
      const double dy = y + 1 < p.height() ? p.at(x, y + 1) - p.at(x, y) : 0.0;
      tv += std::hypot(dx, dy);
    }
  }
  return tv;
}

} // namespace

TEST_CASE("band noise touches only its band") {
  const DctGrid grid = dct8_forward(testing::random_plane(64, 64, 1));
  const DctGrid noisy = corrupt_band_noise(grid, {0, 5, 0.3}, 9);
  for (std::size_t i = 0; i < grid.coeffs.size(); ++i) {
    const int u = static_cast<int>(i % kBlockArea) / kBlock;
    const int v = static_cast<int>(i % kBlockArea) % kBlock;
    if (u + v >= 5) {
      CHECK(noisy.coeffs[i] == grid.coeffs[i]);
    } else {
      CHECK(noisy.coeffs[i] != grid.coeffs[i]);
    }
  }
  CHECK(corrupt_band_noise(grid, {0, 15, 0.0}, 3).coeffs == grid.coeffs);
  CHECK(corrupt_band_noise(grid, {0, 5, 0.3}, 9).coeffs == noisy.coeffs);

  const DctGrid zero = dct8_forward(RasterPlane(800, 800, 0.0));
  const DctGrid n = corrupt_band_noise(zero, {10, 15, 0.4}, 1);
  double ss = 0.0;
  long count = 0;
  for (std::size_t i = 0; i < n.coeffs.size(); ++i) {
    const int k = static_cast<int>(i % kBlockArea);
    if (k / kBlock + k % kBlock >= 10) {
      ss += n.coeffs[i] * n.coeffs[i];
      ++count;
    }
  }
  CHECK(std::abs(std::sqrt(ss / count) - 0.4) < 0.02 * 0.4);

  CHECK_THROWS_AS(BandNoiseSpec({5, 5, 0.1}).validate(), PreconditionError);
  CHECK_THROWS_AS(BandNoiseSpec({0, 16, 0.1}).validate(), PreconditionError);
  CHECK_THROWS_AS(BandNoiseSpec({0, 5, -1.0}).validate(), PreconditionError);
  CHECK(default_band_specs().size() == 18);
}

TEST_CASE("identity and DC-only models") {
  const ColorImage img = testing::random_image(40, 24, 3);
  CHECK(testing::max_abs_diff(apply_freq_recon(img, ShrinkageModel::identity()), img) < 1e-6);

  ShrinkageModel dc = ShrinkageModel::identity();
  for (int i = 1; i < kBlockArea; ++i) {
    dc.gains[i] = 0.0;
  }
  const ColorImage out = apply_freq_recon(img, dc);
  for (int c = 0; c < 3; ++c) {
    for (int by = 0; by < 3; ++by) {
      for (int bx = 0; bx < 5; ++bx) {
        double mean = 0.0;
        for (int y = 0; y < 8; ++y) {
          for (int x = 0; x < 8; ++x) {
            mean += img.planes[c].at(8 * bx + x, 8 * by + y) / 64.0;
          }
        }
        CHECK(std::abs(out.planes[c].at(8 * bx + 3, 8 * by + 5) - mean) < 1e-9);
      }
    }
  }
}

TEST_CASE("training beats identity, is deterministic and learns the noisy band") {
  const auto &imgs = testing::scenes(24);
  const std::vector<ColorImage> train(imgs.begin(), imgs.begin() + 20);
  const std::vector<ColorImage> held(imgs.begin() + 20, imgs.begin() + 24);
  TrainingOptions opt;
  opt.epochs = 40;
  opt.samples_per_epoch = 6000;
  opt.seed = 5;
  const auto specs = default_band_specs();
  const ShrinkageModel a = train_shrinkage(train, specs, opt);
  const ShrinkageModel b = train_shrinkage(train, specs, opt);
  CHECK(a.gains == b.gains);
  CHECK(a.mask.theta == b.mask.theta);
  CHECK(a.final_loss == b.final_loss);

  const double trained = corrupted_l1_loss(a, held, specs, 77);
  const double identity = corrupted_l1_loss(ShrinkageModel::identity(), held, specs, 77);
  CHECK(trained < identity);
  for (int i = 0; i < kBlockArea; ++i) {
    CHECK(std::isfinite(a.gains[i]));
    CHECK(a.mask.at(i) > 0.0);
    CHECK(a.mask.at(i) < 1.0);
  }
  CHECK(a.factor(0) >= 0.9);
  CHECK(a.factor(0) <= 1.1);

  const ShrinkageModel hi = train_shrinkage(train, {{10, 15, 0.3}}, opt);
  double low_band = 0.0;
  double high_band = 0.0;
  int n_low = 0;
  int n_high = 0;
  for (int u = 0; u < kBlock; ++u) {
    for (int v = 0; v < kBlock; ++v) {
      if (u + v < 5) {
        low_band += hi.factor(u * kBlock + v);
        ++n_low;
      } else if (u + v >= 10) {
        high_band += hi.factor(u * kBlock + v);
        ++n_high;
      }
    }
  }
  CHECK(high_band / n_high < low_band / n_low);

  const ShrinkageModel clean = train_shrinkage(train, {{0, 15, 0.0}}, opt);
  CHECK(corrupted_l1_loss(clean, held, {{0, 15, 0.0}}, 1) < 1e-3);
}

TEST_CASE("training errors") {
  auto code_of = [](auto &&fn) {
    try {
      fn();
    } catch (const TrainingError &e) {
      return static_cast<int>(e.code());
    }
    return -1;
  };
  CHECK(code_of([] { train_shrinkage({}, default_band_specs()); }) ==
        static_cast<int>(TrainingErrc::empty_dataset));
  CHECK(code_of([] { train_shrinkage({testing::random_image(16, 16, 1)}, {}); }) ==
        static_cast<int>(TrainingErrc::no_specs));
  TrainingOptions wild;
  wild.learn_rate = 1e300;
  wild.epochs = 3;
  wild.samples_per_epoch = 500;
  const int code = code_of([&] { train_shrinkage(testing::scenes(20), default_band_specs(), wild); });
  // either the guard keeps the identity model or divergence is reported
  CHECK((code == -1 || code == static_cast<int>(TrainingErrc::diverged)));
}

TEST_CASE("model json round trip") {
  ShrinkageModel m = ShrinkageModel::identity();
  m.gains[5] = 0.25;
  m.mask.theta[7] = -1.5;
  m.bands = {{0, 5}, {5, 10}};
  m.sigmas = {0.1, 0.2};
  m.seed = 17;
  m.epochs = 3;
  m.final_loss = 0.125;
  const nlohmann::json doc = model_to_json(m);
  CHECK(doc.at("format_version") == kModelFormatVersion);
  CHECK(doc.at("gains").size() == 64);
  CHECK(doc.at("theta").size() == 64);
  const ShrinkageModel back = model_from_json(nlohmann::json::parse(doc.dump()));
  CHECK(back.gains == m.gains);
  CHECK(back.mask.theta == m.mask.theta);
  CHECK(back.bands == m.bands);
  CHECK(back.sigmas == m.sigmas);
  CHECK(back.final_loss == m.final_loss);

  nlohmann::json bad = doc;
  bad["format_version"] = 99;
  CHECK_THROWS_AS(model_from_json(bad), ConfigError);
  bad = doc;
  bad["gains"].erase(0);
  CHECK_THROWS_AS(model_from_json(bad), ConfigError);

  testing::ScratchDir dir("model");
  save_model(m, (dir / "m.json").string());
  CHECK(load_model((dir / "m.json").string()).gains == m.gains);
  CHECK_THROWS_AS(load_model((dir / "nope.json").string()), ImageIoError);
}

TEST_CASE("spectral projection") {
  const int n = 256;
  const RasterPlane pink = exact_pink(n, 3);
  const ColorImage on_manifold = gray(pink);
  CHECK(testing::max_abs_diff(spectral_projection(on_manifold), on_manifold) < 1e-6);

  const ColorImage flat = gray(RasterPlane(64, 64, 0.4));
  CHECK(testing::max_abs_diff(spectral_projection(flat), flat) == 0.0);

  const RadialProfile clean_profile = radial_profile(fft_centered(pink));
  const SpectralPrior prior = fit_prior(clean_profile);
  Spectrum spiked = fft_centered(pink);
  const int target = 25;
  for (int row = 0; row < n; ++row) {
    for (int col = 0; col < n; ++col) {
      const double f = std::hypot(spiked.freq_x(col), spiked.freq_y(row));
      if (clean_profile.bin_of(f) == target) {
        spiked.at(col, row) *= std::sqrt(10.0 * prior.predict(clean_profile.centers[target]) /
                                         clean_profile.power[target]);
      }
    }
  }
  const RasterPlane spiked_plane = ifft_centered(spiked);
  const RadialProfile before = radial_profile(fft_centered(spiked_plane));
  CHECK(before.power[target] == doctest::Approx(10.0 * prior.predict(before.centers[target])));

  const ColorImage out = spectral_projection(gray(spiked_plane), {}, 2.0);
  const RadialProfile after = radial_profile(fft_centered(luminance(out)));
  const double expected = prior.predict(after.centers[target]);
  CHECK(std::abs(after.power[target] - expected) / expected < 0.05);
  for (std::size_t b = 0; b < after.bins(); ++b) {
    if (static_cast<int>(b) != target) {
      CHECK(std::abs(after.power[b] - before.power[b]) <= 1e-6 * std::max(1.0, before.power[b]));
    }
  }
  CHECK_THROWS_AS(spectral_projection(flat, {}, 1.0), PreconditionError);
}

TEST_CASE("tv refiner") {
  const ColorImage img = testing::random_image(32, 32, 4);
  CHECK(testing::max_abs_diff(tv_refine(img, 0.0, 50, 0.05), img) < 1e-9);

  RasterPlane clean(64, 64);
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      clean.at(x, y) = x < 32 ? 0.2 : 0.8;
    }
  }
  Rng rng(12);
  RasterPlane noisy = clean;
  for (double &v : noisy.samples()) {
    v += 0.08 * rng.gaussian();
  }
  const ColorImage out = tv_refine(gray(noisy), 0.08, 120, 0.05);
  CHECK(step_tv(out.planes[0]) < step_tv(noisy));
  CHECK(psnr(out, gray(clean)) > psnr(gray(noisy), gray(clean)));
}

TEST_CASE("color correction") {
  ColorImage ref(2, 1);
  ColorImage cand(2, 1);
  for (int c = 0; c < 3; ++c) {
    ref.planes[c].at(0, 0) = 0.0;
    ref.planes[c].at(1, 0) = 1.0;
    cand.planes[c].at(0, 0) = 0.25;
    cand.planes[c].at(1, 0) = 0.75;
  }
  const ColorImage out = color_correct(ref, cand);
  for (int c = 0; c < 3; ++c) {
    CHECK(out.planes[c].at(0, 0) == doctest::Approx(0.0));
    CHECK(out.planes[c].at(1, 0) == doctest::Approx(1.0));
  }

  ColorImage constant(4, 4);
  for (auto &p : constant.planes) {
    std::fill(p.samples().begin(), p.samples().end(), 0.3);
  }
  const ColorImage r = testing::random_image(4, 4, 2);
  const ColorImage filled = color_correct(r, constant);
  const ColorStats rs = channel_stats(r);
  for (int c = 0; c < 3; ++c) {
    for (double v : filled.planes[c].samples()) {
      CHECK(v == rs.mean[c]);
    }
  }

  const ColorImage a = testing::random_image(30, 20, 5);
  CHECK(testing::max_abs_diff(color_correct(a, a), a) < 1e-9);
  CHECK_THROWS_AS(color_correct(a, testing::random_image(20, 20, 1)), DimensionError);
}

TEST_CASE("pipeline stage bookkeeping") {
  const ColorImage img = testing::scenes(1)[0];
  PipelineConfig only_color;
  only_color.freq_recon = false;
  only_color.sem_refine = false;
  const AttackReport r = run_pipeline(img, only_color);
  CHECK(testing::max_abs_diff(r.output, img) < 1e-6);
  CHECK_FALSE(r.after_freq_recon);
  CHECK_FALSE(r.after_sem_refine);
  CHECK(r.after_color_corr);

  PipelineConfig none = only_color;
  none.color_corr = false;
  CHECK_THROWS_AS(none.validate(), ConfigError);
  PipelineConfig no_model;
  CHECK_THROWS_AS(no_model.validate(), ConfigError);

  PipelineConfig full;
  full.model = ShrinkageModel::identity();
  full.refiner.iterations = 20;
  const SchemeKey key = make_key(Scheme::dwtdct, 4);
  const AttackReport f = run_pipeline(embed(img, key), full, {key});
  REQUIRE(f.after_freq_recon);
  REQUIRE(f.after_sem_refine);
  REQUIRE(f.after_color_corr);
  const ColorImage expect = color_correct(embed(img, key), *f.after_sem_refine);
  CHECK(testing::max_abs_diff(expect, *f.after_color_corr) == 0.0);
  CHECK(testing::max_abs_diff(f.output, *f.after_color_corr) == 0.0);
  CHECK(f.detections.size() == 1);
  CHECK(f.fidelity.psnr > 20.0);

  const nlohmann::json j = attack_report_to_json(f);
  CHECK(j.contains("fidelity"));
}
