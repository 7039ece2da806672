#include "wmlab/attack.hpp"

#include "wmlab/errors.hpp"
#include "wmlab/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>

namespace wmlab {

namespace {

using Block = std::array<double, kBlockArea>;

constexpr double kIdentityLogit = 30.0;
constexpr double kInitialLogit = 4.0;

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

ColorImage to_ycbcr(const ColorImage &img) {
  return img.space == ColorSpace::YCbCr ? img : rgb_to_ycbcr(img);
}

ColorImage to_rgb(const ColorImage &img) {
  return img.space == ColorSpace::RGB ? img : ycbcr_to_rgb(img);
}

ColorImage to_space(const ColorImage &img, ColorSpace space) {
  return space == ColorSpace::RGB ? to_rgb(img) : to_ycbcr(img);
}

std::vector<Block> collect_blocks(const std::vector<ColorImage> &images) {
  std::vector<Block> pool;
  for (const ColorImage &img : images) {
    const ColorImage ycc = to_ycbcr(img);
    for (const RasterPlane &plane : ycc.planes) {
      const DctGrid grid = dct8_forward(plane);
      for (int r = 0; r < grid.block_rows; ++r) {
        for (int c = 0; c < grid.block_cols; ++c) {
          const auto b = grid.block(r, c);
          Block copy;
          std::copy(b.begin(), b.end(), copy.begin());
          pool.push_back(copy);
        }
      }
    }
  }
  return pool;
}

void corrupt_block(Block &y, const BandNoiseSpec &spec, Rng &rng) {
  for (int u = 0; u < kBlock; ++u) {
    for (int v = 0; v < kBlock; ++v) {
      if (spec.covers(u, v)) {
        y[u * kBlock + v] += spec.sigma * rng.gaussian();
      }
    }
  }
}

struct CorruptedSet {
  std::vector<Block> clean;
  std::vector<Block> noisy;
};

CorruptedSet corrupt_all(std::vector<Block> clean, const std::vector<BandNoiseSpec> &specs,
                         std::uint64_t seed) {
  CorruptedSet set;
  set.noisy = clean;
  Rng rng(seed);
  for (std::size_t i = 0; i < set.noisy.size(); ++i) {
    corrupt_block(set.noisy[i], specs[i % specs.size()], rng);
  }
  set.clean = std::move(clean);
  return set;
}

double l1_loss(const std::array<double, kBlockArea> &factor, const CorruptedSet &set) {
  if (set.clean.empty()) {
    return 0.0;
  }
  double sum = 0.0;
  for (std::size_t b = 0; b < set.clean.size(); ++b) {
    for (int i = 0; i < kBlockArea; ++i) {
      sum += std::abs(factor[i] * set.noisy[b][i] - set.clean[b][i]);
    }
  }
  return sum / (static_cast<double>(set.clean.size()) * kBlockArea);
}

std::array<double, kBlockArea> factors_of(const ShrinkageModel &m) {
  std::array<double, kBlockArea> f{};
  for (int i = 0; i < kBlockArea; ++i) {
    f[i] = m.factor(i);
  }
  return f;
}

void record_specs(ShrinkageModel &model, const std::vector<BandNoiseSpec> &specs) {
  std::set<std::pair<int, int>> bands;
  std::set<double> sigmas;
  for (const auto &s : specs) {
    bands.insert({s.t1, s.t2});
    sigmas.insert(s.sigma);
  }
  model.bands.assign(bands.begin(), bands.end());
  model.sigmas.assign(sigmas.begin(), sigmas.end());
}

void check_specs(const std::vector<BandNoiseSpec> &specs) {
  if (specs.empty()) {
    throw TrainingError(TrainingErrc::no_specs, "no corruption specs given");
  }
  for (const auto &s : specs) {
    s.validate();
  }
}

} // namespace

void BandNoiseSpec::validate() const {
  if (t1 < 0 || t2 > 15 || t1 >= t2) {
    throw PreconditionError("band spec: need 0 <= t1 < t2 <= 15");
  }
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw PreconditionError("band spec: sigma must be finite and non-negative");
  }
}

std::vector<BandNoiseSpec> default_band_specs() {
  std::vector<BandNoiseSpec> specs;
  for (auto [t1, t2] : {std::pair{0, 5}, std::pair{5, 10}, std::pair{10, 15}}) {
    for (double sigma : {0.1, 0.2, 0.3, 0.4, 0.5, 0.6}) {
      specs.push_back({t1, t2, sigma});
    }
  }
  return specs;
}

DctGrid corrupt_band_noise(const DctGrid &grid, const BandNoiseSpec &spec, std::uint64_t seed) {
  spec.validate();
  DctGrid out = grid;
  Rng rng(seed);
  for (int r = 0; r < out.block_rows; ++r) {
    for (int c = 0; c < out.block_cols; ++c) {
      auto block = out.block(r, c);
      for (int u = 0; u < kBlock; ++u) {
        for (int v = 0; v < kBlock; ++v) {
          if (spec.covers(u, v)) {
            block[u * kBlock + v] += spec.sigma * rng.gaussian();
          }
        }
      }
    }
  }
  return out;
}

double FrequencyMask::at(int i) const { return sigmoid(theta[i]); }

ShrinkageModel ShrinkageModel::identity() {
  ShrinkageModel m;
  m.gains.fill(1.0);
  m.mask.theta.fill(kIdentityLogit);
  return m;
}

ShrinkageModel train_shrinkage(const std::vector<ColorImage> &clean_images,
                               const std::vector<BandNoiseSpec> &specs,
                               const TrainingOptions &options) {
  if (clean_images.empty()) {
    throw TrainingError(TrainingErrc::empty_dataset, "training set is empty");
  }
  check_specs(specs);
  if (options.epochs < 0 || options.batch_size <= 0 || options.samples_per_epoch <= 0 ||
      !(options.learn_rate > 0.0) || !(options.holdout_fraction > 0.0 && options.holdout_fraction < 1.0)) {
    throw PreconditionError("training options out of range");
  }

  std::vector<Block> pool = collect_blocks(clean_images);
  if (pool.size() < 2) {
    throw TrainingError(TrainingErrc::empty_dataset, "training set yields fewer than 2 blocks");
  }
  Rng split_rng(derive_seed(options.seed, 1));
  split_rng.shuffle(pool.begin(), pool.end());
  const auto n_hold = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(options.holdout_fraction * static_cast<double>(pool.size()))), 1,
      pool.size() - 1);
  const CorruptedSet holdout = corrupt_all(
      std::vector<Block>(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_hold)), specs,
      derive_seed(options.seed, 2));
  const std::vector<Block> train(pool.begin() + static_cast<std::ptrdiff_t>(n_hold), pool.end());

  ShrinkageModel model;
  model.gains.fill(1.0);
  model.mask.theta.fill(kInitialLogit);
  model.seed = options.seed;
  record_specs(model, specs);

  ShrinkageModel best = ShrinkageModel::identity();
  best.seed = options.seed;
  best.bands = model.bands;
  best.sigmas = model.sigmas;
  double best_loss = l1_loss(factors_of(best), holdout);
  int best_epoch = 0;

  Rng rng(derive_seed(options.seed, 3));
  const int steps = std::max(1, options.samples_per_epoch / options.batch_size);
  double lr = options.learn_rate;
  std::size_t spec_cursor = 0;
  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    for (int step = 0; step < steps; ++step) {
      std::array<double, kBlockArea> num{};
      std::array<double, kBlockArea> den{};
      std::array<double, kBlockArea> factor = factors_of(model);
      for (int j = 0; j < options.batch_size; ++j) {
        const Block &x = train[rng.below(train.size())];
        Block y = x;
        corrupt_block(y, specs[spec_cursor], rng);
        spec_cursor = (spec_cursor + 1) % specs.size();
        for (int i = 0; i < kBlockArea; ++i) {
          const double r = factor[i] * y[i] - x[i];
          const double sgn = r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
          num[i] += sgn * y[i];
          den[i] += std::abs(y[i]);
        }
      }
      // Subgradient per coefficient normalised by E|Y|, so every
      // coefficient moves on the same scale regardless of its energy.
      for (int i = 0; i < kBlockArea; ++i) {
        if (den[i] <= 0.0) {
          continue;
        }
        const double d = num[i] / den[i];
        const double m = model.mask.at(i);
        const double g = model.gains[i];
        model.gains[i] -= lr * m * d;
        model.mask.theta[i] -= lr * g * (1.0 - m) * d;
      }
    }
    lr *= options.decay;

    const double loss = l1_loss(factors_of(model), holdout);
    if (!std::isfinite(loss)) {
      throw TrainingError(TrainingErrc::diverged,
                          "training diverged at epoch " + std::to_string(epoch) +
                              "; last stable epoch " + std::to_string(best_epoch));
    }
    if (loss < best_loss) {
      best_loss = loss;
      best_epoch = epoch;
      best.gains = model.gains;
      best.mask = model.mask;
    }
  }
  best.epochs = options.epochs;
  best.final_loss = best_loss;
  return best;
}

double corrupted_l1_loss(const ShrinkageModel &model, const std::vector<ColorImage> &images,
                         const std::vector<BandNoiseSpec> &specs, std::uint64_t seed) {
  check_specs(specs);
  return l1_loss(factors_of(model), corrupt_all(collect_blocks(images), specs, seed));
}

nlohmann::json model_to_json(const ShrinkageModel &model) {
  nlohmann::json doc;
  doc["format_version"] = kModelFormatVersion;
  doc["gains"] = std::vector<double>(model.gains.begin(), model.gains.end());
  doc["theta"] = std::vector<double>(model.mask.theta.begin(), model.mask.theta.end());
  auto bands = nlohmann::json::array();
  for (auto [t1, t2] : model.bands) {
    bands.push_back({t1, t2});
  }
  doc["bands"] = bands;
  doc["sigmas"] = model.sigmas;
  doc["seed"] = model.seed;
  doc["epochs"] = model.epochs;
  doc["final_loss"] = model.final_loss;
  return doc;
}

ShrinkageModel model_from_json(const nlohmann::json &doc) {
  try {
    if (doc.at("format_version").get<int>() != kModelFormatVersion) {
      throw ConfigError("model: unsupported format_version");
    }
    ShrinkageModel m;
    const auto gains = doc.at("gains").get<std::vector<double>>();
    const auto theta = doc.at("theta").get<std::vector<double>>();
    if (gains.size() != kBlockArea || theta.size() != kBlockArea) {
      throw ConfigError("model: gains and theta need 64 entries each");
    }
    for (int i = 0; i < kBlockArea; ++i) {
      if (!std::isfinite(gains[i]) || !std::isfinite(theta[i])) {
        throw ConfigError("model: non-finite parameter");
      }
      m.gains[i] = gains[i];
      m.mask.theta[i] = theta[i];
    }
    for (const auto &b : doc.at("bands")) {
      m.bands.emplace_back(b.at(0).get<int>(), b.at(1).get<int>());
    }
    m.sigmas = doc.at("sigmas").get<std::vector<double>>();
    m.seed = doc.at("seed").get<std::uint64_t>();
    m.epochs = doc.at("epochs").get<int>();
    m.final_loss = doc.at("final_loss").get<double>();
    return m;
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError(std::string("malformed model document: ") + e.what());
  }
}

void save_model(const ShrinkageModel &model, const std::string &path) {
  std::ofstream out(path);
  if (!out) {
    throw ImageIoError(IoErrc::unwritable, "cannot write model file " + path);
  }
  out << model_to_json(model).dump(2) << '\n';
}

ShrinkageModel load_model(const std::string &path) {
  std::ifstream in(path);
  if (!in) {
    throw ImageIoError(IoErrc::missing_file, "cannot open model file " + path);
  }
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError("model file " + path + " is not valid JSON: " + e.what());
  }
  return model_from_json(doc);
}

ColorImage apply_freq_recon(const ColorImage &img, const ShrinkageModel &model) {
  ColorImage ycc = to_ycbcr(img);
  const auto factor = factors_of(model);
  for (RasterPlane &plane : ycc.planes) {
    DctGrid grid = dct8_forward(plane);
    for (std::size_t i = 0; i < grid.coeffs.size(); ++i) {
      grid.coeffs[i] *= factor[i % kBlockArea];
    }
    plane = dct8_inverse(grid);
  }
  return to_space(ycc, img.space);
}

ColorImage spectral_projection(const ColorImage &img, std::optional<double> alpha_override,
                               double tau) {
  if (!(tau > 1.0)) {
    throw PreconditionError("spectral_projection: tau must exceed 1");
  }
  ColorImage ycc = to_ycbcr(img);
  Spectrum spec = fft_centered(ycc.planes[0]);
  const RadialProfile profile = radial_profile(spec);
  if (std::all_of(profile.power.begin(), profile.power.end(), [](double p) { return p <= 0.0; })) {
    return img;
  }

  auto fit = [&](const std::vector<bool> &excluded) {
    RadialProfile masked = profile;
    for (std::size_t b = 0; b < masked.bins(); ++b) {
      if (excluded[b]) {
        masked.power[b] = 0.0;
      }
    }
    return alpha_override ? fit_prior_fixed_alpha(masked, *alpha_override) : fit_prior(masked);
  };
  auto flag = [&](const SpectralPrior &prior) {
    std::vector<bool> flagged(profile.bins(), false);
    for (std::size_t b = 0; b < profile.bins(); ++b) {
      flagged[b] = profile.counts[b] > 0 && profile.power[b] > tau * prior.predict(profile.centers[b]);
    }
    return flagged;
  };

  std::vector<bool> flagged(profile.bins(), false);
  SpectralPrior prior = fit(flagged);
  for (int iter = 0; iter < 10; ++iter) {
    const auto next = flag(prior);
    if (next == flagged) {
      break;
    }
    flagged = next;
    prior = fit(flagged);
  }
  if (std::none_of(flagged.begin(), flagged.end(), [](bool b) { return b; })) {
    return img;
  }

  std::vector<double> scale(profile.bins(), 1.0);
  for (std::size_t b = 0; b < profile.bins(); ++b) {
    if (flagged[b]) {
      scale[b] = std::sqrt(prior.predict(profile.centers[b]) / profile.power[b]);
    }
  }
  for (int row = 0; row < spec.height; ++row) {
    for (int col = 0; col < spec.width; ++col) {
      const double f = std::hypot(spec.freq_x(col), spec.freq_y(row));
      const int b = profile.bin_of(f);
      if (b >= 0 && flagged[static_cast<std::size_t>(b)]) {
        spec.at(col, row) *= scale[static_cast<std::size_t>(b)];
      }
    }
  }
  ycc.planes[0] = ifft_centered(spec);
  return to_space(ycc, img.space);
}

ColorImage color_correct(const ColorImage &reference, const ColorImage &candidate) {
  if (!reference.same_shape(candidate)) {
    throw DimensionError("color_correct: reference and candidate differ in size");
  }
  const ColorImage ref = to_rgb(reference);
  ColorImage out = to_rgb(candidate);
  const ColorStats rs = channel_stats(ref);
  const ColorStats cs = channel_stats(out);
  for (int c = 0; c < 3; ++c) {
    auto s = out.planes[c].samples();
    if (cs.stddev[c] < 1e-8) {
      std::fill(s.begin(), s.end(), rs.mean[c]);
      continue;
    }
    const double gain = rs.stddev[c] / cs.stddev[c];
    for (double &v : s) {
      v = gain * (v - cs.mean[c]) + rs.mean[c];
    }
  }
  return out;
}

void PipelineConfig::validate() const {
  if (!freq_recon && !sem_refine && !color_corr) {
    throw ConfigError("pipeline: at least one stage must be enabled");
  }
  if (freq_recon && !model && !projection) {
    throw ConfigError("pipeline: frequency reconstruction needs a model or the spectral projection");
  }
  if (sem_refine) {
    refiner.validate();
  }
}

AttackReport run_pipeline(const ColorImage &watermarked, const PipelineConfig &config,
                          const std::vector<SchemeKey> &keys) {
  config.validate();
  using clock = std::chrono::steady_clock;
  auto ms_since = [](clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(clock::now() - t0).count();
  };

  AttackReport report;
  ColorImage current = to_rgb(watermarked);
  if (config.freq_recon) {
    const auto t0 = clock::now();
    try {
      if (config.model) {
        current = apply_freq_recon(current, *config.model);
      }
      if (config.projection) {
        current = spectral_projection(current, config.alpha_override, config.tau);
      }
    } catch (const DegenerateSpectrumError &e) {
      throw DegenerateSpectrumError(std::string("freq_recon: ") + e.what());
    } catch (const PreconditionError &e) {
      throw PreconditionError(std::string("freq_recon: ") + e.what());
    }
    report.timings.freq_recon_ms = ms_since(t0);
    report.after_freq_recon = current;
  }
  if (config.sem_refine) {
    const auto t0 = clock::now();
    try {
      current = refine(current, config.refiner, &report.refiner_stderr);
    } catch (const RefinerError &e) {
      throw RefinerError(e.code(), std::string("sem_refine: ") + e.what(), e.captured_stderr());
    } catch (const ImageIoError &e) {
      throw ImageIoError(e.code(), std::string("sem_refine: ") + e.what());
    }
    report.timings.sem_refine_ms = ms_since(t0);
    report.after_sem_refine = current;
  }
  if (config.color_corr) {
    const auto t0 = clock::now();
    current = color_correct(watermarked, current);
    report.timings.color_corr_ms = ms_since(t0);
    report.after_color_corr = current;
  }
  report.output = current;
  report.fidelity = quality(report.output, watermarked);
  for (const SchemeKey &key : keys) {
    report.detections.push_back(detect(report.output, key));
  }
  return report;
}

nlohmann::json attack_report_to_json(const AttackReport &report) {
  nlohmann::json doc;
  doc["stages"] = {{"freq_recon", report.after_freq_recon.has_value()},
                   {"sem_refine", report.after_sem_refine.has_value()},
                   {"color_corr", report.after_color_corr.has_value()}};
  doc["timings_ms"] = {{"freq_recon", report.timings.freq_recon_ms},
                       {"sem_refine", report.timings.sem_refine_ms},
                       {"color_corr", report.timings.color_corr_ms}};
  doc["fidelity"] = {{"psnr", report.fidelity.psnr},
                     {"ssim", report.fidelity.ssim},
                     {"ssim_lum", report.fidelity.ssim_lum}};
  auto det = nlohmann::json::array();
  for (const auto &d : report.detections) {
    det.push_back(report_to_json(d));
  }
  doc["detections"] = det;
  doc["refiner_stderr"] = report.refiner_stderr;
  return doc;
}

} // namespace wmlab
