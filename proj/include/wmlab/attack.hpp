#pragma once

#include "wmlab/image.hpp"
#include "wmlab/metrics.hpp"
#include "wmlab/spectral.hpp"
#include "wmlab/watermarks.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace wmlab {

// ---------------------------------------------------------------------------
// Corruption

/// Gaussian noise on DCT coefficients whose band u+v lies in [t1, t2).
struct BandNoiseSpec {
  int t1 = 0;
  int t2 = 5;
  double sigma = 0.1;

  void validate() const;
  bool covers(int u, int v) const noexcept {
    const int b = dct_band(u, v);
    return b >= t1 && b < t2;
  }
};

/// Bands [0,5), [5,10), [10,15) crossed with sigma in {0.1, ..., 0.6}.
std::vector<BandNoiseSpec> default_band_specs();

DctGrid corrupt_band_noise(const DctGrid &grid, const BandNoiseSpec &spec, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Frequency reconstruction model

struct FrequencyMask {
  std::array<double, kBlockArea> theta{};

  double at(int i) const;
  double mask(int u, int v) const { return at(u * kBlock + v); }
};

inline constexpr int kModelFormatVersion = 1;

/// Per-coefficient gains times a sigmoid mask, shared by the Y, Cb and Cr
/// planes.
struct ShrinkageModel {
  std::array<double, kBlockArea> gains{};
  FrequencyMask mask;

  std::vector<std::pair<int, int>> bands;
  std::vector<double> sigmas;
  std::uint64_t seed = 0;
  int epochs = 0;
  double final_loss = 0.0;

  /// gains=1 and a mask saturated at 1 - 1e-13.
  static ShrinkageModel identity();

  double factor(int i) const { return gains[i] * mask.at(i); }
};

struct TrainingOptions {
  int epochs = 200;
  double learn_rate = 0.05;
  double decay = 0.99;
  int samples_per_epoch = 20000;
  int batch_size = 500;
  /// Share of the block pool kept aside for the held-out loss.
  double holdout_fraction = 0.1;
  std::uint64_t seed = 1;
};

/// Normalised stochastic subgradient descent on the L1 reconstruction loss
/// |gains * mask * (X + noise) - X|. Specs are cycled across the samples of
/// every batch. The returned state is the one with the lowest held-out loss,
/// never worse than the identity model.
ShrinkageModel train_shrinkage(const std::vector<ColorImage> &clean_images,
                               const std::vector<BandNoiseSpec> &specs,
                               const TrainingOptions &options = {});

/// Mean held-out loss of `model` on blocks corrupted deterministically from
/// `seed`.
double corrupted_l1_loss(const ShrinkageModel &model, const std::vector<ColorImage> &images,
                         const std::vector<BandNoiseSpec> &specs, std::uint64_t seed);

nlohmann::json model_to_json(const ShrinkageModel &model);
ShrinkageModel model_from_json(const nlohmann::json &doc);
void save_model(const ShrinkageModel &model, const std::string &path);
ShrinkageModel load_model(const std::string &path);

ColorImage apply_freq_recon(const ColorImage &img, const ShrinkageModel &model);

inline constexpr double kDefaultProjectionTau = 2.0;

/// Pulls radial annuli of the luminance spectrum whose power exceeds
/// tau times the fitted 1/f^alpha prior back onto the prior. The prior is
/// refitted without the flagged annuli until the flagged set is stable.
ColorImage spectral_projection(const ColorImage &img, std::optional<double> alpha_override = {},
                               double tau = kDefaultProjectionTau);

// ---------------------------------------------------------------------------
// Refinement

enum class RefinerKind { builtin, external };

struct RefinerSpec {
  RefinerKind kind = RefinerKind::builtin;
  double tv_weight = 0.08;
  int iterations = 120;
  /// Smoothing of |grad u| in the TV term.
  double tv_epsilon = 0.05;
  /// Must contain {input} and {output}; {strength} is optional.
  std::string command;
  double strength = 0.5;
  double timeout_seconds = 300.0;
  /// Parent of the per-invocation temp directory; empty means the system
  /// default (or $WMLAB_TMPDIR).
  std::string temp_dir;

  void validate() const;
};

/// Gradient descent on 0.5|u-f|^2 + lambda * sum sqrt(|grad u|^2 + eps^2),
/// per RGB channel.
ColorImage tv_refine(const ColorImage &img, double lambda, int iterations, double epsilon);

/// Runs the builtin or external refiner. Stderr of an external process is
/// stored in `captured_stderr` when given.
ColorImage refine(const ColorImage &img, const RefinerSpec &spec,
                  std::string *captured_stderr = nullptr);

/// Per RGB channel: sigma_ref * (cand - mu_cand) / sigma_cand + mu_ref.
ColorImage color_correct(const ColorImage &reference, const ColorImage &candidate);

// ---------------------------------------------------------------------------
// Pipeline

struct PipelineConfig {
  bool freq_recon = true;
  bool sem_refine = true;
  bool color_corr = true;
  std::optional<ShrinkageModel> model;
  /// Run the analytic spectral projection in Stage 1 (after the model, if
  /// both are present).
  bool projection = false;
  std::optional<double> alpha_override;
  double tau = kDefaultProjectionTau;
  RefinerSpec refiner;
  std::uint64_t seed = 0;

  void validate() const;
};

struct StageTimings {
  double freq_recon_ms = 0.0;
  double sem_refine_ms = 0.0;
  double color_corr_ms = 0.0;
};

struct AttackReport {
  std::optional<ColorImage> after_freq_recon;
  std::optional<ColorImage> after_sem_refine;
  std::optional<ColorImage> after_color_corr;
  ColorImage output;
  StageTimings timings;
  QualityReport fidelity;
  std::vector<DetectionReport> detections;
  std::string refiner_stderr;
};

AttackReport run_pipeline(const ColorImage &watermarked, const PipelineConfig &config,
                          const std::vector<SchemeKey> &keys = {});

nlohmann::json attack_report_to_json(const AttackReport &report);

} // namespace wmlab
