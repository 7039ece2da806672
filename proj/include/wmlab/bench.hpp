#pragma once

#include "wmlab/attack.hpp"
#include "wmlab/image.hpp"
#include "wmlab/metrics.hpp"
#include "wmlab/watermarks.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace wmlab {

std::string_view tool_version() noexcept;

struct NamedImage {
  std::string id;
  ColorImage image;
};

struct SkipRecord {
  std::string id;
  std::string reason;
};

struct Dataset {
  std::vector<NamedImage> images;
  std::vector<SkipRecord> skipped;
};

/// PNG files of `dir` sorted by name, shuffled with `seed`, truncated to
/// `limit`, then loaded. Unreadable files become skip records.
Dataset ingest_dataset(const std::filesystem::path &dir, int limit, std::uint64_t seed);

/// Synthetic scenes named synth_0000, synth_0001, ...
Dataset synthetic_dataset(std::uint64_t seed, int count);

struct Variant {
  std::string id;
  bool freq_recon = true;
  bool sem_refine = true;
  bool color_corr = true;

  void validate() const;
};

/// FreqRecon; SemRefine; FreqRecon+ColorCorr; FreqRecon+SemRefine; full.
std::vector<Variant> ablation_variants();
Variant full_variant();

enum class ReportFormat { csv, jsonl, markdown };

/// Where the images come from: a directory, or the synthetic generator.
struct DataSource {
  std::filesystem::path dir;
  std::uint64_t synthetic_seed = 0;
  int synthetic_count = 0;

  bool synthetic() const noexcept { return dir.empty(); }
};

struct BenchConfig {
  DataSource data;
  int limit = 100;
  std::vector<Scheme> schemes{Scheme::dwtdct, Scheme::dwtdctsvd, Scheme::ring};
  std::vector<Variant> variants{full_variant()};
  /// Either a model file, or training data (trained in-process).
  std::filesystem::path model_path;
  std::optional<DataSource> train_data;
  TrainingOptions training;
  bool projection = false;
  double tau = kDefaultProjectionTau;
  RefinerSpec refiner;
  std::uint64_t seed = 1;
  std::filesystem::path output_dir = "bench_out";
  std::vector<ReportFormat> formats{ReportFormat::csv, ReportFormat::jsonl, ReportFormat::markdown};
  int workers = 1;
  int null_samples = kDefaultNullSamples;
  /// Timings are wall-clock and therefore excluded from the outputs unless
  /// asked for; everything else is reproducible byte for byte.
  bool record_timings = false;
  /// In-memory images; when set, `data` is ignored.
  std::optional<Dataset> preloaded;
  /// In-memory model; when set, `model_path` and `train_data` are ignored.
  std::optional<ShrinkageModel> preloaded_model;

  void validate() const;
};

/// Reads a BenchConfig; relative paths resolve against the file's directory.
BenchConfig load_bench_config(const std::filesystem::path &path);
BenchConfig bench_config_from_json(const nlohmann::json &doc,
                                   const std::filesystem::path &base_dir = {});
nlohmann::json bench_config_to_json(const BenchConfig &config);

enum class RecordStatus { ok, embed_failed, error };

struct BenchRecord {
  std::string image_id;
  Scheme scheme = Scheme::dwtdct;
  std::string variant;
  int variant_index = 0;
  RecordStatus status = RecordStatus::ok;
  std::string error;
  DetectionReport pre;
  std::optional<DetectionReport> post;
  QualityReport quality;
  std::optional<StageTimings> timings;

  bool success() const { return status == RecordStatus::ok && post && attack_success(*post); }
};

struct CellSummary {
  Scheme scheme = Scheme::dwtdct;
  std::string variant;
  int valid = 0;
  int successes = 0;
  int embed_failed = 0;
  int errors = 0;
  double success_rate = 0.0;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  double mean_ssim_lum = 0.0;
};

struct BenchReport {
  std::string kind;
  std::vector<BenchRecord> records;
  std::vector<CellSummary> cells;
  std::vector<SkipRecord> skipped;
  std::vector<Variant> variants;
  nlohmann::json config_echo;
  std::uint64_t seed = 0;

  const CellSummary &cell(Scheme scheme, const std::string &variant) const;
};

/// Aggregates records into per-(scheme, variant) cells, in config order.
std::vector<CellSummary> summarize(const std::vector<BenchRecord> &records,
                                   const std::vector<Scheme> &schemes,
                                   const std::vector<Variant> &variants);

BenchReport run_matrix(const BenchConfig &config);
/// run_matrix over the five ablation variants and the ring scheme only.
BenchReport run_ablation(const BenchConfig &config);

struct MotivatingReport {
  int n = 0;
  std::vector<std::string> ids;
  std::vector<double> p_refine;
  std::vector<double> p_freq;
  double median_refine = 0.0;
  double median_freq = 0.0;
  double crossed_refine = 0.0;
  double crossed_freq = 0.0;
  /// One-sided, alternative: freq-arm p-values exceed refine-arm p-values.
  double wilcoxon_p = 1.0;
  std::string wilcoxon_note;
  std::uint64_t seed = 0;
  int null_samples = 0;
};

inline constexpr int kMotivatingNullSamples = 999;

/// Refine-only arm against FreqRecon-only arm on n ring-watermarked images.
MotivatingReport run_motivating(const BenchConfig &config, int n = 20);

/// CSV columns, in order.
const std::vector<std::string> &csv_columns();

std::string records_csv(const BenchReport &report);
std::string records_jsonl(const BenchReport &report);
std::string summary_markdown(const BenchReport &report);
nlohmann::json summary_json(const BenchReport &report);
/// One row per (image, variant): image_id,variant,p_value.
std::string pvalue_csv(const BenchReport &report);

/// Writes the requested formats plus summary.json (and pvalues.csv for an
/// ablation) into `dir`; returns the written paths.
std::vector<std::filesystem::path> emit_report(const BenchReport &report,
                                               const std::filesystem::path &dir,
                                               const std::vector<ReportFormat> &formats);

nlohmann::json motivating_json(const MotivatingReport &report);
std::vector<std::filesystem::path> emit_motivating(const MotivatingReport &report,
                                                   const std::filesystem::path &dir);

} // namespace wmlab
