#include "wmlab/bench.hpp"

#include "wmlab/errors.hpp"
#include "wmlab/png_io.hpp"
#include "wmlab/rng.hpp"
#include "wmlab/synth.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace wmlab {

namespace {

constexpr std::uint64_t kShuffleStream = 0x1a6e;

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string_view status_name(RecordStatus s) {
  switch (s) {
  case RecordStatus::ok:
    return "ok";
  case RecordStatus::embed_failed:
    return "embed_failed";
  case RecordStatus::error:
    return "error";
  }
  return "unknown";
}

std::string_view format_name(ReportFormat f) {
  switch (f) {
  case ReportFormat::csv:
    return "csv";
  case ReportFormat::jsonl:
    return "jsonl";
  case ReportFormat::markdown:
    return "markdown";
  }
  return "unknown";
}

ReportFormat parse_format(const std::string &s) {
  const std::string l = lower(s);
  if (l == "csv") {
    return ReportFormat::csv;
  }
  if (l == "jsonl") {
    return ReportFormat::jsonl;
  }
  if (l == "markdown" || l == "md") {
    return ReportFormat::markdown;
  }
  throw ConfigError("unknown report format '" + s + "'");
}

ColorImage stored_rgb(const ColorImage &img) {
  return quantize8(img.space == ColorSpace::RGB ? img : ycbcr_to_rgb(img));
}

Dataset load_source(const DataSource &src, int limit, std::uint64_t seed) {
  if (src.synthetic()) {
    return synthetic_dataset(src.synthetic_seed, std::min(limit, src.synthetic_count));
  }
  return ingest_dataset(src.dir, limit, seed);
}

ShrinkageModel resolve_model(const BenchConfig &config) {
  if (config.preloaded_model) {
    return *config.preloaded_model;
  }
  if (!config.model_path.empty()) {
    return load_model(config.model_path.string());
  }
  if (config.train_data) {
    const Dataset train = load_source(*config.train_data, 1 << 30, config.training.seed);
    std::vector<ColorImage> images;
    for (const auto &ni : train.images) {
      images.push_back(ni.image);
    }
    return train_shrinkage(images, default_band_specs(), config.training);
  }
  throw ConfigError("frequency reconstruction needs \"model\" or \"train\" in the bench config");
}

bool needs_model(const BenchConfig &config) {
  return std::any_of(config.variants.begin(), config.variants.end(),
                     [](const Variant &v) { return v.freq_recon; });
}

double ms_between(std::chrono::steady_clock::time_point a, std::chrono::steady_clock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}

// Stage outputs shared across variants of one (image, scheme) task. Every
// variant sees exactly what run_pipeline would produce.
class StageCache {
public:
  StageCache(const ColorImage &watermarked, const std::optional<ShrinkageModel> &model,
             const BenchConfig &config)
      : w_(watermarked), model_(model), config_(config) {}

  const ColorImage &freq(double &ms) {
    if (!fr_) {
      const auto t0 = std::chrono::steady_clock::now();
      ColorImage x = w_;
      if (model_) {
        x = apply_freq_recon(x, *model_);
      }
      if (config_.projection) {
        x = spectral_projection(x, std::nullopt, config_.tau);
      }
      fr_ = std::move(x);
      fr_ms_ = ms_between(t0, std::chrono::steady_clock::now());
    }
    ms = fr_ms_;
    return *fr_;
  }

  const ColorImage &refined(bool after_freq, double &ms) {
    auto &slot = after_freq ? sr_fr_ : sr_w_;
    auto &slot_ms = after_freq ? sr_fr_ms_ : sr_w_ms_;
    if (!slot) {
      double ignored = 0.0;
      const ColorImage &input = after_freq ? freq(ignored) : w_;
      const auto t0 = std::chrono::steady_clock::now();
      slot = refine(input, config_.refiner);
      slot_ms = ms_between(t0, std::chrono::steady_clock::now());
    }
    ms = slot_ms;
    return *slot;
  }

private:
  const ColorImage &w_;
  const std::optional<ShrinkageModel> &model_;
  const BenchConfig &config_;
  std::optional<ColorImage> fr_, sr_w_, sr_fr_;
  double fr_ms_ = 0.0, sr_w_ms_ = 0.0, sr_fr_ms_ = 0.0;
};

std::vector<BenchRecord> run_image(const NamedImage &item, const BenchConfig &config,
                                   const std::optional<ShrinkageModel> &model) {
  std::vector<BenchRecord> out;
  const DetectionPolicy policy;
  const std::uint64_t image_seed = derive_seed(config.seed, fnv1a(item.id));
  for (Scheme scheme : config.schemes) {
    auto make_record = [&](std::size_t vi) {
      BenchRecord r;
      r.image_id = item.id;
      r.scheme = scheme;
      r.variant = config.variants[vi].id;
      r.variant_index = static_cast<int>(vi);
      r.pre.scheme = scheme;
      return r;
    };
    SchemeKey key;
    ColorImage watermarked;
    DetectionReport pre;
    try {
      const int side = std::min(item.image.width(), item.image.height());
      key = make_key(scheme, derive_seed(image_seed, static_cast<std::uint64_t>(scheme) + 1), side);
      watermarked = stored_rgb(embed(item.image, key));
      pre = detect(watermarked, key, policy, config.null_samples);
    } catch (const std::exception &e) {
      for (std::size_t vi = 0; vi < config.variants.size(); ++vi) {
        BenchRecord r = make_record(vi);
        r.status = RecordStatus::error;
        r.error = std::string("embed: ") + e.what();
        out.push_back(std::move(r));
      }
      continue;
    }
    if (!pre.detected) {
      for (std::size_t vi = 0; vi < config.variants.size(); ++vi) {
        BenchRecord r = make_record(vi);
        r.status = RecordStatus::embed_failed;
        r.pre = pre;
        out.push_back(std::move(r));
      }
      continue;
    }

    StageCache cache(watermarked, model, config);
    for (std::size_t vi = 0; vi < config.variants.size(); ++vi) {
      const Variant &v = config.variants[vi];
      BenchRecord r = make_record(vi);
      r.pre = pre;
      try {
        StageTimings t;
        ColorImage x = watermarked;
        if (v.freq_recon) {
          x = cache.freq(t.freq_recon_ms);
        }
        if (v.sem_refine) {
          x = cache.refined(v.freq_recon, t.sem_refine_ms);
        }
        if (v.color_corr) {
          const auto t0 = std::chrono::steady_clock::now();
          x = color_correct(watermarked, x);
          t.color_corr_ms = ms_between(t0, std::chrono::steady_clock::now());
        }
        const ColorImage attacked = stored_rgb(x);
        r.post = detect(attacked, key, policy, config.null_samples);
        r.quality = quality(attacked, watermarked);
        if (config.record_timings) {
          r.timings = t;
        }
      } catch (const std::exception &e) {
        r.status = RecordStatus::error;
        r.error = e.what();
      }
      out.push_back(std::move(r));
    }
  }
  return out;
}

template <typename Task>
void parallel_for(std::size_t n, int workers, Task task) {
  const int threads = std::max(1, std::min<int>(workers, static_cast<int>(n)));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) {
      task(i);
    }
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        task(i);
      }
    });
  }
  for (auto &th : pool) {
    th.join();
  }
}

void sort_canonical(std::vector<BenchRecord> &records) {
  std::sort(records.begin(), records.end(), [](const BenchRecord &a, const BenchRecord &b) {
    if (a.image_id != b.image_id) {
      return a.image_id < b.image_id;
    }
    if (a.scheme != b.scheme) {
      return a.scheme < b.scheme;
    }
    return a.variant_index < b.variant_index;
  });
}

std::string csv_escape(const std::string &s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) {
    return s;
  }
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') {
      out += '"';
    }
    out += c;
  }
  return out + '"';
}

ojson record_json(const BenchRecord &r) {
  const bool ring = r.scheme == Scheme::ring;
  const bool has_pre = r.status != RecordStatus::error;
  ojson j;
  j["image_id"] = r.image_id;
  j["scheme"] = scheme_name(r.scheme);
  j["variant"] = r.variant;
  j["pre_bits"] = has_pre && !ring ? ojson(r.pre.bits_recovered) : ojson();
  j["pre_p"] = has_pre ? ojson(r.pre.p_value) : ojson();
  j["post_bits"] = r.post && !ring ? ojson(r.post->bits_recovered) : ojson();
  j["post_p"] = r.post ? ojson(r.post->p_value) : ojson();
  j["success"] = r.status == RecordStatus::ok ? ojson(r.success()) : ojson();
  const bool ok = r.status == RecordStatus::ok;
  j["psnr"] = ok ? ojson(r.quality.psnr) : ojson();
  j["ssim"] = ok ? ojson(r.quality.ssim) : ojson();
  j["ssim_lum"] = ok ? ojson(r.quality.ssim_lum) : ojson();
  j["t_stage1_ms"] = r.timings ? ojson(r.timings->freq_recon_ms) : ojson();
  j["t_stage2_ms"] = r.timings ? ojson(r.timings->sem_refine_ms) : ojson();
  j["t_stage3_ms"] = r.timings ? ojson(r.timings->color_corr_ms) : ojson();
  j["status"] = status_name(r.status);
  return j;
}

std::string csv_field(const ojson &v) {
  if (v.is_null()) {
    return "";
  }
  if (v.is_string()) {
    return csv_escape(v.get<std::string>());
  }
  return v.dump();
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void write_text(const fs::path &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw ImageIoError(IoErrc::unwritable, "cannot write " + path.string());
  }
  out << text;
  if (!out) {
    throw ImageIoError(IoErrc::unwritable, "write failed for " + path.string());
  }
}

void ensure_dir(const fs::path &dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw ImageIoError(IoErrc::unwritable, "cannot create output directory " + dir.string());
  }
}

double median_of(std::vector<double> v) {
  if (v.empty()) {
    return 0.0;
  }
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

DataSource source_from_json(const nlohmann::json &j, const fs::path &base) {
  DataSource src;
  if (j.is_string()) {
    fs::path p = j.get<std::string>();
    src.dir = p.is_absolute() || base.empty() ? p : base / p;
    return src;
  }
  const auto &s = j.at("synthetic");
  src.synthetic_seed = s.at("seed").get<std::uint64_t>();
  src.synthetic_count = s.at("count").get<int>();
  if (src.synthetic_count < 1) {
    throw ConfigError("synthetic count must be at least 1");
  }
  return src;
}

nlohmann::json source_to_json(const DataSource &src) {
  if (!src.synthetic()) {
    return src.dir.string();
  }
  return {{"synthetic", {{"seed", src.synthetic_seed}, {"count", src.synthetic_count}}}};
}

void reject_unknown(const nlohmann::json &doc, const std::set<std::string> &known, const std::string &where) {
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (!known.count(it.key())) {
      throw ConfigError(where + ": unknown field \"" + it.key() + "\"");
    }
  }
}

} // namespace

std::string_view tool_version() noexcept { return WMLAB_VERSION; }

Dataset ingest_dataset(const fs::path &dir, int limit, std::uint64_t seed) {
  if (limit < 1) {
    throw PreconditionError("ingest_dataset: limit must be at least 1");
  }
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) {
    throw ConfigError("dataset directory not found: " + dir.string());
  }
  std::vector<fs::path> files;
  for (const auto &entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && lower(entry.path().extension().string()) == ".png") {
      files.push_back(entry.path());
    }
  }
  if (files.empty()) {
    throw ConfigError("dataset directory contains no PNG images: " + dir.string());
  }
  std::sort(files.begin(), files.end());
  Rng rng(derive_seed(seed, kShuffleStream));
  rng.shuffle(files.begin(), files.end());
  if (files.size() > static_cast<std::size_t>(limit)) {
    files.resize(static_cast<std::size_t>(limit));
  }
  Dataset data;
  for (const auto &f : files) {
    const std::string id = f.stem().string();
    try {
      data.images.push_back({id, load_image(f)});
    } catch (const ImageIoError &e) {
      std::cerr << "skipping " << f.string() << ": " << e.what() << '\n';
      data.skipped.push_back({id, e.what()});
    }
  }
  return data;
}

Dataset synthetic_dataset(std::uint64_t seed, int count) {
  Dataset data;
  const auto images = synthetic_corpus(seed, count);
  for (std::size_t i = 0; i < images.size(); ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "synth_%04zu", i);
    data.images.push_back({id, images[i]});
  }
  return data;
}

void Variant::validate() const {
  if (!freq_recon && !sem_refine && !color_corr) {
    throw ConfigError("variant '" + id + "' enables no stage");
  }
  if (id.empty()) {
    throw ConfigError("variant id must not be empty");
  }
}

std::vector<Variant> ablation_variants() {
  return {{"freq", true, false, false},
          {"refine", false, true, false},
          {"freq+color", true, false, true},
          {"freq+refine", true, true, false},
          {"full", true, true, true}};
}

Variant full_variant() { return {"full", true, true, true}; }

void BenchConfig::validate() const {
  if (limit < 1) {
    throw ConfigError("limit must be at least 1");
  }
  if (schemes.empty()) {
    throw ConfigError("no schemes selected");
  }
  if (variants.empty()) {
    throw ConfigError("no pipeline variants given");
  }
  std::set<std::string> ids;
  for (const auto &v : variants) {
    v.validate();
    if (!ids.insert(v.id).second) {
      throw ConfigError("duplicate variant id '" + v.id + "'");
    }
  }
  if (workers < 1) {
    throw ConfigError("workers must be at least 1");
  }
  if (null_samples < kDefaultNullSamples) {
    throw ConfigError("null_samples must be at least 199");
  }
  if (!preloaded && data.synthetic() && data.synthetic_count < 1) {
    throw ConfigError("no dataset given");
  }
  refiner.validate();
}

BenchConfig bench_config_from_json(const nlohmann::json &doc, const fs::path &base) {
  try {
    reject_unknown(doc,
                   {"dataset", "limit", "schemes", "variants", "model", "train", "projection", "tau",
                    "refiner", "seed", "output_dir", "formats", "workers", "null_samples",
                    "record_timings"},
                   "bench config");
    BenchConfig c;
    c.data = source_from_json(doc.at("dataset"), base);
    c.limit = doc.value("limit", c.limit);
    if (doc.contains("schemes")) {
      c.schemes.clear();
      for (const auto &s : doc.at("schemes")) {
        c.schemes.push_back(parse_scheme(s.get<std::string>()));
      }
    }
    if (doc.contains("variants")) {
      const auto &vs = doc.at("variants");
      if (vs.is_string()) {
        if (vs.get<std::string>() != "ablation") {
          throw ConfigError("variants: expected a list or \"ablation\"");
        }
        c.variants = ablation_variants();
      } else {
        c.variants.clear();
        for (const auto &v : vs) {
          reject_unknown(v, {"id", "freq_recon", "sem_refine", "color_corr"}, "variant");
          c.variants.push_back({v.at("id").get<std::string>(), v.value("freq_recon", true),
                                v.value("sem_refine", true), v.value("color_corr", true)});
        }
      }
    }
    if (doc.contains("model")) {
      fs::path p = doc.at("model").get<std::string>();
      c.model_path = p.is_absolute() || base.empty() ? p : base / p;
    }
    if (doc.contains("train")) {
      const auto &t = doc.at("train");
      reject_unknown(t, {"dataset", "epochs", "learn_rate", "decay", "samples_per_epoch", "seed"},
                     "train");
      c.train_data = source_from_json(t.at("dataset"), base);
      c.training.epochs = t.value("epochs", c.training.epochs);
      c.training.learn_rate = t.value("learn_rate", c.training.learn_rate);
      c.training.decay = t.value("decay", c.training.decay);
      c.training.samples_per_epoch = t.value("samples_per_epoch", c.training.samples_per_epoch);
      c.training.seed = t.value("seed", c.training.seed);
    }
    c.projection = doc.value("projection", c.projection);
    c.tau = doc.value("tau", c.tau);
    if (doc.contains("refiner")) {
      const auto &r = doc.at("refiner");
      reject_unknown(r, {"kind", "tv_weight", "iterations", "epsilon", "command", "strength", "timeout"},
                     "refiner");
      const std::string kind = r.value("kind", std::string("builtin"));
      if (kind == "builtin") {
        c.refiner.kind = RefinerKind::builtin;
      } else if (kind == "external") {
        c.refiner.kind = RefinerKind::external;
      } else {
        throw ConfigError("refiner kind must be builtin or external");
      }
      c.refiner.tv_weight = r.value("tv_weight", c.refiner.tv_weight);
      c.refiner.iterations = r.value("iterations", c.refiner.iterations);
      c.refiner.tv_epsilon = r.value("epsilon", c.refiner.tv_epsilon);
      c.refiner.command = r.value("command", c.refiner.command);
      c.refiner.strength = r.value("strength", c.refiner.strength);
      c.refiner.timeout_seconds = r.value("timeout", c.refiner.timeout_seconds);
    }
    c.seed = doc.value("seed", c.seed);
    if (doc.contains("output_dir")) {
      fs::path p = doc.at("output_dir").get<std::string>();
      c.output_dir = p.is_absolute() || base.empty() ? p : base / p;
    }
    if (doc.contains("formats")) {
      c.formats.clear();
      for (const auto &f : doc.at("formats")) {
        c.formats.push_back(parse_format(f.get<std::string>()));
      }
    }
    c.workers = doc.value("workers", c.workers);
    c.null_samples = doc.value("null_samples", c.null_samples);
    c.record_timings = doc.value("record_timings", c.record_timings);
    c.validate();
    return c;
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError(std::string("malformed bench config: ") + e.what());
  }
}

BenchConfig load_bench_config(const fs::path &path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open bench config " + path.string());
  }
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError("bench config " + path.string() + " is not valid JSON: " + e.what());
  }
  return bench_config_from_json(doc, path.parent_path());
}

nlohmann::json bench_config_to_json(const BenchConfig &c) {
  nlohmann::json doc;
  doc["dataset"] = c.preloaded ? nlohmann::json("<in-memory>") : source_to_json(c.data);
  doc["limit"] = c.limit;
  auto schemes = nlohmann::json::array();
  for (Scheme s : c.schemes) {
    schemes.push_back(scheme_name(s));
  }
  doc["schemes"] = schemes;
  auto variants = nlohmann::json::array();
  for (const auto &v : c.variants) {
    variants.push_back(
        {{"id", v.id}, {"freq_recon", v.freq_recon}, {"sem_refine", v.sem_refine}, {"color_corr", v.color_corr}});
  }
  doc["variants"] = variants;
  if (c.preloaded_model) {
    doc["model"] = "<in-memory>";
  } else if (!c.model_path.empty()) {
    doc["model"] = c.model_path.string();
  } else if (c.train_data) {
    doc["train"] = {{"dataset", source_to_json(*c.train_data)},
                    {"epochs", c.training.epochs},
                    {"learn_rate", c.training.learn_rate},
                    {"decay", c.training.decay},
                    {"samples_per_epoch", c.training.samples_per_epoch},
                    {"seed", c.training.seed}};
  }
  doc["projection"] = c.projection;
  doc["tau"] = c.tau;
  if (c.refiner.kind == RefinerKind::builtin) {
    doc["refiner"] = {{"kind", "builtin"},
                      {"tv_weight", c.refiner.tv_weight},
                      {"iterations", c.refiner.iterations},
                      {"epsilon", c.refiner.tv_epsilon}};
  } else {
    doc["refiner"] = {{"kind", "external"},
                      {"command", c.refiner.command},
                      {"strength", c.refiner.strength},
                      {"timeout", c.refiner.timeout_seconds}};
  }
  doc["seed"] = c.seed;
  doc["output_dir"] = c.output_dir.string();
  auto formats = nlohmann::json::array();
  for (auto f : c.formats) {
    formats.push_back(format_name(f));
  }
  doc["formats"] = formats;
  doc["null_samples"] = c.null_samples;
  doc["record_timings"] = c.record_timings;
  return doc;
}

const CellSummary &BenchReport::cell(Scheme scheme, const std::string &variant) const {
  for (const auto &c : cells) {
    if (c.scheme == scheme && c.variant == variant) {
      return c;
    }
  }
  throw PreconditionError("no cell for " + std::string(scheme_name(scheme)) + "/" + variant);
}

std::vector<CellSummary> summarize(const std::vector<BenchRecord> &records,
                                   const std::vector<Scheme> &schemes,
                                   const std::vector<Variant> &variants) {
  std::vector<CellSummary> cells;
  for (Scheme s : schemes) {
    for (const auto &v : variants) {
      CellSummary c;
      c.scheme = s;
      c.variant = v.id;
      for (const auto &r : records) {
        if (r.scheme != s || r.variant != v.id) {
          continue;
        }
        switch (r.status) {
        case RecordStatus::ok:
          ++c.valid;
          c.successes += r.success() ? 1 : 0;
          c.mean_psnr += r.quality.psnr;
          c.mean_ssim += r.quality.ssim;
          c.mean_ssim_lum += r.quality.ssim_lum;
          break;
        case RecordStatus::embed_failed:
          ++c.embed_failed;
          break;
        case RecordStatus::error:
          ++c.errors;
          break;
        }
      }
      if (c.valid > 0) {
        c.success_rate = 100.0 * c.successes / c.valid;
        c.mean_psnr /= c.valid;
        c.mean_ssim /= c.valid;
        c.mean_ssim_lum /= c.valid;
      }
      cells.push_back(c);
    }
  }
  return cells;
}

BenchReport run_matrix(const BenchConfig &config) {
  config.validate();
  std::optional<ShrinkageModel> model;
  const bool model_given = config.preloaded_model || !config.model_path.empty() || config.train_data;
  // the spectral projection can run Stage 1 on its own
  if (needs_model(config) && (model_given || !config.projection)) {
    model = resolve_model(config);
  }
  const Dataset data = config.preloaded ? *config.preloaded : load_source(config.data, config.limit, config.seed);
  if (data.images.empty()) {
    throw ConfigError("dataset yielded no loadable images");
  }
  const std::size_t n = std::min<std::size_t>(data.images.size(), static_cast<std::size_t>(config.limit));

  std::vector<std::vector<BenchRecord>> per_image(n);
  parallel_for(n, config.workers, [&](std::size_t i) {
    try {
      per_image[i] = run_image(data.images[i], config, model);
    } catch (const std::exception &e) {
      BenchRecord r;
      r.image_id = data.images[i].id;
      r.status = RecordStatus::error;
      r.error = e.what();
      per_image[i] = {r};
    }
  });

  BenchReport report;
  report.kind = "matrix";
  for (auto &recs : per_image) {
    for (auto &r : recs) {
      report.records.push_back(std::move(r));
    }
  }
  sort_canonical(report.records);
  report.cells = summarize(report.records, config.schemes, config.variants);
  report.skipped = data.skipped;
  report.variants = config.variants;
  report.config_echo = bench_config_to_json(config);
  report.seed = config.seed;
  return report;
}

BenchReport run_ablation(const BenchConfig &config) {
  BenchConfig c = config;
  c.schemes = {Scheme::ring};
  c.variants = ablation_variants();
  BenchReport report = run_matrix(c);
  report.kind = "ablation";
  return report;
}

MotivatingReport run_motivating(const BenchConfig &config, int n) {
  if (n < 10) {
    throw PreconditionError("motivating preset needs n >= 10");
  }
  BenchConfig c = config;
  c.limit = n;
  c.variants = {{"freq", true, false, false}};
  c.validate();
  const ShrinkageModel model = resolve_model(c);
  const Dataset data = c.preloaded ? *c.preloaded : load_source(c.data, n, c.seed);
  if (static_cast<int>(data.images.size()) < n) {
    throw PreconditionError("motivating preset: dataset has fewer than n images");
  }
  MotivatingReport rep;
  rep.seed = c.seed;
  rep.null_samples = std::max(c.null_samples, kMotivatingNullSamples);
  const DetectionPolicy policy;
  for (int i = 0; i < n; ++i) {
    const NamedImage &item = data.images[static_cast<std::size_t>(i)];
    const std::uint64_t image_seed = derive_seed(c.seed, fnv1a(item.id));
    const int side = std::min(item.image.width(), item.image.height());
    const SchemeKey key =
        make_key(Scheme::ring, derive_seed(image_seed, static_cast<std::uint64_t>(Scheme::ring) + 1), side);
    const ColorImage w = stored_rgb(embed(item.image, key));
    if (!detect(w, key, policy, rep.null_samples).detected) {
      std::cerr << "motiv: embedding not detected on " << item.id << ", skipped\n";
      continue;
    }
    const ColorImage arm_refine = stored_rgb(refine(w, c.refiner));
    const ColorImage arm_freq = stored_rgb(apply_freq_recon(w, model));
    rep.ids.push_back(item.id);
    rep.p_refine.push_back(detect(arm_refine, key, policy, rep.null_samples).p_value);
    rep.p_freq.push_back(detect(arm_freq, key, policy, rep.null_samples).p_value);
  }
  rep.n = static_cast<int>(rep.ids.size());
  rep.median_refine = median_of(rep.p_refine);
  rep.median_freq = median_of(rep.p_freq);
  auto crossed = [](const std::vector<double> &p) {
    if (p.empty()) {
      return 0.0;
    }
    return static_cast<double>(std::count_if(p.begin(), p.end(), [](double v) { return v > 0.01; })) /
           static_cast<double>(p.size());
  };
  rep.crossed_refine = crossed(rep.p_refine);
  rep.crossed_freq = crossed(rep.p_freq);
  try {
    rep.wilcoxon_p = wilcoxon_signed_rank(rep.p_freq, rep.p_refine, Alternative::greater);
  } catch (const PreconditionError &e) {
    rep.wilcoxon_p = 1.0;
    rep.wilcoxon_note = e.what();
  }
  return rep;
}

const std::vector<std::string> &csv_columns() {
  static const std::vector<std::string> cols{
      "image_id", "scheme", "variant", "pre_bits", "pre_p",       "post_bits",   "post_p", "success",
      "psnr",     "ssim",   "ssim_lum", "t_stage1_ms", "t_stage2_ms", "t_stage3_ms", "status"};
  return cols;
}

std::string records_csv(const BenchReport &report) {
  std::string out;
  const auto &cols = csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) {
    out += (i ? "," : "") + cols[i];
  }
  out += '\n';
  for (const auto &r : report.records) {
    const ojson j = record_json(r);
    for (std::size_t i = 0; i < cols.size(); ++i) {
      out += (i ? "," : "") + csv_field(j.at(cols[i]));
    }
    out += '\n';
  }
  return out;
}

std::string records_jsonl(const BenchReport &report) {
  std::string out;
  for (const auto &r : report.records) {
    ojson j = record_json(r);
    if (!r.error.empty()) {
      j["error"] = r.error;
    }
    out += j.dump() + '\n';
  }
  return out;
}

std::string summary_markdown(const BenchReport &report) {
  std::ostringstream md;
  md << "| Scheme | Variant | FreqRecon | SemRefine | ColorCorr | N | Attack Succ. (%) | PSNR | SSIM | "
        "SSIM_lum | Embed failed |\n";
  md << "|---|---|:-:|:-:|:-:|--:|--:|--:|--:|--:|--:|\n";
  for (const auto &c : report.cells) {
    const auto it = std::find_if(report.variants.begin(), report.variants.end(),
                                 [&](const Variant &v) { return v.id == c.variant; });
    const Variant v = it != report.variants.end() ? *it : Variant{c.variant};
    auto mark = [](bool b) { return b ? "x" : ""; };
    md << "| " << scheme_name(c.scheme) << " | " << c.variant << " | " << mark(v.freq_recon) << " | "
       << mark(v.sem_refine) << " | " << mark(v.color_corr) << " | " << c.valid << " | "
       << fixed(c.success_rate, 1) << " | " << fixed(c.mean_psnr, 2) << " | " << fixed(c.mean_ssim, 3)
       << " | " << fixed(c.mean_ssim_lum, 3) << " | " << c.embed_failed << " |\n";
  }
  return md.str();
}

nlohmann::json summary_json(const BenchReport &report) {
  ojson doc;
  doc["kind"] = report.kind;
  doc["tool_version"] = tool_version();
  doc["seed"] = report.seed;
  doc["psnr_reference"] = "watermarked input";
  auto cells = ojson::array();
  for (const auto &c : report.cells) {
    ojson j;
    j["scheme"] = scheme_name(c.scheme);
    j["variant"] = c.variant;
    j["valid"] = c.valid;
    j["successes"] = c.successes;
    j["success_rate"] = c.success_rate;
    j["embed_failed"] = c.embed_failed;
    j["errors"] = c.errors;
    j["mean_psnr"] = c.mean_psnr;
    j["mean_ssim"] = c.mean_ssim;
    j["mean_ssim_lum"] = c.mean_ssim_lum;
    cells.push_back(j);
  }
  doc["cells"] = cells;
  auto skipped = ojson::array();
  for (const auto &s : report.skipped) {
    skipped.push_back({{"id", s.id}, {"reason", s.reason}});
  }
  doc["skipped"] = skipped;
  doc["config"] = ojson::parse(report.config_echo.dump());
  return nlohmann::json::parse(doc.dump());
}

std::string pvalue_csv(const BenchReport &report) {
  std::string out = "image_id,variant,p_value\n";
  for (const auto &r : report.records) {
    if (r.scheme != Scheme::ring || !r.post) {
      continue;
    }
    out += csv_escape(r.image_id) + "," + csv_escape(r.variant) + "," + ojson(r.post->p_value).dump() + "\n";
  }
  return out;
}

std::vector<fs::path> emit_report(const BenchReport &report, const fs::path &dir,
                                  const std::vector<ReportFormat> &formats) {
  ensure_dir(dir);
  std::vector<fs::path> written;
  for (ReportFormat f : formats) {
    fs::path p;
    switch (f) {
    case ReportFormat::csv:
      p = dir / "records.csv";
      write_text(p, records_csv(report));
      break;
    case ReportFormat::jsonl:
      p = dir / "records.jsonl";
      write_text(p, records_jsonl(report));
      break;
    case ReportFormat::markdown:
      p = dir / "summary.md";
      write_text(p, summary_markdown(report));
      break;
    }
    written.push_back(p);
  }
  const fs::path summary = dir / "summary.json";
  write_text(summary, summary_json(report).dump(2) + "\n");
  written.push_back(summary);
  if (report.kind == "ablation") {
    const fs::path pv = dir / "pvalues.csv";
    write_text(pv, pvalue_csv(report));
    written.push_back(pv);
  }
  return written;
}

nlohmann::json motivating_json(const MotivatingReport &r) {
  ojson doc;
  doc["tool_version"] = tool_version();
  doc["seed"] = r.seed;
  doc["n"] = r.n;
  doc["null_samples"] = r.null_samples;
  doc["median_p_refine"] = r.median_refine;
  doc["median_p_freq"] = r.median_freq;
  doc["crossed_refine"] = r.crossed_refine;
  doc["crossed_freq"] = r.crossed_freq;
  doc["wilcoxon_p_greater"] = r.wilcoxon_p;
  if (!r.wilcoxon_note.empty()) {
    doc["wilcoxon_note"] = r.wilcoxon_note;
  }
  return nlohmann::json::parse(doc.dump());
}

std::vector<fs::path> emit_motivating(const MotivatingReport &r, const fs::path &dir) {
  ensure_dir(dir);
  std::string csv = "image_id,p_refine,p_freq\n";
  for (std::size_t i = 0; i < r.ids.size(); ++i) {
    csv += csv_escape(r.ids[i]) + "," + ojson(r.p_refine[i]).dump() + "," + ojson(r.p_freq[i]).dump() + "\n";
  }
  const fs::path a = dir / "motivating.csv";
  const fs::path b = dir / "motivating.json";
  write_text(a, csv);
  write_text(b, motivating_json(r).dump(2) + "\n");
  return {a, b};
}

} // namespace wmlab
