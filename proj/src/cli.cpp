#include "wmlab/cli.hpp"

#include "wmlab/attack.hpp"
#include "wmlab/bench.hpp"
#include "wmlab/errors.hpp"
#include "wmlab/png_io.hpp"
#include "wmlab/synth.hpp"
#include "wmlab/watermarks.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

namespace wmlab {

namespace {

class UsageError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

std::string short_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

void print_detection(std::ostream &out, const DetectionReport &r, bool json) {
  if (json) {
    out << report_to_json(r).dump() << '\n';
    return;
  }
  out << "detected=" << (r.detected ? "true" : "false");
  if (r.scheme == Scheme::ring) {
    out << " stat=" << short_num(r.ring_statistic);
  } else {
    out << " bits=" << r.bits_recovered;
  }
  out << " p=" << short_num(r.p_value) << '\n';
}

struct Options {
  bool json = false;
  int workers = 0;

  std::string scheme;
  std::string key_path;
  std::string in_path;
  std::string out_path;
  int null_samples = kDefaultNullSamples;

  std::string data_dir;
  int epochs = TrainingOptions{}.epochs;
  std::uint64_t seed = 1;
  int samples = TrainingOptions{}.samples_per_epoch;

  std::string model_path;
  std::string refiner_cmd;
  bool builtin_refiner = false;
  bool no_freq = false;
  bool no_refine = false;
  bool no_color = false;
  bool projection = false;
  double tau = kDefaultProjectionTau;
  double strength = RefinerSpec{}.strength;
  double timeout = RefinerSpec{}.timeout_seconds;
  std::string report_path;

  std::string config_path;
  int motiv_n = 20;

  int size = 256;
  int count = 100;
};

int cmd_keygen(const Options &o, std::ostream &out) {
  const Scheme scheme = parse_scheme(o.scheme);
  const SchemeKey key = make_key(scheme, o.seed, o.size);
  save_key(key, o.out_path);
  if (o.json) {
    out << nlohmann::json{{"scheme", scheme_name(scheme)}, {"seed", o.seed}, {"out", o.out_path}}.dump()
        << '\n';
  } else {
    out << "wrote " << scheme_name(scheme) << " key (seed " << o.seed << ") to " << o.out_path << '\n';
  }
  return kExitOk;
}

SchemeKey key_for(const Options &o) {
  SchemeKey key = load_key(o.key_path);
  if (!o.scheme.empty() && parse_scheme(o.scheme) != key.scheme) {
    throw UsageError("--scheme " + o.scheme + " does not match the key's scheme " +
                     std::string(scheme_name(key.scheme)));
  }
  return key;
}

int cmd_embed(const Options &o, std::ostream &out) {
  const SchemeKey key = key_for(o);
  const ColorImage img = load_image(o.in_path);
  const ColorImage marked = embed(img, key);
  save_image(marked, o.out_path);
  const double p = psnr(quantize8(marked), img);
  if (o.json) {
    out << nlohmann::json{{"scheme", scheme_name(key.scheme)}, {"out", o.out_path}, {"psnr", p}}.dump()
        << '\n';
  } else {
    out << "embedded " << scheme_name(key.scheme) << " into " << o.out_path << " (psnr " << short_num(p)
        << " dB)\n";
  }
  return kExitOk;
}

int cmd_detect(const Options &o, std::ostream &out) {
  const SchemeKey key = key_for(o);
  const ColorImage img = load_image(o.in_path);
  print_detection(out, detect(img, key, DetectionPolicy{}, o.null_samples), o.json);
  return kExitOk;
}

int cmd_train(const Options &o, std::ostream &out) {
  const Dataset data = ingest_dataset(o.data_dir, 1 << 30, o.seed);
  std::vector<ColorImage> images;
  for (const auto &ni : data.images) {
    images.push_back(ni.image);
  }
  TrainingOptions opts;
  opts.epochs = o.epochs;
  opts.seed = o.seed;
  opts.samples_per_epoch = o.samples;
  const ShrinkageModel model = train_shrinkage(images, default_band_specs(), opts);
  save_model(model, o.out_path);
  if (o.json) {
    out << nlohmann::json{{"out", o.out_path},
                          {"images", images.size()},
                          {"epochs", model.epochs},
                          {"seed", model.seed},
                          {"final_loss", model.final_loss}}
               .dump()
        << '\n';
  } else {
    out << "trained on " << images.size() << " images, held-out L1 " << short_num(model.final_loss)
        << ", wrote " << o.out_path << '\n';
  }
  return kExitOk;
}

int cmd_attack(const Options &o, std::ostream &out) {
  if (!o.refiner_cmd.empty() && o.builtin_refiner) {
    throw UsageError("--refiner-cmd and --builtin-refiner are mutually exclusive");
  }
  PipelineConfig cfg;
  cfg.freq_recon = !o.no_freq;
  cfg.sem_refine = !o.no_refine;
  cfg.color_corr = !o.no_color;
  if (!cfg.freq_recon && !cfg.sem_refine && !cfg.color_corr) {
    throw UsageError("no attack stage enabled");
  }
  if (cfg.freq_recon && o.model_path.empty() && !o.projection) {
    throw UsageError("frequency reconstruction needs --model (or --projection)");
  }
  if (!o.model_path.empty()) {
    cfg.model = load_model(o.model_path);
  }
  cfg.projection = o.projection;
  cfg.tau = o.tau;
  if (!o.refiner_cmd.empty()) {
    cfg.refiner.kind = RefinerKind::external;
    cfg.refiner.command = o.refiner_cmd;
    cfg.refiner.strength = o.strength;
    cfg.refiner.timeout_seconds = o.timeout;
  }
  try {
    cfg.validate();
  } catch (const ConfigError &e) {
    throw UsageError(e.what());
  }
  cfg.seed = o.seed;

  const ColorImage img = load_image(o.in_path);
  std::vector<SchemeKey> keys;
  if (!o.key_path.empty()) {
    keys.push_back(key_for(o));
  }
  const AttackReport report = run_pipeline(img, cfg, keys);
  save_image(report.output, o.out_path);
  nlohmann::json doc = attack_report_to_json(report);
  doc["out"] = o.out_path;
  if (!o.report_path.empty()) {
    std::ofstream f(o.report_path);
    if (!f) {
      throw ImageIoError(IoErrc::unwritable, "cannot write report " + o.report_path);
    }
    f << doc.dump(2) << '\n';
  }
  if (o.json) {
    out << doc.dump() << '\n';
  } else {
    out << "attacked image written to " << o.out_path << " (psnr " << short_num(report.fidelity.psnr)
        << " dB, ssim " << short_num(report.fidelity.ssim) << ")\n";
    for (const auto &d : report.detections) {
      print_detection(out, d, false);
    }
  }
  return kExitOk;
}

BenchConfig bench_config_for(const Options &o) {
  BenchConfig cfg = load_bench_config(o.config_path);
  if (o.workers > 0) {
    cfg.workers = o.workers;
  }
  return cfg;
}

void print_bench(std::ostream &out, const BenchReport &report, const std::vector<std::filesystem::path> &files,
                 bool json) {
  if (json) {
    nlohmann::json doc = summary_json(report);
    auto paths = nlohmann::json::array();
    for (const auto &f : files) {
      paths.push_back(f.string());
    }
    doc["files"] = paths;
    out << doc.dump() << '\n';
    return;
  }
  out << summary_markdown(report);
  for (const auto &f : files) {
    out << "wrote " << f.string() << '\n';
  }
}

int cmd_bench(const Options &o, std::ostream &out, bool ablation) {
  const BenchConfig cfg = bench_config_for(o);
  const BenchReport report = ablation ? run_ablation(cfg) : run_matrix(cfg);
  const auto files = emit_report(report, cfg.output_dir, cfg.formats);
  print_bench(out, report, files, o.json);
  return kExitOk;
}

int cmd_motiv(const Options &o, std::ostream &out) {
  const BenchConfig cfg = bench_config_for(o);
  const MotivatingReport report = run_motivating(cfg, o.motiv_n);
  const auto files = emit_motivating(report, cfg.output_dir);
  if (o.json) {
    out << motivating_json(report).dump() << '\n';
  } else {
    out << "n=" << report.n << " median p refine-only=" << short_num(report.median_refine)
        << " freq-only=" << short_num(report.median_freq) << " crossed 0.01: " << short_num(report.crossed_refine)
        << " vs " << short_num(report.crossed_freq) << " wilcoxon p=" << short_num(report.wilcoxon_p) << '\n';
    for (const auto &f : files) {
      out << "wrote " << f.string() << '\n';
    }
  }
  return kExitOk;
}

int cmd_synth(const Options &o, std::ostream &out) {
  if (o.count < 1) {
    throw UsageError("--count must be at least 1");
  }
  SceneParams params;
  params.size = o.size;
  const auto paths = write_corpus(o.out_path, o.seed, o.count, params);
  if (o.json) {
    out << nlohmann::json{{"out", o.out_path}, {"count", paths.size()}, {"seed", o.seed}}.dump() << '\n';
  } else {
    out << "wrote " << paths.size() << " images to " << o.out_path << '\n';
  }
  return kExitOk;
}

} // namespace

int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  CLI::App app{"Watermark robustness lab: embed, detect and attack frequency-domain watermarks.", "wmlab"};
  app.require_subcommand(1);
  app.set_version_flag("--version",
                       std::string("wmlab ") + std::string(tool_version()) + " (key format 1, model format " +
                           std::to_string(kModelFormatVersion) + ")");
  Options o;

  auto add_json = [&](CLI::App *sub) { sub->add_flag("--json", o.json, "Machine-readable output"); };

  auto *keygen = app.add_subcommand("keygen", "Generate a watermark key");
  keygen->add_option("--scheme", o.scheme, "dwtdct, dwtdctsvd or ring")->required();
  keygen->add_option("--seed", o.seed, "Key seed")->required();
  keygen->add_option("--out", o.out_path, "Key JSON path")->required();
  keygen->add_option("--size", o.size, "Image side for ring radii")->check(CLI::Range(128, 1 << 16));
  add_json(keygen);

  auto *embed_cmd = app.add_subcommand("embed", "Embed a watermark");
  embed_cmd->add_option("--scheme", o.scheme, "dwtdct, dwtdctsvd or ring");
  embed_cmd->add_option("--key", o.key_path, "Key JSON")->required();
  embed_cmd->add_option("--in", o.in_path, "Input PNG")->required();
  embed_cmd->add_option("--out", o.out_path, "Output PNG")->required();
  add_json(embed_cmd);

  auto *detect_cmd = app.add_subcommand("detect", "Detect a watermark");
  detect_cmd->add_option("--scheme", o.scheme, "dwtdct, dwtdctsvd or ring");
  detect_cmd->add_option("--key", o.key_path, "Key JSON")->required();
  detect_cmd->add_option("--in", o.in_path, "Input PNG")->required();
  detect_cmd->add_option("--nulls", o.null_samples, "Null keys for the ring p-value")
      ->check(CLI::Range(kDefaultNullSamples, 1 << 20));
  add_json(detect_cmd);

  auto *train = app.add_subcommand("train", "Train the frequency reconstruction model");
  train->add_option("--data", o.data_dir, "Directory of clean PNGs")->required();
  train->add_option("--out", o.out_path, "Model JSON path")->required();
  train->add_option("--epochs", o.epochs, "Epochs")->check(CLI::NonNegativeNumber);
  train->add_option("--seed", o.seed, "Training seed");
  train->add_option("--samples", o.samples, "Block samples per epoch")->check(CLI::PositiveNumber);
  add_json(train);

  auto *attack = app.add_subcommand("attack", "Run the regeneration attack on one image");
  attack->add_option("--in", o.in_path, "Watermarked PNG")->required();
  attack->add_option("--out", o.out_path, "Attacked PNG")->required();
  attack->add_option("--model", o.model_path, "Model JSON");
  attack->add_option("--refiner-cmd", o.refiner_cmd, "External refiner command template");
  attack->add_flag("--builtin-refiner", o.builtin_refiner, "Use the builtin TV refiner (default)");
  attack->add_flag("--no-freq", o.no_freq, "Skip frequency reconstruction");
  attack->add_flag("--no-refine", o.no_refine, "Skip refinement");
  attack->add_flag("--no-color", o.no_color, "Skip color correction");
  attack->add_flag("--projection", o.projection, "Add the analytic spectral projection to stage 1");
  attack->add_option("--tau", o.tau, "Projection threshold ratio");
  attack->add_option("--strength", o.strength, "Strength passed to the external refiner");
  attack->add_option("--timeout", o.timeout, "External refiner timeout (s)");
  attack->add_option("--key", o.key_path, "Optional key to detect after the attack");
  attack->add_option("--scheme", o.scheme, "Scheme of --key");
  attack->add_option("--report", o.report_path, "Write an attack report JSON");
  attack->add_option("--seed", o.seed, "Master seed");
  add_json(attack);

  auto *bench = app.add_subcommand("bench", "Run the scheme x variant matrix");
  auto *ablate = app.add_subcommand("ablate", "Run the five-variant ablation on the ring scheme");
  auto *motiv = app.add_subcommand("motiv", "Refine-only vs frequency-only on ring watermarks");
  for (auto *sub : {bench, ablate, motiv}) {
    sub->add_option("--config", o.config_path, "Bench config JSON")->required();
    sub->add_option("--workers", o.workers, "Worker threads")->check(CLI::PositiveNumber);
    add_json(sub);
  }
  motiv->add_option("--n", o.motiv_n, "Number of images")->check(CLI::Range(10, 100000));

  auto *synth = app.add_subcommand("synth", "Write a synthetic dead-leaves corpus");
  synth->add_option("--out", o.out_path, "Output directory")->required();
  synth->add_option("--count", o.count, "Number of images");
  synth->add_option("--seed", o.seed, "Corpus seed");
  synth->add_option("--size", o.size, "Image side")->check(CLI::Range(16, 8192));
  add_json(synth);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion &e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError &e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (keygen->parsed()) {
      return cmd_keygen(o, out);
    }
    if (embed_cmd->parsed()) {
      return cmd_embed(o, out);
    }
    if (detect_cmd->parsed()) {
      return cmd_detect(o, out);
    }
    if (train->parsed()) {
      return cmd_train(o, out);
    }
    if (attack->parsed()) {
      return cmd_attack(o, out);
    }
    if (bench->parsed()) {
      return cmd_bench(o, out, false);
    }
    if (ablate->parsed()) {
      return cmd_bench(o, out, true);
    }
    if (motiv->parsed()) {
      return cmd_motiv(o, out);
    }
    if (synth->parsed()) {
      return cmd_synth(o, out);
    }
  } catch (const UsageError &e) {
    err << "usage error: " << e.what() << "\n\n";
    for (auto *sub : app.get_subcommands()) {
      err << sub->help();
    }
    return kExitUsage;
  } catch (const Error &e) {
    err << "error: " << e.what() << '\n';
    if (const auto *re = dynamic_cast<const RefinerError *>(&e); re && !re->captured_stderr().empty()) {
      err << "refiner stderr:\n" << re->captured_stderr() << '\n';
    }
    return kExitDomainError;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << '\n';
    return kExitDomainError;
  }
  err << app.help();
  return kExitUsage;
}

} // namespace wmlab
