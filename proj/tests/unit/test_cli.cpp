#include "helpers.hpp"

#include "wmlab/cli.hpp"
#include "wmlab/png_io.hpp"
#include "wmlab/synth.hpp"

#include <json.hpp>

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace wmlab;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(const std::vector<std::string> &args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

} // namespace

TEST_CASE("cli usage errors exit 2") {
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"frobnicate"}).code == kExitUsage);
  CHECK(cli({"detect", "--bogus"}).code == kExitUsage);
  CHECK(cli({"keygen", "--scheme", "ring"}).code == kExitUsage);
  const Run v = cli({"--version"});
  CHECK(v.code == kExitOk);
  CHECK(v.out.find("wmlab ") == 0);
  CHECK(v.out.find("model format 1") != std::string::npos);
}

TEST_CASE("cli keygen, embed, detect, attack") {
  testing::ScratchDir dir("cli");
  const auto p = [&](const std::string &name) { return (dir / name).string(); };
  save_image(dead_leaves_scene(4), dir / "clean.png");

  CHECK(cli({"keygen", "--scheme", "dwtdct", "--seed", "12", "--out", p("k.json")}).code == kExitOk);
  CHECK(cli({"keygen", "--scheme", "nonsense", "--seed", "12", "--out", p("x.json")}).code != kExitOk);
  CHECK(cli({"embed", "--key", p("k.json"), "--in", p("clean.png"), "--out", p("w.png")}).code == kExitOk);
  const Run d = cli({"detect", "--scheme", "dwtdct", "--key", p("k.json"), "--in", p("w.png")});
  CHECK(d.code == kExitOk);
  CHECK(d.out == "detected=true bits=32 p=2.33e-10\n");

  const Run dj = cli({"detect", "--key", p("k.json"), "--in", p("w.png"), "--json"});
  const auto doc = nlohmann::json::parse(dj.out);
  CHECK(doc.at("detected") == true);
  CHECK(doc.at("bits_recovered") == 32);

  CHECK(cli({"detect", "--key", p("k.json"), "--in", p("absent.png")}).code == kExitDomainError);
  CHECK(cli({"detect", "--key", p("k.json"), "--in", p("w.png"), "--scheme", "ring"}).code != kExitOk);

  CHECK(cli({"attack", "--in", p("w.png"), "--out", p("a.png"), "--no-freq", "--no-refine", "--no-color"}).code ==
        kExitUsage);
  CHECK(cli({"attack", "--in", p("w.png"), "--out", p("a.png")}).code == kExitUsage);
  const Run a = cli({"attack", "--in", p("w.png"), "--out", p("a.png"), "--no-freq", "--key", p("k.json"),
                     "--report", p("r.json"), "--json"});
  CHECK(a.code == kExitOk);
  CHECK(nlohmann::json::parse(a.out).contains("fidelity"));
  CHECK(std::filesystem::exists(dir / "r.json"));
  CHECK(load_image(dir / "a.png").width() == 256);

  const Run f = cli({"attack", "--in", p("w.png"), "--out", p("b.png"), "--no-freq", "--refiner-cmd",
                     "false {input} {output}"});
  CHECK(f.code == kExitDomainError);
  CHECK_FALSE(std::filesystem::exists(dir / "b.png"));
}

TEST_CASE("cli bench twice gives identical files") {
  testing::ScratchDir dir("cli-bench");
  const nlohmann::json cfg = {
      {"dataset", {{"synthetic", {{"seed", 8}, {"count", 2}}}}},
      {"schemes", {"dwtdct", "ring"}},
      {"train", {{"dataset", {{"synthetic", {{"seed", 9}, {"count", 20}}}}}, {"epochs", 4}, {"samples_per_epoch", 2000}}},
      {"refiner", {{"iterations", 20}}},
      {"seed", 5},
      {"output_dir", "run"}};
  std::ofstream(dir / "cfg.json") << cfg.dump();
  const std::string config = (dir / "cfg.json").string();
  REQUIRE(cli({"bench", "--config", config}).code == kExitOk);
  const std::string csv1 = slurp(dir / "run" / "records.csv");
  const std::string jsonl1 = slurp(dir / "run" / "records.jsonl");
  REQUIRE(cli({"bench", "--config", config, "--workers", "2", "--json"}).code == kExitOk);
  CHECK(csv1 == slurp(dir / "run" / "records.csv"));
  CHECK(jsonl1 == slurp(dir / "run" / "records.jsonl"));
  CHECK(csv1.find("image_id,scheme,variant,pre_bits,pre_p,post_bits,post_p,success,psnr") == 0);

  std::ofstream(dir / "bad.json") << R"({"dataset": "x", "colour": true})";
  CHECK(cli({"bench", "--config", (dir / "bad.json").string()}).code == kExitDomainError);
}

TEST_CASE("cli synth and train") {
  testing::ScratchDir dir("cli-synth");
  const std::string corpus = (dir / "corpus").string();
  CHECK(cli({"synth", "--out", corpus, "--count", "20", "--seed", "3", "--size", "64"}).code == kExitOk);
  CHECK(std::filesystem::exists(dir / "corpus" / "img_0019.png"));
  const Run t = cli({"train", "--data", corpus, "--out", (dir / "m.json").string(), "--epochs", "3", "--samples",
                     "1000", "--json"});
  CHECK(t.code == kExitOk);
  CHECK(std::filesystem::exists(dir / "m.json"));
  CHECK(cli({"train", "--data", (dir / "none").string(), "--out", (dir / "m2.json").string()}).code ==
        kExitDomainError);
}
