#include "corpus.hpp"
#include "helpers.hpp"

#include "wmlab/attack.hpp"
#include "wmlab/errors.hpp"
#include "wmlab/metrics.hpp"
#include "wmlab/spectral.hpp"
#include "wmlab/watermarks.hpp"

#include <doctest.h>

#include <cmath>

using namespace wmlab;

namespace {

// Carrier values read straight off the transforms.
std::vector<std::array<double, kBlockArea>> chosen_blocks(const ColorImage &img, const BitKey &key) {
  const SubbandSet bands = haar_dwt(luminance(img));
  const DctGrid grid = dct8_forward(bands.ll);
  const int rows = bands.ll.height() / kBlock;
  const int cols = bands.ll.width() / kBlock;
  std::vector<std::array<double, kBlockArea>> out;
  for (int b : payload_blocks(key.seed, rows * cols)) {
    std::array<double, kBlockArea> blk{};
    const auto src = grid.block(b / cols, b % cols);
    std::copy(src.begin(), src.end(), blk.begin());
    out.push_back(blk);
  }
  return out;
}

double leading_singular_value(const std::array<double, kBlockArea> &m) {
  // power iteration on M^T M
  std::array<double, kBlock> v{};
  v.fill(1.0);
  double sigma = 0.0;
  for (int it = 0; it < 500; ++it) {
    std::array<double, kBlock> mv{};
    for (int r = 0; r < kBlock; ++r) {
      for (int c = 0; c < kBlock; ++c) {
        mv[r] += m[r * kBlock + c] * v[c];
      }
    }
    std::array<double, kBlock> w{};
    for (int c = 0; c < kBlock; ++c) {
      for (int r = 0; r < kBlock; ++r) {
        w[c] += m[r * kBlock + c] * mv[r];
      }
    }
    double norm = 0.0;
    for (double x : w) {
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (int c = 0; c < kBlock; ++c) {
      v[c] = w[c] / norm;
    }
    sigma = std::sqrt(norm);
  }
  return sigma;
}

double nearest_offset(double value, double step, long *index) {
  *index = std::lround(value / step);
  return value / step - static_cast<double>(*index);
}

} // namespace

TEST_CASE("scheme names") {
  CHECK(parse_scheme("DwtDct") == Scheme::dwtdct);
  CHECK(parse_scheme("dwtdctsvd") == Scheme::dwtdctsvd);
  CHECK(parse_scheme("RING") == Scheme::ring);
  CHECK(scheme_name(Scheme::dwtdctsvd) == "dwtdctsvd");
  CHECK_THROWS(parse_scheme("rivagan"));
}

TEST_CASE("key validation and json round trip") {
  BitKey bad = make_bit_key(1);
  bad.qim_step = 0.0;
  CHECK_THROWS_AS(validate(bad), PreconditionError);
  RingKey ring = make_ring_key(5);
  CHECK(ring.radii.size() == 3);
  CHECK(ring.radii[0] < ring.radii[1]);
  CHECK(ring.radii[2] < 128.0);
  RingKey unordered = ring;
  std::swap(unordered.radii[0], unordered.radii[1]);
  CHECK_THROWS_AS(validate(unordered), PreconditionError);
  RingKey weak = ring;
  weak.strength = 0.0;
  CHECK_THROWS_AS(validate(weak), PreconditionError);

  for (Scheme s : {Scheme::dwtdct, Scheme::dwtdctsvd, Scheme::ring}) {
    const SchemeKey k = make_key(s, 99);
    const SchemeKey back = key_from_json(nlohmann::json::parse(key_to_json(k).dump()));
    CHECK(back.scheme == s);
    if (s == Scheme::ring) {
      CHECK(back.ring().seed == 99);
      CHECK(back.ring().radii == k.ring().radii);
      CHECK(back.ring().pattern == k.ring().pattern);
      CHECK(back.ring().strength == k.ring().strength);
    } else {
      CHECK(back.bits().payload == k.bits().payload);
      CHECK(back.bits().qim_step == k.bits().qim_step);
    }
  }
  CHECK_THROWS(key_from_json(nlohmann::json{{"scheme", "ring"}}));
}

TEST_CASE("payload blocks are a seeded permutation prefix") {
  const auto a = payload_blocks(11, 256);
  CHECK(a.size() == kPayloadBits);
  CHECK(a == payload_blocks(11, 256));
  CHECK(a != payload_blocks(12, 256));
  std::vector<int> sorted = a;
  std::sort(sorted.begin(), sorted.end());
  CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
  CHECK(sorted.front() >= 0);
  CHECK(sorted.back() < 256);
}

TEST_CASE("dwtdct embeds on the lattice and round trips") {
  const auto &imgs = testing::scenes(8);
  for (int i = 0; i < 8; ++i) {
    const BitKey key = make_bit_key(1000 + i);
    const ColorImage marked = embed_dwtdct(imgs[i], key);
    CHECK(testing::max_abs_diff(quantize8(marked), marked) < 1e-12);
    const DetectionReport r = detect_dwtdct(marked, key);
    CHECK(r.bits_recovered == 32);
    CHECK(r.detected);
    CHECK(r.p_value == std::ldexp(1.0, -32));
    CHECK(psnr(marked, imgs[i]) >= 35.0);

    // chroma planes untouched by the equal-RGB steps
    const ColorImage a = rgb_to_ycbcr(quantize8(imgs[i]));
    const ColorImage b = rgb_to_ycbcr(marked);
    CHECK(testing::max_abs_diff(a.planes[1], b.planes[1]) < 1e-9);
    CHECK(testing::max_abs_diff(a.planes[2], b.planes[2]) < 1e-9);

    const auto blocks = chosen_blocks(marked, key);
    for (int bit = 0; bit < kPayloadBits; ++bit) {
      long m = 0;
      const double off = nearest_offset(blocks[bit][kQimU * kBlock + kQimV], key.qim_step, &m);
      CHECK(std::abs(off) <= 1.0 / 16.0 + 1e-9);
      CHECK(((m % 2) + 2) % 2 == key.bit(bit));
    }
  }
}

TEST_CASE("dwtdctsvd embeds on the lattice, round trips and tolerates noise") {
  const auto &imgs = testing::scenes(50);
  int robust = 0;
  for (int i = 0; i < 50; ++i) {
    const BitKey key = make_bit_key(2000 + i);
    const ColorImage marked = embed_dwtdctsvd(imgs[i], key);
    CHECK(detect_dwtdctsvd(marked, key).bits_recovered == 32);
    if (i < 5) {
      const double step = key.qim_step * kSvdStepFactor;
      const auto blocks = chosen_blocks(marked, key);
      for (int bit = 0; bit < kPayloadBits; ++bit) {
        long m = 0;
        const double off = nearest_offset(leading_singular_value(blocks[bit]), step, &m);
        CHECK(std::abs(off) <= 1.0 / 16.0 + 1e-6);
        CHECK(m % 2 == key.bit(bit));
      }
    }
    Rng rng(derive_seed(5, i));
    ColorImage noisy = marked;
    for (auto &p : noisy.planes) {
      for (double &v : p.samples()) {
        v += rng.gaussian() / 255.0;
      }
    }
    robust += detect_dwtdctsvd(noisy, key).bits_recovered >= 30;
  }
  CHECK(robust >= 45);
}

TEST_CASE("bit detector under a wrong key looks binomial") {
  const ColorImage marked = embed_dwtdct(testing::scenes(1)[0], make_bit_key(1));
  double total = 0.0;
  for (int i = 0; i < 200; ++i) {
    const DetectionReport r = detect_dwtdct(marked, make_bit_key(50000 + i));
    CHECK(r.p_value == binom_tail_p(r.bits_recovered, 32));
    CHECK(r.detected == (r.bits_recovered >= 23));
    total += r.bits_recovered;
  }
  const double mean = total / 200.0;
  CHECK(mean >= 14.0);
  CHECK(mean <= 18.0);
}

TEST_CASE("bit schemes reject images that are too small") {
  const ColorImage small = testing::random_image(100, 100, 1);
  CHECK_THROWS_AS(embed_dwtdct(small, make_bit_key(1)), DimensionError);
  CHECK_THROWS_AS(detect_dwtdctsvd(small, make_bit_key(1)), DimensionError);
}

TEST_CASE("ring embedding") {
  const ColorImage img = testing::scenes(1)[0];
  const RingKey key = make_ring_key(3);

  RingKey none = key;
  none.strength = 1e-300;
  CHECK(testing::max_abs_diff(embed_ring(img, none), img) < 1e-9);

  const ColorImage marked = embed_ring(img, key);
  CHECK(psnr(marked, img) >= 30.0);
  const ColorImage a = rgb_to_ycbcr(img);
  const ColorImage b = rgb_to_ycbcr(marked);
  CHECK(testing::max_abs_diff(a.planes[1], b.planes[1]) < 1e-9);
  CHECK(testing::max_abs_diff(a.planes[2], b.planes[2]) < 1e-9);

  RingKey full = key;
  full.strength = 1.0;
  const double before = ring_statistic(img, full);
  // renormalisation after embedding only rescales the written pattern slightly
  CHECK(ring_statistic(embed_ring(img, full), full) < 0.05 * before);

  const DetectionReport r = detect_ring(quantize8(marked), key);
  CHECK(r.p_value == 1.0 / 200.0);
  CHECK(r.detected);
  CHECK(r.bits_recovered == -1);
  CHECK_THROWS_AS(detect_ring(marked, key, {}, 50), PreconditionError);

  const RingKey wide = make_ring_key(3, 256, 0.15, {20.0, 40.0, 127.8});
  CHECK_THROWS_AS(embed_ring(img, wide), PreconditionError);
}

TEST_CASE("ring detector is calibrated on unmarked and foreign-key images") {
  const auto &imgs = testing::scenes(100);
  int false_hits = 0;
  int foreign_hits = 0;
  for (int i = 0; i < 100; ++i) {
    const RingKey key = make_ring_key(derive_seed(31, i));
    const DetectionReport r = detect_ring(imgs[i], key);
    CHECK(r.p_value > 0.0);
    CHECK(r.p_value <= 1.0);
    false_hits += r.detected;
    const ColorImage other = quantize8(embed_ring(imgs[i], make_ring_key(derive_seed(32, i))));
    foreign_hits += detect_ring(other, key).detected;
  }
  CHECK(false_hits <= 5);
  CHECK(foreign_hits <= 5);
}

TEST_CASE("detection survives color correction toward the clean image") {
  const auto &imgs = testing::scenes(6);
  for (Scheme s : {Scheme::dwtdct, Scheme::dwtdctsvd, Scheme::ring}) {
    for (int i = 0; i < 6; ++i) {
      const SchemeKey key = make_key(s, 40 + i);
      const ColorImage marked = quantize8(embed(imgs[i], key));
      CHECK(detect(color_correct(imgs[i], marked), key).detected);
    }
  }
  // a global affine change of luminance
  for (Scheme s : {Scheme::dwtdct, Scheme::ring}) {
    const SchemeKey key = make_key(s, 7);
    const ColorImage marked = quantize8(embed(imgs[0], key));
    ColorImage shifted = marked;
    for (auto &p : shifted.planes) {
      for (double &v : p.samples()) {
        v = v + 0.03;
      }
    }
    CHECK(detect(color_correct(shifted, marked), key).detected);
  }
}
