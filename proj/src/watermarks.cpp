#include "wmlab/watermarks.hpp"

#include "wmlab/errors.hpp"
#include "wmlab/metrics.hpp"
#include "wmlab/rng.hpp"
#include "wmlab/spectral.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

namespace wmlab {

namespace {

constexpr int kMaxEmbedRounds = 10;
constexpr std::uint64_t kBlockStream = 0xb10c;
constexpr std::uint64_t kPayloadStream = 0x9a71;
constexpr std::uint64_t kPatternStream = 0x7269;
constexpr std::uint64_t kNullStream = 0x6e756c6c;

long parity(long q) { return ((q % 2) + 2) % 2; }

// Nearest lattice index to x/step whose parity equals bit.
long qim_index(double x, double step, int bit, bool non_negative) {
  const double t = x / step;
  long q = std::lround(t);
  if (parity(q) != bit) {
    q += (t >= static_cast<double>(q)) ? 1 : -1;
  }
  if (non_negative && q < 0) {
    q += 2;
  }
  return q;
}

struct Lattice {
  double offset = 0.0;
};

// Offset in (-step/2, step/2] minimising the total distance to the lattice.
// Scanning from zero means an unshifted lattice wins ties.
Lattice estimate_offset(std::span<const double> values, double step) {
  Lattice best;
  double best_residual = std::numeric_limits<double>::infinity();
  for (int j = 0; j < kOffsetSearchSteps; ++j) {
    double o = step * j / kOffsetSearchSteps;
    if (o > step / 2.0) {
      o -= step;
    }
    double residual = 0.0;
    for (double v : values) {
      const double t = (v - o) / step;
      residual += std::abs(t - std::round(t));
    }
    if (residual < best_residual - 1e-12) {
      best_residual = residual;
      best.offset = o;
    }
  }
  return best;
}

int count_bits(std::span<const double> values, double step, const BitKey &key) {
  const Lattice lattice = estimate_offset(values, step);
  int hits = 0;
  for (int i = 0; i < kPayloadBits; ++i) {
    const long q = std::lround((values[i] - lattice.offset) / step);
    if (parity(q) == key.bit(i)) {
      ++hits;
    }
  }
  return hits;
}

ColorImage to_ycbcr(const ColorImage &img) {
  return img.space == ColorSpace::YCbCr ? img : rgb_to_ycbcr(img);
}

ColorImage to_space(const ColorImage &ycc, ColorSpace space) {
  return space == ColorSpace::YCbCr ? ycc : ycbcr_to_rgb(ycc);
}

struct BlockLayout {
  int rows = 0;
  int cols = 0;
  std::vector<int> chosen;
};

BlockLayout layout_for(const SubbandSet &bands, const BitKey &key) {
  BlockLayout layout;
  layout.rows = bands.ll.height() / kBlock;
  layout.cols = bands.ll.width() / kBlock;
  const int count = layout.rows * layout.cols;
  if (bands.source_width < 128 || bands.source_height < 128 || count < kPayloadBits) {
    throw DimensionError("image too small to host 32 payload blocks (need at least 128x128)");
  }
  layout.chosen = payload_blocks(key.seed, count);
  return layout;
}

enum class BitCarrier { coefficient, singular_value };

double carrier_step(BitCarrier carrier, const BitKey &key) {
  return carrier == BitCarrier::coefficient ? key.qim_step : key.qim_step * kSvdStepFactor;
}

using Block8 = Eigen::Matrix<double, 8, 8, Eigen::RowMajor>;

// Carrier value of one LL block and its gradient with respect to the LL
// samples of that block. The DCT is orthonormal, so the gradient is the
// inverse transform of the gradient in the coefficient domain.
struct CarrierProbe {
  double value = 0.0;
  std::array<double, kBlockArea> grad_ll{};
};

CarrierProbe probe(std::span<const double, kBlockArea> coeffs, BitCarrier carrier) {
  CarrierProbe p;
  std::array<double, kBlockArea> g{};
  if (carrier == BitCarrier::coefficient) {
    p.value = coeffs[kQimU * kBlock + kQimV];
    g[kQimU * kBlock + kQimV] = 1.0;
  } else {
    const Eigen::Map<const Block8> m(coeffs.data());
    Eigen::JacobiSVD<Block8> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    p.value = svd.singularValues()(0);
    Eigen::Map<Block8> gm(g.data());
    gm = svd.matrixU().col(0) * svd.matrixV().col(0).transpose();
  }
  dct8_block_inverse(g, p.grad_ll);
  return p;
}

std::vector<double> read_carriers(const ColorImage &img, const BitKey &key, BitCarrier carrier) {
  validate(key);
  const SubbandSet bands = haar_dwt(luminance(img));
  const BlockLayout layout = layout_for(bands, key);
  const DctGrid grid = dct8_forward(bands.ll);
  std::vector<double> values;
  values.reserve(kPayloadBits);
  for (int b : layout.chosen) {
    values.push_back(probe(grid.block(b / layout.cols, b % layout.cols), carrier).value);
  }
  return values;
}

int to_level(double v) { return static_cast<int>(std::lround(v * 255.0)); }

// Moves the carrier of LL block (br, bc) by `need` using whole 8-bit steps
// applied equally to R, G and B, which shifts Y by one level and leaves
// Cb/Cr untouched. Pixels with the largest gradient go first.
void nudge_block(ColorImage &rgb, int br, int bc, const std::array<double, kBlockArea> &grad_ll,
                 double need, double tol) {
  struct Pixel {
    int x, y;
    double grad;
  };
  std::vector<Pixel> pixels;
  for (int dy = 0; dy < 2 * kBlock; ++dy) {
    for (int dx = 0; dx < 2 * kBlock; ++dx) {
      const int x = 2 * kBlock * bc + dx;
      const int y = 2 * kBlock * br + dy;
      if (x >= rgb.width() || y >= rgb.height()) {
        continue;
      }
      // ll = (a + b + c + d) / 2
      pixels.push_back({x, y, 0.5 * grad_ll[(dy / 2) * kBlock + dx / 2]});
    }
  }
  std::stable_sort(pixels.begin(), pixels.end(),
                   [](const Pixel &a, const Pixel &b) { return std::abs(a.grad) > std::abs(b.grad); });
  for (int sweep = 0; sweep < 8; ++sweep) {
    bool moved = false;
    for (const Pixel &p : pixels) {
      if (std::abs(need) <= tol) {
        return;
      }
      const double gain = std::abs(p.grad) / 255.0;
      if (gain <= 0.0 || gain >= 2.0 * std::abs(need)) {
        continue;
      }
      const int s = (need > 0.0) == (p.grad > 0.0) ? 1 : -1;
      bool fits = true;
      for (const RasterPlane &plane : rgb.planes) {
        const int level = to_level(plane.at(p.x, p.y)) + s;
        fits = fits && level >= 0 && level <= 255;
      }
      if (!fits) {
        continue;
      }
      for (RasterPlane &plane : rgb.planes) {
        plane.at(p.x, p.y) = (to_level(plane.at(p.x, p.y)) + s) / 255.0;
      }
      need -= s * p.grad / 255.0;
      moved = true;
    }
    if (!moved) {
      return;
    }
  }
}

// Embeds on the 8-bit grid directly: targets are QIM lattice points, reached
// by nudging pixels one level at a time and re-measuring (the singular value
// is only locally linear). A float embedding would be undone by rounding,
// since one coefficient step spreads over 256 pixels.
ColorImage embed_bits(const ColorImage &img, const BitKey &key, BitCarrier carrier) {
  validate(key);
  ColorImage rgb = quantize8(img.space == ColorSpace::RGB ? img : ycbcr_to_rgb(img));
  const double step = carrier_step(carrier, key);
  const double tol = step / 16.0;
  std::vector<double> targets(kPayloadBits, 0.0);
  for (int round = 0; round < kMaxEmbedRounds; ++round) {
    const SubbandSet bands = haar_dwt(luminance(rgb));
    const BlockLayout layout = layout_for(bands, key);
    const DctGrid grid = dct8_forward(bands.ll);
    bool settled = true;
    for (int i = 0; i < kPayloadBits; ++i) {
      const int b = layout.chosen[i];
      const int br = b / layout.cols;
      const int bc = b % layout.cols;
      const CarrierProbe pr = probe(grid.block(br, bc), carrier);
      if (round == 0) {
        const bool non_negative = carrier == BitCarrier::singular_value;
        targets[i] = static_cast<double>(qim_index(pr.value, step, key.bit(i), non_negative)) * step;
      }
      const double need = targets[i] - pr.value;
      if (std::abs(need) <= tol) {
        continue;
      }
      settled = false;
      nudge_block(rgb, br, bc, pr.grad_ll, need, tol);
    }
    if (settled) {
      break;
    }
  }
  return to_space(rgb_to_ycbcr(rgb), img.space);
}

DetectionReport detect_bits(const ColorImage &img, const BitKey &key,
                            const DetectionPolicy &policy, BitCarrier carrier, Scheme scheme) {
  policy.validate();
  const auto values = read_carriers(img, key, carrier);
  DetectionReport report;
  report.scheme = scheme;
  report.bits_recovered = count_bits(values, carrier_step(carrier, key), key);
  report.p_value = binom_tail_p(report.bits_recovered, kPayloadBits);
  report.detected = report.bits_recovered >= policy.bit_threshold;
  report.threshold_used = "bits >= " + std::to_string(policy.bit_threshold) + " of 32";
  return report;
}

// ---------------------------------------------------------------------------
// Ring geometry

struct RingCell {
  std::size_t index = 0;
  int radius = 0;
  int sector = 0;
  bool canonical = false;
};

std::vector<RingCell> ring_cells(int width, int height, const std::vector<double> &radii) {
  const double side = std::min(width, height);
  std::vector<RingCell> cells;
  for (int row = 0; row < height; ++row) {
    const int ky = row - height / 2;
    for (int col = 0; col < width; ++col) {
      const int kx = col - width / 2;
      const double fx = kx * side / width;
      const double fy = ky * side / height;
      const double f = std::hypot(fx, fy);
      for (std::size_t j = 0; j < radii.size(); ++j) {
        if (std::abs(f - radii[j]) > 0.5) {
          continue;
        }
        RingCell cell;
        cell.index = static_cast<std::size_t>(row) * width + col;
        cell.radius = static_cast<int>(j);
        cell.canonical = ky > 0 || (ky == 0 && kx > 0);
        const double angle = cell.canonical ? std::atan2(fy, fx) : std::atan2(-fy, -fx);
        cell.sector = std::clamp(static_cast<int>(angle / std::numbers::pi * kRingSectors), 0,
                                 kRingSectors - 1);
        cells.push_back(cell);
        break;
      }
    }
  }
  return cells;
}

std::complex<double> target_of(const RingKey &key, const RingCell &cell) {
  const auto v = key.pattern[cell.radius][cell.sector];
  return cell.canonical ? v : std::conj(v);
}

struct Normalisation {
  double mean = 0.0;
  double scale = 1.0;
};

Normalisation normalisation_of(const RasterPlane &y) {
  Normalisation n;
  n.mean = plane_mean(y);
  const double sd = plane_stddev(y);
  n.scale = sd > 1e-8 ? kRingReferenceStd / sd : 1.0;
  return n;
}

Spectrum normalised_spectrum(const RasterPlane &y, const Normalisation &n) {
  RasterPlane z(y.width(), y.height());
  const auto src = y.samples();
  auto dst = z.samples();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i] = (src[i] - n.mean) * n.scale;
  }
  return fft_centered(z);
}

double distance(const Spectrum &spec, const std::vector<RingCell> &cells, const RingKey &key) {
  double sum = 0.0;
  for (const RingCell &cell : cells) {
    sum += std::norm(spec.coeffs[cell.index] - target_of(key, cell));
  }
  return sum / static_cast<double>(cells.size());
}

void check_ring_geometry(const ColorImage &img, const RingKey &key) {
  validate(key);
  if (img.width() < 128 || img.height() < 128) {
    throw DimensionError("ring scheme needs an image of at least 128x128");
  }
  const double nyquist = std::min(img.width(), img.height()) / 2.0;
  if (key.radii.back() + 0.5 >= nyquist) {
    throw PreconditionError("ring radius reaches the Nyquist frequency of this image");
  }
}

std::string hex_u64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t parse_hex_u64(std::string_view s) {
  std::uint64_t v = 0;
  for (char ch : s) {
    v <<= 4;
    if (ch >= '0' && ch <= '9') {
      v |= static_cast<std::uint64_t>(ch - '0');
    } else if (ch >= 'a' && ch <= 'f') {
      v |= static_cast<std::uint64_t>(ch - 'a' + 10);
    } else if (ch >= 'A' && ch <= 'F') {
      v |= static_cast<std::uint64_t>(ch - 'A' + 10);
    } else {
      throw ConfigError("key: invalid hex digit in '" + std::string(s) + "'");
    }
  }
  return v;
}

} // namespace

std::string_view scheme_name(Scheme s) noexcept {
  switch (s) {
  case Scheme::dwtdct:
    return "dwtdct";
  case Scheme::dwtdctsvd:
    return "dwtdctsvd";
  case Scheme::ring:
    return "ring";
  }
  return "unknown";
}

Scheme parse_scheme(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "dwtdct") {
    return Scheme::dwtdct;
  }
  if (lower == "dwtdctsvd") {
    return Scheme::dwtdctsvd;
  }
  if (lower == "ring" || lower == "fourierring") {
    return Scheme::ring;
  }
  throw ConfigError("unknown scheme '" + std::string(name) + "'");
}

std::vector<double> default_ring_radii(int size) {
  const double nyquist = size / 2.0;
  return {nyquist / 6.0, nyquist / 4.0, nyquist / 3.0};
}

BitKey make_bit_key(std::uint64_t seed, double qim_step) {
  Rng rng(derive_seed(seed, kPayloadStream));
  BitKey key;
  key.seed = seed;
  key.payload = static_cast<std::uint32_t>(rng.next_u64() >> 32);
  key.qim_step = qim_step;
  validate(key);
  return key;
}

RingKey make_ring_key(std::uint64_t seed, int size, double strength, std::vector<double> radii) {
  RingKey key;
  key.seed = seed;
  key.size = size;
  key.strength = strength;
  key.radii = radii.empty() ? default_ring_radii(size) : std::move(radii);
  Rng rng(derive_seed(seed, kPatternStream));
  key.pattern.resize(key.radii.size());
  for (std::size_t j = 0; j < key.radii.size(); ++j) {
    const double base = kRingAmplitude * size / key.radii[j];
    key.pattern[j].resize(kRingSectors);
    for (auto &v : key.pattern[j]) {
      const double magnitude = base * rng.uniform(kRingMagnitudeLo, kRingMagnitudeHi);
      const double phase = 2.0 * std::numbers::pi * rng.uniform();
      v = std::polar(magnitude, phase);
    }
  }
  validate(key);
  return key;
}

RingKey make_null_key(const RingKey &key, int index) {
  const std::uint64_t seed = derive_seed(key.seed ^ kNullStream, static_cast<std::uint64_t>(index));
  return make_ring_key(seed, key.size, key.strength, key.radii);
}

void validate(const BitKey &key) {
  if (!(key.qim_step > 0.0) || !std::isfinite(key.qim_step)) {
    throw PreconditionError("bit key: QIM step must be positive");
  }
}

void validate(const RingKey &key) {
  if (key.radii.empty()) {
    throw PreconditionError("ring key: no radii");
  }
  if (key.size < 16) {
    throw PreconditionError("ring key: size must be at least 16");
  }
  for (std::size_t j = 0; j < key.radii.size(); ++j) {
    if (!(key.radii[j] > 0.5) || (j > 0 && !(key.radii[j] > key.radii[j - 1]))) {
      throw PreconditionError("ring key: radii must be positive and strictly increasing");
    }
  }
  if (!(key.strength > 0.0) || key.strength > 1.0) {
    throw PreconditionError("ring key: strength must lie in (0, 1]");
  }
  if (key.pattern.size() != key.radii.size()) {
    throw PreconditionError("ring key: pattern/radii count mismatch");
  }
  for (const auto &row : key.pattern) {
    if (row.size() != static_cast<std::size_t>(kRingSectors)) {
      throw PreconditionError("ring key: pattern needs 128 sectors per radius");
    }
  }
}

const BitKey &SchemeKey::bits() const {
  if (const auto *k = std::get_if<BitKey>(&key)) {
    return *k;
  }
  throw ConfigError("key is not a bit-payload key");
}

const RingKey &SchemeKey::ring() const {
  if (const auto *k = std::get_if<RingKey>(&key)) {
    return *k;
  }
  throw ConfigError("key is not a ring key");
}

SchemeKey make_key(Scheme scheme, std::uint64_t seed, int image_size) {
  SchemeKey k;
  k.scheme = scheme;
  if (scheme == Scheme::ring) {
    k.key = make_ring_key(seed, image_size);
  } else {
    k.key = make_bit_key(seed);
  }
  return k;
}

nlohmann::json key_to_json(const SchemeKey &key) {
  nlohmann::json doc;
  doc["scheme"] = scheme_name(key.scheme);
  if (key.scheme == Scheme::ring) {
    const RingKey &k = key.ring();
    doc["seed"] = k.seed;
    doc["size"] = k.size;
    doc["radii"] = k.radii;
    doc["strength"] = k.strength;
    doc["sectors"] = kRingSectors;
    auto rows = nlohmann::json::array();
    for (const auto &row : k.pattern) {
      std::string hex;
      hex.reserve(row.size() * 32);
      for (const auto &v : row) {
        hex += hex_u64(std::bit_cast<std::uint64_t>(v.real()));
        hex += hex_u64(std::bit_cast<std::uint64_t>(v.imag()));
      }
      rows.push_back(hex);
    }
    doc["pattern"] = rows;
  } else {
    const BitKey &k = key.bits();
    char buf[9];
    std::snprintf(buf, sizeof buf, "%08x", k.payload);
    doc["seed"] = k.seed;
    doc["payload"] = buf;
    doc["delta"] = k.qim_step;
  }
  return doc;
}

SchemeKey key_from_json(const nlohmann::json &doc) {
  try {
    SchemeKey key;
    key.scheme = parse_scheme(doc.at("scheme").get<std::string>());
    if (key.scheme == Scheme::ring) {
      RingKey k;
      k.seed = doc.at("seed").get<std::uint64_t>();
      k.size = doc.at("size").get<int>();
      k.radii = doc.at("radii").get<std::vector<double>>();
      k.strength = doc.at("strength").get<double>();
      if (doc.value("sectors", kRingSectors) != kRingSectors) {
        throw ConfigError("key: unsupported sector count");
      }
      for (const auto &row : doc.at("pattern")) {
        const auto hex = row.get<std::string>();
        if (hex.size() != static_cast<std::size_t>(kRingSectors) * 32) {
          throw ConfigError("key: pattern row has wrong length");
        }
        std::vector<std::complex<double>> values;
        for (std::size_t i = 0; i < hex.size(); i += 32) {
          const double re = std::bit_cast<double>(parse_hex_u64(std::string_view(hex).substr(i, 16)));
          const double im =
              std::bit_cast<double>(parse_hex_u64(std::string_view(hex).substr(i + 16, 16)));
          values.emplace_back(re, im);
        }
        k.pattern.push_back(std::move(values));
      }
      validate(k);
      key.key = std::move(k);
    } else {
      BitKey k;
      k.seed = doc.at("seed").get<std::uint64_t>();
      const auto payload = doc.at("payload").get<std::string>();
      if (payload.empty() || payload.size() > 8) {
        throw ConfigError("key: payload must be at most 8 hex digits");
      }
      k.payload = static_cast<std::uint32_t>(parse_hex_u64(payload));
      k.qim_step = doc.at("delta").get<double>();
      validate(k);
      key.key = k;
    }
    return key;
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError(std::string("malformed key document: ") + e.what());
  } catch (const PreconditionError &e) {
    throw ConfigError(std::string("invalid key: ") + e.what());
  }
}

void save_key(const SchemeKey &key, const std::string &path) {
  std::ofstream out(path);
  if (!out) {
    throw ImageIoError(IoErrc::unwritable, "cannot write key file " + path);
  }
  out << key_to_json(key).dump(2) << '\n';
}

SchemeKey load_key(const std::string &path) {
  std::ifstream in(path);
  if (!in) {
    throw ImageIoError(IoErrc::missing_file, "cannot open key file " + path);
  }
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError("key file " + path + " is not valid JSON: " + e.what());
  }
  return key_from_json(doc);
}

void DetectionPolicy::validate() const {
  if (bit_threshold <= 0 || bit_threshold > kPayloadBits) {
    throw PreconditionError("policy: bit threshold must lie in (0, 32]");
  }
  if (!(p_threshold > 0.0 && p_threshold < 1.0)) {
    throw PreconditionError("policy: p threshold must lie in (0, 1)");
  }
}

nlohmann::json report_to_json(const DetectionReport &report) {
  nlohmann::json doc;
  doc["scheme"] = scheme_name(report.scheme);
  if (report.scheme == Scheme::ring) {
    doc["ring_statistic"] = report.ring_statistic;
  } else {
    doc["bits_recovered"] = report.bits_recovered;
  }
  doc["p_value"] = report.p_value;
  doc["detected"] = report.detected;
  doc["threshold_used"] = report.threshold_used;
  return doc;
}

std::vector<int> payload_blocks(std::uint64_t seed, int block_count) {
  if (block_count < kPayloadBits) {
    throw DimensionError("fewer than 32 blocks available");
  }
  std::vector<int> order(static_cast<std::size_t>(block_count));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, kBlockStream));
  rng.shuffle(order.begin(), order.end());
  order.resize(kPayloadBits);
  return order;
}

ColorImage embed_dwtdct(const ColorImage &img, const BitKey &key) {
  return embed_bits(img, key, BitCarrier::coefficient);
}

DetectionReport detect_dwtdct(const ColorImage &img, const BitKey &key,
                              const DetectionPolicy &policy) {
  return detect_bits(img, key, policy, BitCarrier::coefficient, Scheme::dwtdct);
}

ColorImage embed_dwtdctsvd(const ColorImage &img, const BitKey &key) {
  return embed_bits(img, key, BitCarrier::singular_value);
}

DetectionReport detect_dwtdctsvd(const ColorImage &img, const BitKey &key,
                                 const DetectionPolicy &policy) {
  return detect_bits(img, key, policy, BitCarrier::singular_value, Scheme::dwtdctsvd);
}

ColorImage embed_ring(const ColorImage &img, const RingKey &key) {
  check_ring_geometry(img, key);
  ColorImage ycc = to_ycbcr(img);
  RasterPlane &y = ycc.planes[0];
  const Normalisation n = normalisation_of(y);
  Spectrum spec = normalised_spectrum(y, n);
  const auto cells = ring_cells(spec.width, spec.height, key.radii);
  for (const RingCell &cell : cells) {
    auto &c = spec.coeffs[cell.index];
    c = (1.0 - key.strength) * c + key.strength * target_of(key, cell);
  }
  const RasterPlane z = ifft_centered(spec);
  const auto src = z.samples();
  auto dst = y.samples();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i] = src[i] / n.scale + n.mean;
  }
  return to_space(ycc, img.space);
}

double ring_statistic(const ColorImage &img, const RingKey &key) {
  check_ring_geometry(img, key);
  const RasterPlane y = luminance(img);
  const Spectrum spec = normalised_spectrum(y, normalisation_of(y));
  return distance(spec, ring_cells(spec.width, spec.height, key.radii), key);
}

DetectionReport detect_ring(const ColorImage &img, const RingKey &key,
                            const DetectionPolicy &policy, int null_samples) {
  policy.validate();
  if (null_samples < kDefaultNullSamples) {
    throw PreconditionError("detect_ring: at least 199 null samples required");
  }
  check_ring_geometry(img, key);
  const RasterPlane y = luminance(img);
  const Spectrum spec = normalised_spectrum(y, normalisation_of(y));
  const auto cells = ring_cells(spec.width, spec.height, key.radii);
  const double s = distance(spec, cells, key);
  int at_or_below = 0;
  for (int i = 0; i < null_samples; ++i) {
    if (distance(spec, cells, make_null_key(key, i)) <= s) {
      ++at_or_below;
    }
  }
  DetectionReport report;
  report.scheme = Scheme::ring;
  report.ring_statistic = s;
  report.p_value = static_cast<double>(1 + at_or_below) / static_cast<double>(1 + null_samples);
  report.detected = report.p_value < policy.p_threshold;
  std::ostringstream t;
  t << "p < " << policy.p_threshold << " (" << null_samples << " null keys)";
  report.threshold_used = t.str();
  return report;
}

ColorImage embed(const ColorImage &img, const SchemeKey &key) {
  switch (key.scheme) {
  case Scheme::dwtdct:
    return embed_dwtdct(img, key.bits());
  case Scheme::dwtdctsvd:
    return embed_dwtdctsvd(img, key.bits());
  case Scheme::ring:
    return embed_ring(img, key.ring());
  }
  throw ConfigError("unknown scheme");
}

DetectionReport detect(const ColorImage &img, const SchemeKey &key, const DetectionPolicy &policy,
                       int null_samples) {
  switch (key.scheme) {
  case Scheme::dwtdct:
    return detect_dwtdct(img, key.bits(), policy);
  case Scheme::dwtdctsvd:
    return detect_dwtdctsvd(img, key.bits(), policy);
  case Scheme::ring:
    return detect_ring(img, key.ring(), policy, null_samples);
  }
  throw ConfigError("unknown scheme");
}

} // namespace wmlab
