#pragma once

#include "wmlab/image.hpp"

#include <json.hpp>

#include <complex>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace wmlab {

enum class Scheme { dwtdct, dwtdctsvd, ring };

std::string_view scheme_name(Scheme s) noexcept;
/// Accepts "dwtdct", "dwtdctsvd", "ring" in any letter case.
Scheme parse_scheme(std::string_view name);

inline constexpr int kPayloadBits = 32;
inline constexpr double kDefaultQimStep = 4.0 / 255.0;
/// Coefficient carrying the bit in each selected LL block (DwtDct).
inline constexpr int kQimU = 3;
inline constexpr int kQimV = 2;
/// Singular-value QIM uses a coarser lattice.
inline constexpr double kSvdStepFactor = 8.0;
/// Lattice offsets tried by the bit detectors.
inline constexpr int kOffsetSearchSteps = 32;

struct BitKey {
  std::uint32_t payload = 0;
  std::uint64_t seed = 0;
  double qim_step = kDefaultQimStep;

  int bit(int i) const noexcept { return static_cast<int>((payload >> i) & 1U); }
};

inline constexpr int kRingSectors = 128;
inline constexpr double kDefaultRingStrength = 0.15;
/// Ring target magnitudes are amplitude * size / r times U(0.5, 1.5).
inline constexpr double kRingAmplitude = 0.144;
inline constexpr double kRingMagnitudeLo = 0.5;
inline constexpr double kRingMagnitudeHi = 1.5;
/// Luminance is rescaled to this standard deviation before the ring
/// transform, so gain changes of the image do not move the statistic.
inline constexpr double kRingReferenceStd = 0.2;
inline constexpr int kDefaultNullSamples = 199;

/// Ring key on the image's own centered spectrum. Each annulus is
/// split into kRingSectors angular sectors over the half plane ky > 0 (plus
/// the positive kx axis); the other half carries complex conjugates.
struct RingKey {
  std::uint64_t seed = 0;
  /// Image side the default radii and magnitudes were derived from.
  int size = 256;
  /// Annulus radii in cycles/image, strictly increasing.
  std::vector<double> radii;
  /// pattern[r][sector]
  std::vector<std::vector<std::complex<double>>> pattern;
  double strength = kDefaultRingStrength;
};

/// Radii at 1/6, 1/4 and 1/3 of Nyquist for a size x size image.
std::vector<double> default_ring_radii(int size);

BitKey make_bit_key(std::uint64_t seed, double qim_step = kDefaultQimStep);
/// Empty `radii` selects default_ring_radii(size).
RingKey make_ring_key(std::uint64_t seed, int size = 256, double strength = kDefaultRingStrength,
                      std::vector<double> radii = {});
/// Key with fresh pattern but identical radii, size and strength.
RingKey make_null_key(const RingKey &key, int index);

void validate(const BitKey &key);
void validate(const RingKey &key);

struct SchemeKey {
  Scheme scheme = Scheme::dwtdct;
  std::variant<BitKey, RingKey> key;

  const BitKey &bits() const;
  const RingKey &ring() const;
};

SchemeKey make_key(Scheme scheme, std::uint64_t seed, int image_size = 256);

nlohmann::json key_to_json(const SchemeKey &key);
SchemeKey key_from_json(const nlohmann::json &doc);
void save_key(const SchemeKey &key, const std::string &path);
SchemeKey load_key(const std::string &path);

struct DetectionPolicy {
  int bit_threshold = 23;
  double p_threshold = 0.01;

  void validate() const;
};

struct DetectionReport {
  Scheme scheme = Scheme::dwtdct;
  /// Bit schemes only; -1 for the ring scheme.
  int bits_recovered = -1;
  /// Ring scheme only.
  double ring_statistic = 0.0;
  double p_value = 1.0;
  bool detected = false;
  std::string threshold_used;
};

nlohmann::json report_to_json(const DetectionReport &report);

// Bit schemes. Embedding returns an image on the 8-bit grid: pixels move by
// whole levels, equally in R, G and B, until every carrier sits on its QIM
// lattice point.
ColorImage embed_dwtdct(const ColorImage &img, const BitKey &key);
DetectionReport detect_dwtdct(const ColorImage &img, const BitKey &key,
                              const DetectionPolicy &policy = {});
ColorImage embed_dwtdctsvd(const ColorImage &img, const BitKey &key);
DetectionReport detect_dwtdctsvd(const ColorImage &img, const BitKey &key,
                                 const DetectionPolicy &policy = {});

ColorImage embed_ring(const ColorImage &img, const RingKey &key);
/// Mean squared distance between the observed annulus coefficients and the
/// key pattern, on the gain-normalised luminance spectrum.
double ring_statistic(const ColorImage &img, const RingKey &key);
DetectionReport detect_ring(const ColorImage &img, const RingKey &key,
                            const DetectionPolicy &policy = {},
                            int null_samples = kDefaultNullSamples);

ColorImage embed(const ColorImage &img, const SchemeKey &key);
DetectionReport detect(const ColorImage &img, const SchemeKey &key,
                       const DetectionPolicy &policy = {},
                       int null_samples = kDefaultNullSamples);

/// Indices of the LL blocks carrying the payload, in bit order.
std::vector<int> payload_blocks(std::uint64_t seed, int block_count);

} // namespace wmlab
