#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "rffdm/signal.hpp"

namespace rffdm::synth {

inline constexpr double kPreambleRateHz = 20e6;
inline constexpr std::size_t kStsLength = 160;
inline constexpr std::size_t kLtsLength = 160;
inline constexpr std::size_t kPreambleLength = kStsLength + kLtsLength;
/// Offsets of the two 64-sample long training symbols inside the preamble.
inline constexpr std::size_t kLongSymbol1 = 192;
inline constexpr std::size_t kLongSymbol2 = 256;
inline constexpr std::size_t kLongSymbolLength = 64;

/// Hardware impairment parameters of one virtual transmitter.
struct DeviceProfile {
  int device_id = 0;
  double cfo_hz = 0.0;
  double iq_gain_mismatch = 1.0;
  double iq_phase_mismatch_rad = 0.0;
  Complex dc_offset{0.0, 0.0};
  /// Memoryless PA: y = a1 x + a3 x|x|^2 + a5 x|x|^4.
  std::array<Complex, 3> pa_coeffs{Complex{1.0, 0.0}, Complex{}, Complex{}};

  bool operator==(const DeviceProfile&) const = default;
};

void validate(const DeviceProfile& profile);

DeviceProfile identity_profile(int device_id = 0);

struct ChannelConfig {
  std::vector<Complex> taps{Complex{1.0, 0.0}};

  bool operator==(const ChannelConfig&) const = default;
};

void validate(const ChannelConfig& channel);

/// 802.11 legacy preamble (STS + LTS), unit average power. Only 20 Msps is supported.
ComplexSignal generate_legacy_preamble(double sample_rate_hz = kPreambleRateHz);

/// PA -> IQ imbalance -> CFO -> DC, in that order.
ComplexSignal apply_device_impairments(const ComplexSignal& sig, const DeviceProfile& profile);

/// Linear convolution truncated to the input length.
ComplexSignal apply_channel(const ComplexSignal& sig, const ChannelConfig& channel);

struct NoisyResult {
  ComplexSignal noisy;
  std::vector<Complex> noise;
  /// Per-sample variance the noise was drawn with.
  double variance = 0.0;
};

/// Adds circular complex AWGN scaled against the measured signal power.
/// A +infinity target returns the input unchanged with an all-zero noise record.
NoisyResult add_awgn(const ComplexSignal& sig, double target_snr_db, std::uint64_t seed);

/// Adds AWGN with an explicit per-sample variance.
NoisyResult add_noise_variance(const ComplexSignal& sig, double variance, std::uint64_t seed);

/// LTS-repetition SNR estimate in dB, clamped to [kSnrFloorDb, kSnrCeilingDb].
/// Requires the preamble layout (at least kPreambleLength samples).
double estimate_snr(const ComplexSignal& sig);

/// Bounds for drawing a device population.
struct ImpairmentRanges {
  double cfo_hz = 2500.0;
  double iq_gain = 0.06;
  double iq_phase_rad = 0.06;
  double dc_magnitude = 0.04;
  double pa_a3 = 0.12;
  double pa_a5 = 0.03;
  /// Minimum pairwise relative L2 distance between impaired unit-power preambles.
  double min_separation = 0.08;
};

/// Draws `count` profiles from `seed`, redrawing any profile that lands closer
/// than ranges.min_separation to an earlier one.
std::vector<DeviceProfile> make_device_population(int count, std::uint64_t seed,
                                                  const ImpairmentRanges& ranges = {});

struct SynthesisConfig {
  double sample_rate_hz = kPreambleRateHz;
  /// SNR of the simulated capture; the receiver sits close to the transmitter.
  double capture_snr_db = 40.0;
  /// Per-packet Gaussian CFO drift around the device's nominal offset.
  double cfo_jitter_hz = 150.0;
  std::vector<DeviceProfile> devices;
  ChannelConfig channel;

  bool operator==(const SynthesisConfig&) const = default;
};

void validate(const SynthesisConfig& cfg);

/// Clean (pre-noise) unit-power transmission of one packet for `profile`.
ComplexSignal synthesize_clean(const SynthesisConfig& cfg, const DeviceProfile& profile,
                               std::uint64_t packet_seed);

/// packets_per_device records per device, device-major. Each record keeps its clean reference.
std::vector<LabeledObservation> synthesize_dataset(const SynthesisConfig& cfg,
                                                   int packets_per_device, std::uint64_t seed);

/// Relative L2 distance ||a - b|| / ||a||.
double relative_distance(const ComplexSignal& a, const ComplexSignal& b);

}  // namespace rffdm::synth
