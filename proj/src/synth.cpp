#include "rffdm/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "rffdm/errors.hpp"
#include "rffdm/random.hpp"

namespace rffdm {

void validate(const ComplexSignal& sig) {
  if (sig.samples.empty()) throw ConfigError("signal must contain at least one sample");
  if (!(sig.sample_rate_hz > 0.0) || !std::isfinite(sig.sample_rate_hz))
    throw ConfigError("signal sample rate must be positive and finite");
  for (const auto& v : sig.samples) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
      throw ConfigError("signal contains a non-finite sample");
  }
}

double mean_power(std::span<const Complex> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& v : x) acc += std::norm(v);
  return acc / static_cast<double>(x.size());
}

ComplexSignal normalize_power(ComplexSignal sig) {
  const double p = mean_power(sig);
  if (p <= 0.0) return sig;
  const double scale = 1.0 / std::sqrt(p);
  for (auto& v : sig.samples) v *= scale;
  return sig;
}

double l2_norm(std::span<const Complex> x) {
  double acc = 0.0;
  for (const auto& v : x) acc += std::norm(v);
  return std::sqrt(acc);
}

}  // namespace rffdm

namespace rffdm::synth {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Subcarriers -26..26 of the short and long training fields.
std::array<Complex, 53> short_training_field() {
  std::array<Complex, 53> s{};
  const Complex p{1.0, 1.0};
  const Complex m{-1.0, -1.0};
  const std::array<std::pair<int, Complex>, 12> tones{{{-24, p}, {-20, m}, {-16, p}, {-12, m},
                                                       {-8, m},  {-4, p},  {4, m},   {8, m},
                                                       {12, p},  {16, p},  {20, p},  {24, p}}};
  const double scale = std::sqrt(13.0 / 6.0);
  for (const auto& [k, v] : tones) s[static_cast<std::size_t>(k + 26)] = scale * v;
  return s;
}

std::array<Complex, 53> long_training_field() {
  constexpr std::array<int, 53> l{1, 1, -1, -1, 1,  1,  -1, 1,  -1, 1,  1,  1,  1,  1,
                                  1, -1, -1, 1, 1,  -1, 1,  -1, 1,  1,  1,  1,  0,  1,
                                  -1, -1, 1, 1, -1, 1,  -1, 1,  -1, -1, -1, -1, -1, 1,
                                  1, -1, -1, 1, -1, 1,  -1, 1,  1,  1,  1};
  std::array<Complex, 53> out{};
  for (std::size_t i = 0; i < l.size(); ++i) out[i] = Complex{static_cast<double>(l[i]), 0.0};
  return out;
}

// 64-point inverse DFT of a -26..26 subcarrier map, evaluated directly.
std::array<Complex, 64> ofdm_symbol(const std::array<Complex, 53>& tones) {
  std::array<Complex, 64> out{};
  for (int n = 0; n < 64; ++n) {
    Complex acc{};
    for (int k = -26; k <= 26; ++k) {
      const Complex v = tones[static_cast<std::size_t>(k + 26)];
      if (v == Complex{}) continue;
      acc += v * std::polar(1.0, kTwoPi * k * n / 64.0);
    }
    out[static_cast<std::size_t>(n)] = acc / 64.0;
  }
  return out;
}

}  // namespace

void validate(const DeviceProfile& p) {
  if (p.device_id < 0) throw ConfigError("device_id must be non-negative");
  if (p.pa_coeffs[0] == Complex{}) throw ConfigError("PA coefficient a1 must be nonzero");
  if (std::abs(p.iq_gain_mismatch - 1.0) >= 0.2) throw ConfigError("|iq_gain_mismatch - 1| must be < 0.2");
  if (std::abs(p.iq_phase_mismatch_rad) >= 0.2) throw ConfigError("|iq_phase_mismatch_rad| must be < 0.2");
  if (std::abs(p.dc_offset) >= 0.1) throw ConfigError("|dc_offset| must be < 0.1");
  const bool finite = std::isfinite(p.cfo_hz) && std::isfinite(p.iq_gain_mismatch) &&
                      std::isfinite(p.iq_phase_mismatch_rad) && std::isfinite(std::abs(p.dc_offset)) &&
                      std::all_of(p.pa_coeffs.begin(), p.pa_coeffs.end(),
                                  [](Complex c) { return std::isfinite(std::abs(c)); });
  if (!finite) throw ConfigError("device profile contains non-finite values");
}

DeviceProfile identity_profile(int device_id) {
  DeviceProfile p;
  p.device_id = device_id;
  return p;
}

void validate(const ChannelConfig& channel) {
  if (channel.taps.empty()) throw ConfigError("channel needs at least one tap");
  double energy = 0.0;
  for (const auto& t : channel.taps) {
    if (!std::isfinite(t.real()) || !std::isfinite(t.imag())) throw ConfigError("channel tap is not finite");
    energy += std::norm(t);
  }
  if (!(energy > 0.0)) throw ConfigError("channel tap energy must be positive");
}

ComplexSignal generate_legacy_preamble(double sample_rate_hz) {
  if (sample_rate_hz != kPreambleRateHz)
    throw ConfigError("legacy preamble is only defined at 20 Msps, got " + std::to_string(sample_rate_hz));

  const auto sts = ofdm_symbol(short_training_field());
  const auto lts = ofdm_symbol(long_training_field());

  ComplexSignal out;
  out.sample_rate_hz = sample_rate_hz;
  out.samples.reserve(kPreambleLength);
  // The short field's 64-sample IDFT has period 16; take ten periods.
  for (std::size_t n = 0; n < kStsLength; ++n) out.samples.push_back(sts[n % 64]);
  for (std::size_t n = 32; n < 64; ++n) out.samples.push_back(lts[n]);
  for (int rep = 0; rep < 2; ++rep)
    for (std::size_t n = 0; n < 64; ++n) out.samples.push_back(lts[n]);
  return normalize_power(std::move(out));
}

ComplexSignal apply_device_impairments(const ComplexSignal& sig, const DeviceProfile& profile) {
  validate(sig);
  validate(profile);
  const auto [a1, a3, a5] = profile.pa_coeffs;
  const double g = profile.iq_gain_mismatch;
  const double cphi = std::cos(profile.iq_phase_mismatch_rad);
  const double sphi = std::sin(profile.iq_phase_mismatch_rad);
  const double cfo_rad = kTwoPi * profile.cfo_hz / sig.sample_rate_hz;

  ComplexSignal out = sig;
  for (std::size_t n = 0; n < out.size(); ++n) {
    const Complex x = sig[n];
    const double mag2 = std::norm(x);
    Complex y = x;
    if (a3 != Complex{} || a5 != Complex{} || a1 != Complex{1.0, 0.0})
      y = a1 * x + a3 * x * mag2 + a5 * x * (mag2 * mag2);
    if (g != 1.0 || profile.iq_phase_mismatch_rad != 0.0)
      y = Complex{y.real(), g * (y.imag() * cphi - y.real() * sphi)};
    if (profile.cfo_hz != 0.0) y *= std::polar(1.0, cfo_rad * static_cast<double>(n));
    out[n] = y + profile.dc_offset;
  }
  return out;
}

ComplexSignal apply_channel(const ComplexSignal& sig, const ChannelConfig& channel) {
  validate(sig);
  validate(channel);
  ComplexSignal out = sig;
  for (std::size_t n = 0; n < sig.size(); ++n) {
    Complex acc{};
    const std::size_t taps = std::min(channel.taps.size(), n + 1);
    for (std::size_t k = 0; k < taps; ++k) acc += channel.taps[k] * sig[n - k];
    out[n] = acc;
  }
  return out;
}

NoisyResult add_noise_variance(const ComplexSignal& sig, double variance, std::uint64_t seed) {
  validate(sig);
  if (!(variance >= 0.0) || !std::isfinite(variance)) throw ConfigError("noise variance must be finite and >= 0");
  NoisyResult r{sig, std::vector<Complex>(sig.size()), variance};
  if (variance == 0.0) return r;
  Rng rng(seed);
  r.noise = complex_gaussian(sig.size(), rng);
  const double sigma = std::sqrt(variance);
  for (std::size_t n = 0; n < sig.size(); ++n) {
    r.noise[n] *= sigma;
    r.noisy[n] += r.noise[n];
  }
  return r;
}

NoisyResult add_awgn(const ComplexSignal& sig, double target_snr_db, std::uint64_t seed) {
  if (std::isnan(target_snr_db) || target_snr_db == -std::numeric_limits<double>::infinity())
    throw ConfigError("target SNR must be finite or +infinity");
  if (std::isinf(target_snr_db)) {
    validate(sig);
    return NoisyResult{sig, std::vector<Complex>(sig.size()), 0.0};
  }
  const double variance = mean_power(sig) / std::pow(10.0, target_snr_db / 10.0);
  return add_noise_variance(sig, variance, seed);
}

double estimate_snr(const ComplexSignal& sig) {
  if (sig.size() < kPreambleLength)
    throw StructureError("SNR estimation needs the " + std::to_string(kPreambleLength) +
                         "-sample legacy preamble, got " + std::to_string(sig.size()));
  Complex cross{};
  double power = 0.0;
  for (std::size_t k = 0; k < kLongSymbolLength; ++k) {
    const Complex a = sig[kLongSymbol1 + k];
    const Complex b = sig[kLongSymbol2 + k];
    cross += a * std::conj(b);
    power += std::norm(a) + std::norm(b);
  }
  const double n = static_cast<double>(kLongSymbolLength);
  const double signal = std::abs(cross) / n;
  const double total = power / (2.0 * n);
  const double noise = total - signal;
  if (noise <= 0.0) return kSnrCeilingDb;
  if (signal <= 0.0) return kSnrFloorDb;
  return std::clamp(10.0 * std::log10(signal / noise), kSnrFloorDb, kSnrCeilingDb);
}

double relative_distance(const ComplexSignal& a, const ComplexSignal& b) {
  if (a.size() != b.size()) throw ShapeError("relative_distance: length mismatch");
  double diff = 0.0;
  for (std::size_t n = 0; n < a.size(); ++n) diff += std::norm(a[n] - b[n]);
  const double ref = l2_norm(a.samples);
  if (ref == 0.0) throw ConfigError("relative_distance: reference has zero norm");
  return std::sqrt(diff) / ref;
}

std::vector<DeviceProfile> make_device_population(int count, std::uint64_t seed,
                                                  const ImpairmentRanges& r) {
  if (count < 1) throw ConfigError("device population must be nonempty");
  const ComplexSignal preamble = generate_legacy_preamble();
  std::vector<DeviceProfile> devices;
  std::vector<ComplexSignal> fingerprints;
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  constexpr int kMaxAttempts = 10000;
  for (int attempt = 0; static_cast<int>(devices.size()) < count; ++attempt) {
    if (attempt >= kMaxAttempts)
      throw ConfigError("could not draw a separable device population; loosen min_separation");
    DeviceProfile p;
    p.device_id = static_cast<int>(devices.size());
    p.cfo_hz = r.cfo_hz * u(rng);
    p.iq_gain_mismatch = 1.0 + r.iq_gain * u(rng);
    p.iq_phase_mismatch_rad = r.iq_phase_rad * u(rng);
    p.dc_offset = std::polar(r.dc_magnitude * u01(rng), kTwoPi * u01(rng));
    p.pa_coeffs = {Complex{1.0, 0.0}, Complex{-r.pa_a3 * u01(rng), 0.25 * r.pa_a3 * u(rng)},
                   Complex{r.pa_a5 * u(rng), 0.0}};
    const ComplexSignal fp = normalize_power(apply_device_impairments(preamble, p));
    const bool separable = std::all_of(fingerprints.begin(), fingerprints.end(), [&](const ComplexSignal& f) {
      return relative_distance(f, fp) >= r.min_separation;
    });
    if (!separable) continue;
    devices.push_back(p);
    fingerprints.push_back(fp);
  }
  return devices;
}

void validate(const SynthesisConfig& cfg) {
  if (cfg.sample_rate_hz != kPreambleRateHz) throw ConfigError("synthesis sample rate must be 20e6");
  if (std::isnan(cfg.capture_snr_db)) throw ConfigError("capture_snr_db must not be NaN");
  if (!(cfg.cfo_jitter_hz >= 0.0)) throw ConfigError("cfo_jitter_hz must be >= 0");
  if (cfg.devices.size() < 2) throw ConfigError("synthesis needs at least two devices");
  for (std::size_t i = 0; i < cfg.devices.size(); ++i) {
    validate(cfg.devices[i]);
    if (cfg.devices[i].device_id != static_cast<int>(i))
      throw ConfigError("device ids must be 0..N-1 in order");
  }
  validate(cfg.channel);
}

ComplexSignal synthesize_clean(const SynthesisConfig& cfg, const DeviceProfile& profile,
                               std::uint64_t packet_seed) {
  DeviceProfile jittered = profile;
  if (cfg.cfo_jitter_hz > 0.0) {
    Rng rng(packet_seed);
    std::normal_distribution<double> jitter(0.0, cfg.cfo_jitter_hz);
    jittered.cfo_hz += jitter(rng);
  }
  const ComplexSignal tx = apply_device_impairments(generate_legacy_preamble(cfg.sample_rate_hz), jittered);
  return normalize_power(apply_channel(tx, cfg.channel));
}

std::vector<LabeledObservation> synthesize_dataset(const SynthesisConfig& cfg, int packets_per_device,
                                                   std::uint64_t seed) {
  validate(cfg);
  if (packets_per_device < 1) throw ConfigError("packets_per_device must be >= 1");
  std::vector<LabeledObservation> out;
  out.reserve(cfg.devices.size() * static_cast<std::size_t>(packets_per_device));
  std::uint64_t index = 0;
  for (const auto& device : cfg.devices) {
    for (int k = 0; k < packets_per_device; ++k, ++index) {
      const std::uint64_t packet_seed = mix_seed(seed, index);
      ComplexSignal clean = synthesize_clean(cfg, device, packet_seed);
      auto noisy = add_awgn(clean, cfg.capture_snr_db, mix_seed(packet_seed, 1));
      LabeledObservation obs;
      obs.signal = std::move(noisy.noisy);
      obs.device_id = device.device_id;
      obs.snr_db = std::isinf(cfg.capture_snr_db) ? kSnrCeilingDb : cfg.capture_snr_db;
      obs.clean_ref = std::move(clean);
      out.push_back(std::move(obs));
    }
  }
  return out;
}

}  // namespace rffdm::synth
