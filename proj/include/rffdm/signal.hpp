#pragma once

#include <complex>
#include <optional>
#include <span>
#include <vector>

namespace rffdm {

using Complex = std::complex<double>;

/// Complex baseband samples plus the rate they were taken at.
struct ComplexSignal {
  std::vector<Complex> samples;
  double sample_rate_hz = 20e6;

  std::size_t size() const noexcept { return samples.size(); }
  Complex& operator[](std::size_t i) { return samples[i]; }
  const Complex& operator[](std::size_t i) const { return samples[i]; }

  bool operator==(const ComplexSignal&) const = default;
};

/// Throws ConfigError unless nonempty, finite, and sample_rate_hz > 0.
void validate(const ComplexSignal& sig);

double mean_power(std::span<const Complex> x);
inline double mean_power(const ComplexSignal& sig) { return mean_power(sig.samples); }

/// Scales to unit mean power. A zero signal is returned unchanged.
ComplexSignal normalize_power(ComplexSignal sig);

double l2_norm(std::span<const Complex> x);

/// Ceiling used for noiseless SNR values throughout (estimator clamp, schedule t=0).
inline constexpr double kSnrCeilingDb = 60.0;
inline constexpr double kSnrFloorDb = -10.0;

/// One dataset record.
struct LabeledObservation {
  ComplexSignal signal;
  int device_id = 0;
  double snr_db = kSnrCeilingDb;
  std::optional<ComplexSignal> clean_ref;

  bool operator==(const LabeledObservation&) const = default;
};

}  // namespace rffdm
