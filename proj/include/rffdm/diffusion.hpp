#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "rffdm/signal.hpp"

namespace rffdm::diffusion {

/// Linear variance schedule with its cumulative products and the per-step SNR map.
///
/// Steps are 1-based (1..T). Index 0 denotes the clean signal: alpha_bar(0) == 1
/// and snr_db(0) is the SNR of x0 itself.
class NoiseSchedule {
 public:
  NoiseSchedule(int num_steps, double beta_min, double beta_max, double p_s0 = 1.0, double p_n0 = 0.0);

  int num_steps() const noexcept { return num_steps_; }
  double beta_min() const noexcept { return beta_min_; }
  double beta_max() const noexcept { return beta_max_; }
  double p_s0() const noexcept { return p_s0_; }
  double p_n0() const noexcept { return p_n0_; }

  double beta(int t) const;
  double alpha(int t) const;
  /// Defined for 0..T.
  double alpha_bar(int t) const;
  /// gamma_map[t] in dB, 0..T.
  double snr_db(int t) const;
  std::span<const double> gamma_map() const noexcept { return gamma_map_; }

 private:
  void check_step(int t, int lo) const;

  int num_steps_;
  double beta_min_, beta_max_, p_s0_, p_n0_;
  std::vector<double> beta_;       // [0] unused
  std::vector<double> alpha_bar_;  // [0] == 1
  std::vector<double> gamma_map_;
};

NoiseSchedule build_schedule(int num_steps, double beta_min, double beta_max, double p_s0 = 1.0,
                             double p_n0 = 0.0);

/// SNR in dB of a diffused signal per the schedule (t in 0..T).
double snr_at_step(const NoiseSchedule& sched, int t);

struct DiffusionSample {
  ComplexSignal x_t;
  int t = 1;
  ComplexSignal epsilon;
};

/// One Markov step: sqrt(alpha_t) x_prev + sqrt(1 - alpha_t) eps.
ComplexSignal forward_step(const ComplexSignal& x_prev, int t, const NoiseSchedule& sched, std::uint64_t seed);

/// Closed-form jump from x0 to step t with a seeded noise draw.
DiffusionSample forward_diffuse(const ComplexSignal& x0, int t, const NoiseSchedule& sched, std::uint64_t seed);

/// Closed-form jump with caller-supplied noise.
DiffusionSample forward_diffuse(const ComplexSignal& x0, int t, const NoiseSchedule& sched,
                                std::span<const Complex> epsilon);

/// Step whose scheduled SNR is nearest to gamma_db, searched over 1..T; ties go to the smaller step.
int map_snr_to_step(const NoiseSchedule& sched, double gamma_db);

struct DenoisePlan {
  int t_star = 1;
  int t_prime = 1;
  double delta_t = 1.0;
  /// Strictly decreasing, ends at 0. Does not include t_star itself.
  std::vector<int> timesteps;
};

/// Step-skipping plan t_i = t* - i * (t*/t'), rounded half-up, deduplicated, last forced to 0.
DenoisePlan plan_timesteps(int t_star, int t_prime);

enum class DdimForm {
  /// alpha_bar in both terms.
  kStandard,
  /// Non-cumulative alpha in the x0 term, cumulative in the noise term.
  kNonCumulativeGain,
};

/// Deterministic update from t_from down to t_to (t_to == 0 returns the x0 estimate).
ComplexSignal ddim_step(const ComplexSignal& x_t, int t_from, int t_to, std::span<const Complex> eps_hat,
                        const NoiseSchedule& sched, DdimForm form = DdimForm::kStandard);

/// Predicts the noise content of x_t at step t.
using NoisePredictorFn = std::function<ComplexSignal(const ComplexSignal& x_t, int t)>;

struct DenoiseTrace {
  DenoisePlan plan;
  /// True when the requested t' exceeded t* and was reduced to t*.
  bool clamped = false;
};

/// Maps gamma_db to t*, walks the step-skipping plan, and renormalizes the result to unit power.
/// The input must already be on the diffusion scale (unit total power for a unit-power x0).
/// t_prime above t* is clamped to t*.
ComplexSignal denoise(const ComplexSignal& x, double gamma_db, int t_prime, const NoisePredictorFn& predictor,
                      const NoiseSchedule& sched, DenoiseTrace* trace = nullptr,
                      DdimForm form = DdimForm::kStandard);

}  // namespace rffdm::diffusion
