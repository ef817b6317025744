#include "rffdm/diffusion.hpp"

#include <cmath>
#include <string>

#include "rffdm/errors.hpp"
#include "rffdm/random.hpp"

namespace rffdm::diffusion {

NoiseSchedule::NoiseSchedule(int num_steps, double beta_min, double beta_max, double p_s0, double p_n0)
    : num_steps_(num_steps), beta_min_(beta_min), beta_max_(beta_max), p_s0_(p_s0), p_n0_(p_n0) {
  if (num_steps < 2) throw ConfigError("schedule needs T >= 2");
  if (!(beta_min > 0.0 && beta_min < beta_max && beta_max < 1.0))
    throw ConfigError("schedule needs 0 < beta_min < beta_max < 1");
  if (!(p_s0 > 0.0) || !std::isfinite(p_s0)) throw ConfigError("p_s0 must be positive");
  if (!(p_n0 >= 0.0) || !std::isfinite(p_n0)) throw ConfigError("p_n0 must be non-negative");

  const auto T = static_cast<std::size_t>(num_steps);
  beta_.assign(T + 1, 0.0);
  alpha_bar_.assign(T + 1, 1.0);
  gamma_map_.assign(T + 1, 0.0);
  for (std::size_t t = 1; t <= T; ++t) {
    beta_[t] = beta_min + static_cast<double>(t - 1) / static_cast<double>(T - 1) * (beta_max - beta_min);
    alpha_bar_[t] = alpha_bar_[t - 1] * (1.0 - beta_[t]);
  }
  for (std::size_t t = 0; t <= T; ++t) {
    const double ab = alpha_bar_[t];
    const double noise = ab * p_n0 + (1.0 - ab);
    gamma_map_[t] = noise > 0.0 ? 10.0 * std::log10(ab * p_s0 / noise) : kSnrCeilingDb;
  }
}

void NoiseSchedule::check_step(int t, int lo) const {
  if (t < lo || t > num_steps_)
    throw ConfigError("diffusion step " + std::to_string(t) + " outside [" + std::to_string(lo) + ", " +
                      std::to_string(num_steps_) + "]");
}

double NoiseSchedule::beta(int t) const {
  check_step(t, 1);
  return beta_[static_cast<std::size_t>(t)];
}

double NoiseSchedule::alpha(int t) const { return 1.0 - beta(t); }

double NoiseSchedule::alpha_bar(int t) const {
  check_step(t, 0);
  return alpha_bar_[static_cast<std::size_t>(t)];
}

double NoiseSchedule::snr_db(int t) const {
  check_step(t, 0);
  return gamma_map_[static_cast<std::size_t>(t)];
}

NoiseSchedule build_schedule(int num_steps, double beta_min, double beta_max, double p_s0, double p_n0) {
  return NoiseSchedule(num_steps, beta_min, beta_max, p_s0, p_n0);
}

double snr_at_step(const NoiseSchedule& sched, int t) { return sched.snr_db(t); }

ComplexSignal forward_step(const ComplexSignal& x_prev, int t, const NoiseSchedule& sched, std::uint64_t seed) {
  const double a = sched.alpha(t);
  Rng rng(seed);
  const auto eps = complex_gaussian(x_prev.size(), rng);
  ComplexSignal out = x_prev;
  const double keep = std::sqrt(a);
  const double add = std::sqrt(1.0 - a);
  for (std::size_t n = 0; n < out.size(); ++n) out[n] = keep * x_prev[n] + add * eps[n];
  return out;
}

DiffusionSample forward_diffuse(const ComplexSignal& x0, int t, const NoiseSchedule& sched,
                                std::span<const Complex> epsilon) {
  if (epsilon.size() != x0.size()) throw ShapeError("forward_diffuse: noise length differs from signal length");
  if (t < 1) throw ConfigError("forward_diffuse: step must be >= 1");
  const double ab = sched.alpha_bar(t);
  const double keep = std::sqrt(ab);
  const double add = std::sqrt(1.0 - ab);
  DiffusionSample s{x0, t, ComplexSignal{{epsilon.begin(), epsilon.end()}, x0.sample_rate_hz}};
  for (std::size_t n = 0; n < x0.size(); ++n) s.x_t[n] = keep * x0[n] + add * epsilon[n];
  return s;
}

DiffusionSample forward_diffuse(const ComplexSignal& x0, int t, const NoiseSchedule& sched, std::uint64_t seed) {
  sched.alpha_bar(t);
  Rng rng(seed);
  const auto eps = complex_gaussian(x0.size(), rng);
  return forward_diffuse(x0, t, sched, eps);
}

int map_snr_to_step(const NoiseSchedule& sched, double gamma_db) {
  if (!std::isfinite(gamma_db)) throw ConfigError("map_snr_to_step: SNR must be finite");
  const auto map = sched.gamma_map();
  int best = 1;
  double best_gap = std::abs(map[1] - gamma_db);
  for (int t = 2; t <= sched.num_steps(); ++t) {
    const double gap = std::abs(map[static_cast<std::size_t>(t)] - gamma_db);
    if (gap < best_gap) {
      best_gap = gap;
      best = t;
    }
  }
  return best;
}

DenoisePlan plan_timesteps(int t_star, int t_prime) {
  if (t_prime < 1) throw PlanError("t' must be >= 1");
  if (t_prime > t_star)
    throw PlanError("t' (" + std::to_string(t_prime) + ") exceeds t* (" + std::to_string(t_star) + ")");
  DenoisePlan plan;
  plan.t_star = t_star;
  plan.t_prime = t_prime;
  plan.delta_t = static_cast<double>(t_star) / static_cast<double>(t_prime);
  for (int i = 1; i <= t_prime; ++i) {
    const int t = static_cast<int>(std::floor(t_star - i * plan.delta_t + 0.5));
    if (plan.timesteps.empty() || plan.timesteps.back() != t) plan.timesteps.push_back(t);
  }
  if (plan.timesteps.back() != 0) plan.timesteps.back() = 0;
  return plan;
}

ComplexSignal ddim_step(const ComplexSignal& x_t, int t_from, int t_to, std::span<const Complex> eps_hat,
                        const NoiseSchedule& sched, DdimForm form) {
  if (!(0 <= t_to && t_to < t_from && t_from <= sched.num_steps()))
    throw PlanError("ddim_step requires 0 <= t_to < t_from <= T, got t_from=" + std::to_string(t_from) +
                    " t_to=" + std::to_string(t_to));
  if (eps_hat.size() != x_t.size()) throw ShapeError("ddim_step: predicted noise length differs from signal");
  const double ab_from = sched.alpha_bar(t_from);
  const double ab_to = sched.alpha_bar(t_to);
  const double signal_gain = form == DdimForm::kStandard ? ab_to : (t_to == 0 ? 1.0 : sched.alpha(t_to));
  const double inv_keep = 1.0 / std::sqrt(ab_from);
  const double drop = std::sqrt(1.0 - ab_from);
  const double keep_to = std::sqrt(signal_gain);
  const double add_to = std::sqrt(1.0 - ab_to);
  ComplexSignal out = x_t;
  for (std::size_t n = 0; n < x_t.size(); ++n) {
    const Complex x0_hat = (x_t[n] - drop * eps_hat[n]) * inv_keep;
    out[n] = keep_to * x0_hat + add_to * eps_hat[n];
  }
  return out;
}

ComplexSignal denoise(const ComplexSignal& x, double gamma_db, int t_prime, const NoisePredictorFn& predictor,
                      const NoiseSchedule& sched, DenoiseTrace* trace, DdimForm form) {
  if (x.samples.empty()) throw ShapeError("denoise: empty input");
  const int t_star = map_snr_to_step(sched, gamma_db);
  const bool clamped = t_prime > t_star;
  const DenoisePlan plan = plan_timesteps(t_star, clamped ? t_star : t_prime);

  ComplexSignal cur = x;
  int t = t_star;
  for (const int next : plan.timesteps) {
    const ComplexSignal eps = predictor(cur, t);
    if (eps.size() != cur.size())
      throw ShapeError("denoise: predictor returned " + std::to_string(eps.size()) + " samples for input of " +
                       std::to_string(cur.size()));
    cur = ddim_step(cur, t, next, eps.samples, sched, form);
    t = next;
  }
  if (trace) *trace = DenoiseTrace{plan, clamped};
  return normalize_power(std::move(cur));
}

}  // namespace rffdm::diffusion
