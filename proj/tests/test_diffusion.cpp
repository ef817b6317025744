#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "rffdm/diffusion.hpp"
#include "rffdm/errors.hpp"
#include "rffdm/random.hpp"
#include "rffdm/synth.hpp"
#include "support.hpp"

using namespace rffdm;
using namespace rffdm::diffusion;
using rffdm::test::rel_l2;

namespace {

const NoiseSchedule& default_schedule() {
  static const NoiseSchedule s = build_schedule(1000, 1e-5, 1.5e-3);
  return s;
}

// Oracle: alpha_bar from a running product of the betas.
double oracle_alpha_bar(const NoiseSchedule& s, int t) {
  long double ab = 1.0L;
  for (int k = 1; k <= t; ++k) ab *= 1.0L - static_cast<long double>(s.beta(k));
  return static_cast<double>(ab);
}

double oracle_gamma_db(const NoiseSchedule& s, int t) {
  const double ab = oracle_alpha_bar(s, t);
  return 10.0 * std::log10(ab * s.p_s0() / (ab * s.p_n0() + 1.0 - ab));
}

// Nearest entry in an arbitrary transformed domain, smaller index on ties.
template <typename F>
int argmin_transformed(const NoiseSchedule& s, double gamma_db, F transform) {
  int best = 1;
  double best_d = std::abs(transform(s.snr_db(1)) - transform(gamma_db));
  for (int t = 2; t <= s.num_steps(); ++t) {
    const double d = std::abs(transform(s.snr_db(t)) - transform(gamma_db));
    if (d < best_d) {
      best = t;
      best_d = d;
    }
  }
  return best;
}

ComplexSignal oracle_predictor_output(const DiffusionSample& s) { return s.epsilon; }

}  // namespace

TEST(Schedule, LinearBetaEndpoints) {
  const auto& s = default_schedule();
  EXPECT_DOUBLE_EQ(s.beta(1), 1e-5);
  EXPECT_NEAR(s.beta(1000), 1.5e-3, 1e-18);
  EXPECT_DOUBLE_EQ(s.alpha_bar(1), 1.0 - 1e-5);
  EXPECT_EQ(s.alpha_bar(0), 1.0);
  EXPECT_EQ(s.gamma_map().size(), 1001u);
}

TEST(Schedule, StrictMonotonicityExhaustive) {
  const auto& s = default_schedule();
  for (int t = 1; t < 1000; ++t) {
    EXPECT_LT(s.beta(t), s.beta(t + 1));
    EXPECT_GT(s.alpha_bar(t), s.alpha_bar(t + 1));
    EXPECT_GT(s.snr_db(t), s.snr_db(t + 1));
  }
  EXPECT_GT(s.snr_db(0), s.snr_db(1));
}

TEST(Schedule, GammaMatchesRunningProductOracle) {
  const auto& s = default_schedule();
  for (int t = 1; t <= 1000; ++t) {
    EXPECT_NEAR(s.snr_db(t), oracle_gamma_db(s, t), 1e-9) << t;
    EXPECT_NEAR(snr_at_step(s, t), 10.0 * std::log10(s.alpha_bar(t) / (1.0 - s.alpha_bar(t))), 1e-12);
  }
  const auto noisy = build_schedule(1000, 1e-5, 1.5e-3, 2.0, 0.1);
  for (int t = 0; t <= 1000; t += 37) EXPECT_NEAR(noisy.snr_db(t), oracle_gamma_db(noisy, t), 1e-9);
}

TEST(Schedule, CleanStepClampsToCeiling) { EXPECT_EQ(snr_at_step(default_schedule(), 0), 60.0); }

TEST(Schedule, HalfAlphaBarIsZeroDb) {
  const auto s = build_schedule(2, 0.5, 0.6);
  EXPECT_DOUBLE_EQ(s.alpha_bar(1), 0.5);
  EXPECT_NEAR(snr_at_step(s, 1), 0.0, 1e-12);
}

TEST(Schedule, InvalidRangesRejected) {
  EXPECT_THROW(build_schedule(1000, 1e-3, 1e-5), ConfigError);
  EXPECT_THROW(build_schedule(1000, 0.0, 1e-3), ConfigError);
  EXPECT_THROW(build_schedule(1, 1e-5, 1e-3), ConfigError);
  EXPECT_THROW(build_schedule(1000, 1e-5, 1.0), ConfigError);
}

TEST(Schedule, DefaultsCoverEvaluatedRange) {
  const auto& s = default_schedule();
  EXPECT_GT(s.snr_db(1), 40.0);
  EXPECT_LT(s.snr_db(1000), 0.0);
}

TEST(ForwardStep, FirstStepBarelyAttenuates) {
  const auto& s = default_schedule();
  const auto x = synth::generate_legacy_preamble();
  const auto y = forward_step(x, 1, s, 5);
  ComplexSignal scaled = x;
  for (auto& v : scaled.samples) v *= std::sqrt(1.0 - 1e-5);
  // The residual is the sqrt(beta_1)-scaled noise draw.
  EXPECT_NEAR(rel_l2(y, scaled), std::sqrt(1e-5), 1e-3);
}

TEST(ForwardStep, ZeroInputGivesScaledNoise) {
  const auto& s = default_schedule();
  ComplexSignal zero;
  zero.samples.assign(20000, Complex{});
  const auto y = forward_step(zero, 700, s, 8);
  EXPECT_NEAR(mean_power(y) / s.beta(700), 1.0, 0.03);
}

TEST(ForwardStep, ChainMatchesClosedFormDistribution) {
  const auto& s = default_schedule();
  const auto full = synth::generate_legacy_preamble();
  ComplexSignal x0;
  x0.samples.assign(full.samples.begin(), full.samples.begin() + 64);
  const int k = 40, trials = 2000;
  const std::size_t m = x0.size();
  std::vector<Complex> sum_c(m), sum_f(m);
  std::vector<double> sq_c(m), sq_f(m);
  for (int i = 0; i < trials; ++i) {
    ComplexSignal x = x0;
    for (int t = 1; t <= k; ++t) x = forward_step(x, t, s, mix_seed(i, t));
    const auto f = forward_diffuse(x0, k, s, static_cast<std::uint64_t>(1'000'000 + i)).x_t;
    for (std::size_t n = 0; n < m; ++n) {
      sum_c[n] += x[n];
      sum_f[n] += f[n];
      sq_c[n] += std::norm(x[n]);
      sq_f[n] += std::norm(f[n]);
    }
  }
  const double ab = s.alpha_bar(k);
  const double var = 1.0 - ab;  // per complex sample
  const double se_mean = std::sqrt(var / 2.0 / trials);
  const double se_var = var * std::sqrt(1.0 / trials);
  int outliers = 0;
  for (std::size_t n = 0; n < m; ++n) {
    const Complex want = std::sqrt(ab) * x0[n];
    for (const auto* sum : {&sum_c, &sum_f}) {
      const Complex mean = (*sum)[n] / static_cast<double>(trials);
      outliers += std::abs(mean.real() - want.real()) > 3 * se_mean;
      outliers += std::abs(mean.imag() - want.imag()) > 3 * se_mean;
    }
    const double vc = sq_c[n] / trials - std::norm(sum_c[n] / static_cast<double>(trials));
    const double vf = sq_f[n] / trials - std::norm(sum_f[n] / static_cast<double>(trials));
    outliers += std::abs(vc - var) > 3 * se_var;
    outliers += std::abs(vf - var) > 3 * se_var;
  }
  // 384 checks at 3 sigma: about one chance exceedance is expected.
  EXPECT_LE(outliers, 6);
}

TEST(ForwardDiffuse, ZeroNoiseAtFirstStep) {
  const auto& s = default_schedule();
  const auto x0 = synth::generate_legacy_preamble();
  const std::vector<Complex> zeros(x0.size());
  const auto r = forward_diffuse(x0, 1, s, zeros);
  for (std::size_t n = 0; n < x0.size(); ++n) EXPECT_NEAR(std::abs(r.x_t[n] - std::sqrt(1.0 - 1e-5) * x0[n]), 0.0, 1e-15);
}

TEST(ForwardDiffuse, MonteCarloSnrMatchesMap) {
  const auto& s = default_schedule();
  const auto x0 = synth::generate_legacy_preamble();
  for (const int t : {100, 500, 900}) {
    double pn = 0.0;
    const double keep = std::sqrt(s.alpha_bar(t));
    for (int seed = 0; seed < 1000; ++seed) {
      const auto r = forward_diffuse(x0, t, s, static_cast<std::uint64_t>(seed));
      for (std::size_t n = 0; n < x0.size(); ++n) pn += std::norm(r.x_t[n] - keep * x0[n]);
    }
    pn /= 1000.0 * static_cast<double>(x0.size());
    const double snr = 10.0 * std::log10(s.alpha_bar(t) * mean_power(x0) / pn);
    EXPECT_NEAR(snr, s.snr_db(t), 0.3) << "t=" << t;
  }
}

TEST(ForwardDiffuse, ExactAlgebraicInversion) {
  const auto& s = default_schedule();
  const auto x0 = synth::generate_legacy_preamble();
  for (const int t : {1, 250, 999, 1000}) {
    const auto r = forward_diffuse(x0, t, s, 31);
    ComplexSignal back = r.x_t;
    for (std::size_t n = 0; n < x0.size(); ++n)
      back[n] = (r.x_t[n] - std::sqrt(1.0 - s.alpha_bar(t)) * r.epsilon[n]) / std::sqrt(s.alpha_bar(t));
    EXPECT_LT(rel_l2(back, x0), 1e-12);
  }
}

TEST(MapSnr, AboveFirstStepClampsToOne) {
  EXPECT_EQ(map_snr_to_step(default_schedule(), 80.0), 1);
  EXPECT_EQ(map_snr_to_step(default_schedule(), default_schedule().snr_db(1) + 1e-9), 1);
}

TEST(MapSnr, BelowLastStepClampsToT) { EXPECT_EQ(map_snr_to_step(default_schedule(), -40.0), 1000); }

TEST(MapSnr, ExactMapValues) {
  const auto& s = default_schedule();
  for (int k = 1; k <= 1000; ++k) EXPECT_EQ(map_snr_to_step(s, s.snr_db(k)), k);
}

TEST(MapSnr, MidpointTieGoesToSmallerStep) {
  const auto& s = default_schedule();
  int exact_ties = 0;
  for (int k = 1; k < 1000; k += 11) {
    const double mid = 0.5 * (s.snr_db(k) + s.snr_db(k + 1));
    // Only a representable exact tie exercises the rule; nearby values must still land on k or k+1.
    const double dk = std::abs(s.snr_db(k) - mid), dk1 = std::abs(s.snr_db(k + 1) - mid);
    const int got = map_snr_to_step(s, mid);
    if (dk == dk1) {
      ++exact_ties;
      EXPECT_EQ(got, k);
    } else {
      EXPECT_EQ(got, dk < dk1 ? k : k + 1);
    }
  }
  EXPECT_GT(exact_ties, 0);
}

TEST(MapSnr, InvariantUnderIncreasingAffineTransform) {
  const auto& s = default_schedule();
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> g(-5.0, 55.0);
  for (int i = 0; i < 300; ++i) {
    const double gamma = g(rng);
    // Scaling by a power of two and shifting by a small integer stay exact in floating point.
    EXPECT_EQ(map_snr_to_step(s, gamma), argmin_transformed(s, gamma, [](double v) { return 4.0 * v + 3.0; }));
  }
}

TEST(MapSnr, LinearAndDbDomainsAgree) {
  const auto& s = default_schedule();
  auto lin = [](double db) { return std::pow(10.0, db / 10.0); };
  for (int k = 1; k <= 1000; k += 7) EXPECT_EQ(argmin_transformed(s, s.snr_db(k), lin), k);
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> g(-2.0, 48.0);
  for (int i = 0; i < 300; ++i) {
    const double gamma = g(rng);
    EXPECT_LE(std::abs(map_snr_to_step(s, gamma) - argmin_transformed(s, gamma, lin)), 1);
  }
}

TEST(Plan, EvenSplit) {
  const auto p = plan_timesteps(1000, 10);
  EXPECT_DOUBLE_EQ(p.delta_t, 100.0);
  EXPECT_EQ(p.timesteps, (std::vector<int>{900, 800, 700, 600, 500, 400, 300, 200, 100, 0}));
}

TEST(Plan, FullTrajectory) { EXPECT_EQ(plan_timesteps(5, 5).timesteps, (std::vector<int>{4, 3, 2, 1, 0})); }

TEST(Plan, FractionalRoundsHalfUp) {
  const auto p = plan_timesteps(7, 2);
  EXPECT_DOUBLE_EQ(p.delta_t, 3.5);
  EXPECT_EQ(p.timesteps, (std::vector<int>{4, 0}));
}

TEST(Plan, PropertiesOverGrid) {
  for (int ts = 1; ts <= 60; ++ts) {
    for (int tp = 1; tp <= ts; ++tp) {
      const auto p = plan_timesteps(ts, tp);
      ASSERT_FALSE(p.timesteps.empty());
      EXPECT_EQ(p.timesteps.back(), 0);
      EXPECT_LT(p.timesteps.front(), ts);
      EXPECT_EQ(p.timesteps.front(), static_cast<int>(std::floor(ts - static_cast<double>(ts) / tp + 0.5)));
      for (std::size_t i = 1; i < p.timesteps.size(); ++i) EXPECT_LT(p.timesteps[i], p.timesteps[i - 1]);
    }
  }
}

TEST(Plan, PreconditionsEnforced) {
  EXPECT_THROW(plan_timesteps(5, 6), PlanError);
  EXPECT_THROW(plan_timesteps(5, 0), PlanError);
  EXPECT_THROW(plan_timesteps(0, 0), PlanError);
}

TEST(Ddim, TrueNoiseRecoversCleanSignal) {
  const auto& s = default_schedule();
  const auto x0 = synth::generate_legacy_preamble();
  for (const int t : {3, 400, 1000}) {
    const auto r = forward_diffuse(x0, t, s, 17);
    EXPECT_LT(rel_l2(ddim_step(r.x_t, t, 0, r.epsilon.samples, s), x0), 1e-10);
  }
}

TEST(Ddim, ZeroNoiseIsPureRescale) {
  const auto& s = default_schedule();
  const auto x = test::random_signal(64, 2);
  const std::vector<Complex> zeros(64);
  const auto y = ddim_step(x, 600, 250, zeros, s);
  const double gain = std::sqrt(s.alpha_bar(250) / s.alpha_bar(600));
  for (std::size_t n = 0; n < 64; ++n) EXPECT_NEAR(std::abs(y[n] - gain * x[n]), 0.0, 1e-13);
}

TEST(Ddim, TwoHopsEqualOneHop) {
  const auto& s = default_schedule();
  const auto x0 = synth::generate_legacy_preamble();
  const auto r = forward_diffuse(x0, 800, s, 23);
  const auto mid = ddim_step(r.x_t, 800, 350, r.epsilon.samples, s);
  const auto two = ddim_step(mid, 350, 0, r.epsilon.samples, s);
  const auto one = ddim_step(r.x_t, 800, 0, r.epsilon.samples, s);
  EXPECT_LT(rel_l2(two, one), 1e-10);
}

TEST(Ddim, NonCumulativeFormDiffersOnlyInSignalGain) {
  const auto& s = default_schedule();
  const auto x = test::random_signal(32, 6);
  const auto eps = test::random_signal(32, 7);
  const auto std_form = ddim_step(x, 500, 200, eps.samples, s, DdimForm::kStandard);
  const auto variant = ddim_step(x, 500, 200, eps.samples, s, DdimForm::kNonCumulativeGain);
  const double drop = std::sqrt(1.0 - s.alpha_bar(500)), keep = std::sqrt(s.alpha_bar(500));
  for (std::size_t n = 0; n < 32; ++n) {
    const Complex x0_hat = (x[n] - drop * eps[n]) / keep;
    EXPECT_NEAR(std::abs(variant[n] - std_form[n] - (std::sqrt(s.alpha(200)) - std::sqrt(s.alpha_bar(200))) * x0_hat),
                0.0, 1e-12);
  }
}

TEST(Ddim, BadStepsRejected) {
  const auto& s = default_schedule();
  const auto x = test::random_signal(8, 1);
  EXPECT_THROW(ddim_step(x, 5, 5, x.samples, s), PlanError);
  EXPECT_THROW(ddim_step(x, 1001, 0, x.samples, s), PlanError);
  EXPECT_THROW(ddim_step(x, 5, 1, std::vector<Complex>(7), s), ShapeError);
}

TEST(Denoise, OracleInversionAllPlans) {
  const auto& s = default_schedule();
  const auto x0 = synth::generate_legacy_preamble();
  for (const int t_star : {1, 7, 10, 99, 480, 960, 1000}) {
    const auto sample = forward_diffuse(x0, t_star, s, 100 + t_star);
    NoisePredictorFn oracle = [&](const ComplexSignal&, int) { return oracle_predictor_output(sample); };
    for (const int tp : {1, 5, 10}) {
      DenoiseTrace trace;
      const auto out = denoise(sample.x_t, s.snr_db(t_star), tp, oracle, s, &trace);
      EXPECT_EQ(trace.plan.t_star, t_star);
      EXPECT_EQ(trace.clamped, tp > t_star);
      EXPECT_LT(rel_l2(out, x0), 1e-6) << "t*=" << t_star << " t'=" << tp;
    }
  }
}

TEST(Denoise, SingleStepPlanIsOneDdimStep) {
  const auto& s = default_schedule();
  const auto x = test::random_signal(64, 12);
  const auto eps = test::random_signal(64, 13);
  NoisePredictorFn fixed = [&](const ComplexSignal&, int) { return eps; };
  const int t_star = map_snr_to_step(s, 3.0);
  const auto out = denoise(x, 3.0, 1, fixed, s);
  const auto ref = normalize_power(ddim_step(x, t_star, 0, eps.samples, s));
  EXPECT_EQ(out, ref);
}

TEST(Denoise, BitwiseDeterministic) {
  const auto& s = default_schedule();
  const auto x = test::random_signal(320, 21);
  NoisePredictorFn f = [](const ComplexSignal& in, int t) {
    ComplexSignal o = in;
    for (auto& v : o.samples) v = std::tanh(v.real() * t * 1e-3) + Complex{0.0, std::sin(v.imag())};
    return o;
  };
  EXPECT_EQ(denoise(x, 2.0, 10, f, s), denoise(x, 2.0, 10, f, s));
}

TEST(Denoise, TPrimeAboveTStarIsClamped) {
  const auto& s = default_schedule();
  const auto x = test::random_signal(32, 1);
  int calls = 0;
  NoisePredictorFn f = [&](const ComplexSignal& in, int) {
    ++calls;
    return ComplexSignal{std::vector<Complex>(in.size()), in.sample_rate_hz};
  };
  DenoiseTrace trace;
  denoise(x, 45.0, 10, f, s, &trace);
  EXPECT_TRUE(trace.clamped);
  EXPECT_EQ(trace.plan.t_prime, trace.plan.t_star);
  EXPECT_EQ(calls, trace.plan.t_star);
}
