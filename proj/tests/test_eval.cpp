#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "rffdm/diffusion.hpp"
#include "rffdm/errors.hpp"
#include "rffdm/eval.hpp"
#include "rffdm/synth.hpp"
#include "support.hpp"

using namespace rffdm;

namespace {

synth::SynthesisConfig synthesis() {
  synth::SynthesisConfig c;
  c.devices = synth::make_device_population(6, 20240601);
  c.channel.taps = {Complex{1.0, 0.0}, Complex{0.2, -0.1}};
  return c;
}

models::NoisePredictorConfig small_predictor() {
  models::NoisePredictorConfig c;
  c.model_dim = 16;
  c.num_blocks = 1;
  c.num_heads = 2;
  c.step_embed_dim = 16;
  c.patch_len = 16;
  c.ffn_dim = 32;
  return c;
}

const diffusion::NoiseSchedule& schedule() {
  static const auto s = diffusion::build_schedule(1000, 1e-5, 1.5e-3);
  return s;
}

// Expected |corr| between x and x + n with independent noise at the given SNR.
double noisy_correlation_oracle(double snr_db) { return std::sqrt(1.0 / (1.0 + std::pow(10.0, -snr_db / 10.0))); }

std::vector<std::string> lines_of(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST(Correlation, SelfAndScaleInvariance) {
  const auto x = test::random_signal(320, 1);
  EXPECT_NEAR(eval::correlation(x, x), 1.0, 1e-12);
  auto y = x;
  for (auto& v : y.samples) v *= Complex{-2.5, 0.7};
  EXPECT_NEAR(eval::correlation(x, y), 1.0, 1e-12);
  EXPECT_NEAR(eval::correlation(y, x), 1.0, 1e-12);
}

TEST(Correlation, IndependentNoiseIsSmall) {
  double worst = 0.0;
  for (unsigned s = 0; s < 20; ++s)
    worst = std::max(worst, eval::correlation(test::random_signal(320, s), test::random_signal(320, 100 + s)));
  EXPECT_LT(worst, 0.15);
}

TEST(Correlation, RejectsMismatchedAndZero) {
  EXPECT_THROW(eval::correlation(test::random_signal(10, 1), test::random_signal(11, 1)), ShapeError);
  ComplexSignal z;
  z.samples.assign(10, Complex{});
  EXPECT_THROW(eval::correlation(z, test::random_signal(10, 1)), ConfigError);
}

TEST(CorrelationSweep, NoisyCurveFollowsClosedForm) {
  const auto data = synth::synthesize_dataset(synthesis(), 5, 1);
  const models::NoisePredictor dm(small_predictor(), 1);
  const auto grid = eval::default_snr_grid();
  const auto r = eval::correlation_sweep(data, dm, schedule(), grid, 60, 10, 3);
  ASSERT_NO_THROW(eval::validate(r));
  for (std::size_t p = 0; p < grid.size(); ++p)
    EXPECT_NEAR(r.values_noisy_or_baseline[p], noisy_correlation_oracle(grid[p]), 0.01) << grid[p];
  EXPECT_GT(r.values_noisy_or_baseline.back(), 0.99);
  for (std::size_t p = 1; p < grid.size(); ++p)
    EXPECT_GT(r.values_noisy_or_baseline[p], r.values_noisy_or_baseline[p - 1]);
}

TEST(CorrelationSweep, ZeroPredictorOnlyRescales) {
  // With eps_hat == 0 every DDIM step is a positive rescaling, so correlation is unchanged.
  const auto data = synth::synthesize_dataset(synthesis(), 2, 2);
  const models::NoisePredictor dm(small_predictor(), 2);
  const auto r = eval::correlation_sweep(data, dm, schedule(), {0.0, 10.0, 30.0}, 12, 10, 4);
  for (std::size_t p = 0; p < 3; ++p) EXPECT_NEAR(r.values_denoised[p], r.values_noisy_or_baseline[p], 1e-9);
  EXPECT_EQ(r, eval::correlation_sweep(data, dm, schedule(), {0.0, 10.0, 30.0}, 12, 10, 4));
}

TEST(CorrelationSweep, RequiresCleanReferences) {
  auto data = synth::synthesize_dataset(synthesis(), 1, 3);
  data[2].clean_ref.reset();
  const models::NoisePredictor dm(small_predictor(), 1);
  EXPECT_THROW(eval::correlation_sweep(data, dm, schedule(), {0.0}, 3, 10, 1), ConfigError);
}

TEST(CorruptToSnr, HitsRequestedLevel) {
  const auto data = synth::synthesize_dataset(synthesis(), 50, 4);
  const auto low = eval::corrupt_to_snr(data, 5.0, 8);
  double noise = 0.0, signal = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    EXPECT_EQ(low[i].snr_db, 5.0);
    EXPECT_EQ(low[i].device_id, data[i].device_id);
    for (std::size_t n = 0; n < 320; ++n) {
      noise += std::norm(low[i].signal[n] - (*data[i].clean_ref)[n]);
      signal += std::norm((*data[i].clean_ref)[n]);
    }
  }
  EXPECT_NEAR(10.0 * std::log10(signal / noise), 5.0, 0.1);
}

TEST(Scoring, UntrainedClassifierIsChance) {
  const auto data = synth::synthesize_dataset(synthesis(), 100, 5);
  models::ClassifierConfig cfg;
  cfg.temporal_depth = 1;
  cfg.class_depth = 1;
  const models::Classifier clf(cfg, 1);
  const auto cm = eval::score(data, clf, training::Preprocessor{});
  EXPECT_EQ(cm.total(), 600);
  EXPECT_NEAR(cm.accuracy(), 1.0 / 6.0, 0.03);
}

TEST(Scoring, ConfusionMatrixCounts) {
  eval::ConfusionMatrix cm(3);
  cm.add(0, 0);
  cm.add(1, 2);
  cm.add(2, 2);
  cm.add(2, 2);
  EXPECT_EQ(cm.total(), 4);
  EXPECT_EQ(cm.correct(), 3);
  EXPECT_DOUBLE_EQ(cm.accuracy(), 0.75);
  EXPECT_EQ(cm.counts[1][2], 1);
  EXPECT_THROW(cm.add(3, 0), ConfigError);
}

TEST(AccuracySweep, ShapesAndDeterminism) {
  const auto data = synth::synthesize_dataset(synthesis(), 4, 6);
  models::ClassifierConfig cfg;
  cfg.temporal_depth = 1;
  cfg.class_depth = 1;
  const models::Classifier a(cfg, 1), b(cfg, 2);
  const models::NoisePredictor dm(small_predictor(), 1);
  const auto s = eval::accuracy_sweep(data, a, b, dm, schedule(), {0.0, 20.0}, 10, 9);
  EXPECT_EQ(s.result.values_denoised.size(), 2u);
  EXPECT_EQ(s.denoised_confusion.size(), 2u);
  EXPECT_EQ(s.baseline_confusion[1].total(), 24);
  EXPECT_NO_THROW(eval::validate(s.result));
  EXPECT_EQ(s.result, eval::accuracy_sweep(data, a, b, dm, schedule(), {0.0, 20.0}, 10, 9).result);
}

TEST(Figures, WaveformExport) {
  test::TempDir dir("waveforms");
  const auto data = synth::synthesize_dataset(synthesis(), 1, 7);
  const models::NoisePredictor dm(small_predictor(), 1);
  const auto w = eval::export_waveform_figures(data[0], dm, schedule(), 10, dir.path(), 5.0, 3);
  EXPECT_EQ(w.original.size(), 320u);
  EXPECT_EQ(w.noised.size(), 320u);
  EXPECT_EQ(w.denoised.size(), 320u);
  EXPECT_NEAR(mean_power(w.original), 1.0, 1e-12);
  EXPECT_NEAR(mean_power(w.denoised), 1.0, 1e-12);
  EXPECT_NE(w.noised, w.original);
  ASSERT_EQ(w.files.size(), 4u);
  for (const auto& f : w.files) EXPECT_GT(std::filesystem::file_size(f), 0u);
  const auto rows = lines_of(dir / "waveforms.csv");
  EXPECT_EQ(rows.size(), 321u);
  EXPECT_EQ(rows.front(), "n,original_i,original_q,noised_i,noised_q,denoised_i,denoised_q");
  std::ifstream svg(dir / "waveform_original.svg");
  const std::string body{std::istreambuf_iterator<char>(svg), {}};
  EXPECT_NE(body.find("<svg"), std::string::npos);
  EXPECT_NE(body.find("</svg>"), std::string::npos);
}

TEST(Figures, ScheduleCurveDecreases) {
  test::TempDir dir("schedule");
  const auto files = eval::export_schedule_figure(schedule(), dir.path());
  ASSERT_EQ(files.size(), 2u);
  const auto rows = lines_of(dir / "schedule.csv");
  ASSERT_EQ(rows.size(), 1002u);
  double prev = 1e9;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    std::stringstream ss(rows[i]);
    std::string t, ab, snr;
    std::getline(ss, t, ',');
    std::getline(ss, ab, ',');
    std::getline(ss, snr, ',');
    const double v = std::stod(snr);
    EXPECT_LT(v, prev) << rows[i];
    prev = v;
  }
}
