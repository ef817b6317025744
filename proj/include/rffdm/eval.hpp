#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rffdm/diffusion.hpp"
#include "rffdm/models.hpp"
#include "rffdm/signal.hpp"
#include "rffdm/training.hpp"

namespace rffdm::eval {

/// |<a, b>| / (||a|| ||b||) at zero lag. Invariant to complex scaling of either argument.
double correlation(const ComplexSignal& a, const ComplexSignal& b);

struct SweepResult {
  std::vector<double> snr_points_db;
  std::string metric_name;
  /// Denoised pipeline.
  std::vector<double> values_denoised;
  /// Noisy input (correlation sweeps) or the augmentation-only baseline (accuracy sweeps).
  std::vector<double> values_noisy_or_baseline;
  int num_trials = 0;
  std::uint64_t seed = 0;

  bool operator==(const SweepResult&) const = default;
};

/// Checks list lengths and that values lie in [0, 1].
void validate(const SweepResult& r);

/// 0, 5, ..., 40 dB.
std::vector<double> default_snr_grid();

/// Trial i corrupts the clean reference of record (i mod n) to each SNR point, then compares
/// both the noisy and the denoised signal against that reference.
SweepResult correlation_sweep(const std::vector<LabeledObservation>& dataset,
                              const models::NoisePredictor& predictor, const diffusion::NoiseSchedule& sched,
                              const std::vector<double>& snr_points_db, int trials, int t_prime,
                              std::uint64_t seed);

struct ConfusionMatrix {
  int num_classes = 0;
  /// Row = true class, column = predicted class.
  std::vector<std::vector<int>> counts;

  explicit ConfusionMatrix(int n = 0)
      : num_classes(n), counts(static_cast<std::size_t>(n), std::vector<int>(static_cast<std::size_t>(n), 0)) {}
  void add(int truth, int predicted);
  int total() const;
  int correct() const;
  double accuracy() const;
};

/// Lowers every test record to `snr_db` (noise added on top of the capture noise) with seeded draws.
std::vector<LabeledObservation> corrupt_to_snr(const std::vector<LabeledObservation>& records, double snr_db,
                                               std::uint64_t seed);

/// Scores one classifier behind one front end on a record set.
ConfusionMatrix score(const std::vector<LabeledObservation>& records, const models::Classifier& classifier,
                      const training::Preprocessor& front_end);

struct AccuracySweep {
  SweepResult result;
  std::vector<ConfusionMatrix> denoised_confusion;
  std::vector<ConfusionMatrix> baseline_confusion;
};

/// Corrupts the whole test set at each SNR point and scores the denoised and baseline pipelines.
AccuracySweep accuracy_sweep(const std::vector<LabeledObservation>& test_set, const models::Classifier& classifier,
                             const models::Classifier& baseline_classifier, const models::NoisePredictor& predictor,
                             const diffusion::NoiseSchedule& sched, const std::vector<double>& snr_points_db,
                             int t_prime, std::uint64_t seed,
                             training::SnrSource snr_source = training::SnrSource::kTruth);

struct WaveformExport {
  ComplexSignal original;
  ComplexSignal noised;
  ComplexSignal denoised;
  double noised_correlation = 0.0;
  double denoised_correlation = 0.0;
  std::vector<std::filesystem::path> files;
};

/// Original capture, the same capture lowered to `noised_snr_db`, and its denoised version:
/// three SVG plots plus waveforms.csv in out_dir.
WaveformExport export_waveform_figures(const LabeledObservation& example, const models::NoisePredictor& predictor,
                                       const diffusion::NoiseSchedule& sched, int t_prime,
                                       const std::filesystem::path& out_dir, double noised_snr_db = 5.0,
                                       std::uint64_t seed = 5);

/// gamma_map vs t as schedule.svg plus schedule.csv in out_dir.
std::vector<std::filesystem::path> export_schedule_figure(const diffusion::NoiseSchedule& sched,
                                                          const std::filesystem::path& out_dir);

}  // namespace rffdm::eval
