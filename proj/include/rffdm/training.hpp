#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rffdm/diffusion.hpp"
#include "rffdm/models.hpp"
#include "rffdm/signal.hpp"

namespace rffdm::training {

struct TrainConfig {
  double learning_rate = 1e-4;
  int batch_size = 32;
  int lr_halving_patience = 20;
  int early_stop_patience = 30;
  int max_epochs = 300;
  std::string optimizer_id = "adamax";
  std::uint64_t seed = 0;
  double validation_fraction = 0.1;

  bool operator==(const TrainConfig&) const = default;
};

void validate(const TrainConfig& cfg);

struct AugmentationPolicy {
  double snr_low_db = 0.0;
  double snr_high_db = 40.0;
  /// One target SNR shared by the whole batch (otherwise one per record).
  bool per_batch = true;

  bool operator==(const AugmentationPolicy&) const = default;
};

void validate(const AugmentationPolicy& policy);

enum class SnrSource { kTruth, kEstimate };

SnrSource parse_snr_source(const std::string& s);
std::string to_string(SnrSource s);

/// Validation-plateau bookkeeping: halve the learning rate once the loss has not improved for
/// `halving_patience` consecutive epochs (and again every further `halving_patience`), stop after
/// `stop_patience`.
class PlateauTracker {
 public:
  PlateauTracker(int halving_patience, int stop_patience);

  struct Decision {
    bool improved = false;
    bool halve_lr = false;
    bool stop = false;
  };

  Decision observe(double val_loss);
  int epochs_since_best() const noexcept { return since_best_; }
  double best() const noexcept { return best_; }

 private:
  int halving_patience_, stop_patience_;
  int since_best_ = 0;
  double best_;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double learning_rate = 0.0;
  /// Classifier runs only; NaN otherwise.
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// Seeded shuffle of record indices, validation gets round(fraction * n) (at least one).
Split split_records(std::size_t n, double validation_fraction, std::uint64_t seed);

struct PredictorTrainResult {
  models::NoisePredictor model;
  std::vector<EpochRecord> history;
  int best_epoch = 0;
};

/// Diffusion objective: per record draw t ~ U[1, T] and eps, form x_t in closed form, regress eps.
/// Uses each record's clean reference when present, else the signal itself.
PredictorTrainResult train_noise_predictor(const std::vector<LabeledObservation>& dataset,
                                           const diffusion::NoiseSchedule& sched,
                                           const models::NoisePredictorConfig& model_cfg, const TrainConfig& cfg,
                                           const EpochCallback& on_epoch = {});

/// Mean per-sample noise-regression loss of `model` over `signals` with seeded (t, eps) draws.
double evaluate_noise_loss(const models::NoisePredictor& model, const std::vector<ComplexSignal>& signals,
                           const diffusion::NoiseSchedule& sched, std::uint64_t seed);

/// Lowers every record to a drawn target SNR (never raising it). Records' snr_db is updated.
std::vector<LabeledObservation> noise_augment_batch(std::vector<LabeledObservation> batch,
                                                    const AugmentationPolicy& policy, std::uint64_t seed);

/// Additional per-sample noise variance that takes a record at snr_init_db to snr_target_db.
double augmentation_noise_variance(double total_power, double snr_init_db, double snr_target_db);

/// Classifier front end: unit-power normalization, then (when t_prime > 0) SNR-mapped denoising.
struct Preprocessor {
  const models::NoisePredictor* predictor = nullptr;
  const diffusion::NoiseSchedule* schedule = nullptr;
  int t_prime = 0;
  SnrSource snr_source = SnrSource::kTruth;

  bool denoises() const noexcept { return t_prime > 0; }
  ComplexSignal operator()(const LabeledObservation& obs, diffusion::DenoiseTrace* trace = nullptr) const;
};

struct ClassifierTrainResult {
  models::Classifier model;
  std::vector<EpochRecord> history;
  int best_epoch = 0;
};

/// Augment -> (denoise) -> classify -> cross-entropy. The predictor is read-only throughout.
ClassifierTrainResult train_classifier(const std::vector<LabeledObservation>& dataset,
                                       const Preprocessor& front_end, const AugmentationPolicy& policy,
                                       const models::ClassifierConfig& model_cfg, const TrainConfig& cfg,
                                       const EpochCallback& on_epoch = {});

ClassifierTrainResult train_classifier(const std::vector<LabeledObservation>& dataset,
                                       const models::NoisePredictor& predictor,
                                       const diffusion::NoiseSchedule& sched, const AugmentationPolicy& policy,
                                       int t_prime, const models::ClassifierConfig& model_cfg,
                                       const TrainConfig& cfg, SnrSource snr_source = SnrSource::kTruth,
                                       const EpochCallback& on_epoch = {});

/// Same loop with the denoising stage removed.
ClassifierTrainResult train_baseline_classifier(const std::vector<LabeledObservation>& dataset,
                                                const AugmentationPolicy& policy,
                                                const models::ClassifierConfig& model_cfg, const TrainConfig& cfg,
                                                const EpochCallback& on_epoch = {});

}  // namespace rffdm::training
