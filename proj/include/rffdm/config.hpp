#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "rffdm/models.hpp"
#include "rffdm/synth.hpp"
#include "rffdm/training.hpp"

namespace rffdm::config {

struct ScheduleConfig {
  int num_steps = 1000;
  double beta_min = 1e-5;
  double beta_max = 1.5e-3;
  int t_prime = 10;

  bool operator==(const ScheduleConfig&) const = default;
};

struct EvalConfig {
  std::vector<double> snr_points_db{0, 5, 10, 15, 20, 25, 30, 35, 40};
  int correlation_trials = 500;
  std::uint64_t seed = 7;

  bool operator==(const EvalConfig&) const = default;
};

struct ExperimentConfig {
  ScheduleConfig schedule;
  models::NoisePredictorConfig predictor;
  models::ClassifierConfig classifier;
  training::TrainConfig dm_training;
  training::TrainConfig classifier_training;
  training::AugmentationPolicy augmentation;
  training::SnrSource snr_source = training::SnrSource::kTruth;
  synth::SynthesisConfig synthesis;
  int packets_per_device = 500;
  std::uint64_t synthesis_seed = 1;
  EvalConfig eval;

  bool operator==(const ExperimentConfig&) const = default;
};

/// Seed the default six-device population is drawn from.
inline constexpr std::uint64_t kDefaultPopulationSeed = 20240601;

/// Documented defaults: T = 1000, beta 1e-5..1.5e-3, Adamax at 1e-4 with batch 32 and
/// 20/30-epoch plateau rules, six devices with a two-tap stationary channel.
ExperimentConfig default_experiment_config();

/// Cross-field checks (lengths agree, predictor covers the schedule, class counts match devices).
void validate(const ExperimentConfig& cfg);

nlohmann::json to_json(const ExperimentConfig& cfg);
/// Strict: every key must be present and no unknown keys are allowed. Errors name the JSON path.
ExperimentConfig experiment_from_json(const nlohmann::json& j);

ExperimentConfig load_experiment_config(const std::filesystem::path& path);
void save_experiment_config(const ExperimentConfig& cfg, const std::filesystem::path& path);

nlohmann::json to_json(const models::NoisePredictorConfig& c);
models::NoisePredictorConfig predictor_config_from_json(const nlohmann::json& j, const std::string& where);
nlohmann::json to_json(const models::ClassifierConfig& c);
models::ClassifierConfig classifier_config_from_json(const nlohmann::json& j, const std::string& where);

}  // namespace rffdm::config
