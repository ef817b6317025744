#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rffdm/eval.hpp"
#include "rffdm/models.hpp"
#include "rffdm/nn/graph.hpp"
#include "rffdm/signal.hpp"
#include "rffdm/training.hpp"

namespace rffdm::io {

// Dataset file, little-endian throughout:
//   header  magic "RFFDSET1" | version u32 | num_records u64 | signal_len u32 | sample_rate f64 | num_classes u32
//   record  label u32 | snr_db f32 | signal (I,Q) f32 x 2*signal_len | has_clean u8 | [clean (I,Q) f32 x 2*signal_len]
inline constexpr char kDatasetMagic[8] = {'R', 'F', 'F', 'D', 'S', 'E', 'T', '1'};
inline constexpr std::uint32_t kDatasetVersion = 1;
inline constexpr std::size_t kDatasetHeaderSize = 8 + 4 + 8 + 4 + 8 + 4;

struct DatasetHeader {
  std::uint32_t version = kDatasetVersion;
  std::uint64_t num_records = 0;
  std::uint32_t signal_len = 0;
  double sample_rate_hz = 20e6;
  std::uint32_t num_classes = 0;
};

struct Dataset {
  DatasetHeader header;
  std::vector<LabeledObservation> records;
};

/// Layout values for an empty record list, or overrides for num_classes.
struct DatasetMeta {
  std::uint32_t signal_len = 320;
  double sample_rate_hz = 20e6;
  std::uint32_t num_classes = 0;
};

/// Throws ShapeError for mixed lengths, ConfigError for labels outside [0, num_classes).
/// Without `meta`, num_classes is max(label) + 1.
void write_dataset(const std::vector<LabeledObservation>& records, const std::filesystem::path& path,
                   std::optional<DatasetMeta> meta = std::nullopt);
std::string encode_dataset(const std::vector<LabeledObservation>& records,
                           std::optional<DatasetMeta> meta = std::nullopt);

/// Throws ParseError carrying the byte offset of the first violation.
Dataset read_dataset(const std::filesystem::path& path);
Dataset decode_dataset(const std::string& bytes);

// Checkpoint file:
//   magic "RFFCKPT1" | version u32 | kind u32 | config_len u32 | config JSON bytes | num_arrays u32 |
//   { name_len u32 | name | rows u32 | cols u32 | f64 x rows*cols } ... | crc32 u32 (over all preceding bytes)
inline constexpr char kCheckpointMagic[8] = {'R', 'F', 'F', 'C', 'K', 'P', 'T', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class CheckpointKind : std::uint32_t { kNoisePredictor = 1, kClassifier = 2 };

struct Checkpoint {
  CheckpointKind kind = CheckpointKind::kNoisePredictor;
  /// JSON snapshot of the model config plus kind-specific context (schedule or pipeline).
  std::string config_json;
  nn::ParamStore params;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Schedule context stored with a noise predictor.
struct ScheduleSnapshot {
  int num_steps = 1000;
  double beta_min = 1e-5;
  double beta_max = 1.5e-3;
  int t_prime = 10;
};

struct PredictorCheckpoint {
  models::NoisePredictor model;
  ScheduleSnapshot schedule;
};

/// Which front end a classifier was trained behind.
struct PipelineManifest {
  bool denoise = true;
  int t_prime = 10;
  training::SnrSource snr_source = training::SnrSource::kTruth;
};

struct ClassifierCheckpoint {
  models::Classifier model;
  PipelineManifest pipeline;
};

void save_predictor(const models::NoisePredictor& model, const ScheduleSnapshot& schedule,
                    const std::filesystem::path& path);
/// Throws ConfigError if the file holds a classifier.
PredictorCheckpoint load_predictor(const std::filesystem::path& path);

void save_classifier(const models::Classifier& model, const PipelineManifest& pipeline,
                     const std::filesystem::path& path);
/// Throws ConfigError if the file holds a noise predictor.
ClassifierCheckpoint load_classifier(const std::filesystem::path& path);

/// Header: snr_db,metric,value_a,value_b,trials,seed. value_a is the denoised pipeline.
void write_sweep_csv(const eval::SweepResult& result, const std::filesystem::path& path);
std::string format_sweep_csv(const eval::SweepResult& result);
eval::SweepResult read_sweep_csv(const std::filesystem::path& path);

/// Header: epoch,train_loss,val_loss,learning_rate,train_accuracy,val_accuracy.
void write_history_csv(const std::vector<training::EpochRecord>& history, const std::filesystem::path& path);

/// Whole-file helpers; throw IoError.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace rffdm::io
