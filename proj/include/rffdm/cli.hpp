#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace rffdm::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kRuntimeFailure = 3 };

struct CommandOutcome {
  int exit_code = kOk;
  std::vector<std::filesystem::path> artifacts;
  /// One JSON object per line.
  std::vector<std::string> log;
};

struct SynthArgs {
  std::filesystem::path config;
  std::filesystem::path out;
  std::optional<int> packets_per_device;
  std::optional<std::uint64_t> seed;
};

struct TrainDmArgs {
  std::filesystem::path config;
  std::filesystem::path dataset;
  std::filesystem::path out;
};

struct TrainClfArgs {
  std::filesystem::path config;
  std::filesystem::path dataset;
  std::optional<std::filesystem::path> dm_checkpoint;
  std::filesystem::path out;
  bool baseline = false;
};

struct DenoiseArgs {
  std::filesystem::path dm_checkpoint;
  std::filesystem::path in;
  std::filesystem::path out;
  std::string snr_source = "truth";
  std::optional<int> t_prime;
};

struct EvalArgs {
  std::filesystem::path config;
  std::filesystem::path dm_checkpoint;
  std::filesystem::path classifier;
  std::filesystem::path baseline;
  std::filesystem::path test_dataset;
  std::filesystem::path out_dir;
  std::optional<int> trials;
};

struct InitConfigArgs {
  std::filesystem::path out;
};

/// Sidecar paths written next to a checkpoint.
std::filesystem::path history_path_for(const std::filesystem::path& checkpoint);
std::filesystem::path manifest_path_for(const std::filesystem::path& checkpoint);

/// Each command also echoes its log lines to `live` as they happen.
CommandOutcome cmd_init_config(const InitConfigArgs& args, std::ostream* live = nullptr);
CommandOutcome cmd_synth(const SynthArgs& args, std::ostream* live = nullptr);
CommandOutcome cmd_train_dm(const TrainDmArgs& args, std::ostream* live = nullptr);
CommandOutcome cmd_train_clf(const TrainClfArgs& args, std::ostream* live = nullptr);
CommandOutcome cmd_denoise(const DenoiseArgs& args, std::ostream* live = nullptr);
CommandOutcome cmd_eval(const EvalArgs& args, std::ostream* live = nullptr);

/// Parses argv, dispatches, prints the log to `out` and errors to `err`. Returns the exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rffdm::cli
