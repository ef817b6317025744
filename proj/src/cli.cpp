#include "rffdm/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <ostream>

#include <json.hpp>

#include "rffdm/config.hpp"
#include "rffdm/diffusion.hpp"
#include "rffdm/errors.hpp"
#include "rffdm/eval.hpp"
#include "rffdm/io.hpp"
#include "rffdm/plot.hpp"
#include "rffdm/synth.hpp"
#include "rffdm/training.hpp"

namespace rffdm::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class UsageError : public Error {
 public:
  using Error::Error;
};

class Logger {
 public:
  Logger(CommandOutcome& outcome, std::ostream* live) : outcome_(outcome), live_(live) {}

  void event(json e) {
    std::string line = e.dump();
    if (live_) *live_ << line << '\n' << std::flush;
    outcome_.log.push_back(std::move(line));
  }

 private:
  CommandOutcome& outcome_;
  std::ostream* live_;
};

// Runs `body` with the declared outputs; on failure removes whatever was written and maps the
// exception to an exit code.
template <typename F>
CommandOutcome guarded(const char* command, std::vector<fs::path> declared, std::ostream* live, F&& body) {
  CommandOutcome outcome;
  Logger log(outcome, live);
  auto fail = [&](int code, const std::string& kind, const std::string& what) {
    for (const auto& p : declared) {
      std::error_code ec;
      fs::remove(p, ec);
    }
    outcome.exit_code = code;
    outcome.artifacts.clear();
    log.event({{"event", "error"}, {"command", command}, {"kind", kind}, {"message", what}});
  };
  try {
    body(log);
    outcome.artifacts = std::move(declared);
    outcome.exit_code = kOk;
    json files = json::array();
    for (const auto& p : outcome.artifacts) files.push_back(p.string());
    log.event({{"event", "done"}, {"command", command}, {"artifacts", files}});
  } catch (const UsageError& e) {
    fail(kUsage, "usage", e.what());
  } catch (const ParseError& e) {
    fail(kDataError, "parse", e.what());
  } catch (const ChecksumError& e) {
    fail(kDataError, "checksum", e.what());
  } catch (const ConfigError& e) {
    fail(kDataError, "config", e.what());
  } catch (const ShapeError& e) {
    fail(kDataError, "shape", e.what());
  } catch (const IoError& e) {
    fail(kDataError, "io", e.what());
  } catch (const std::exception& e) {
    fail(kRuntimeFailure, "runtime", e.what());
  }
  return outcome;
}

void require_file(const fs::path& p, const char* what) {
  if (!fs::is_regular_file(p)) throw IoError(std::string(what) + " not found: " + p.string());
}

diffusion::NoiseSchedule schedule_of(const config::ScheduleConfig& s) {
  return diffusion::build_schedule(s.num_steps, s.beta_min, s.beta_max);
}

diffusion::NoiseSchedule schedule_of(const io::ScheduleSnapshot& s) {
  return diffusion::build_schedule(s.num_steps, s.beta_min, s.beta_max);
}

json epoch_event(const char* command, const training::EpochRecord& e) {
  return {{"event", "epoch"},          {"command", command},         {"epoch", e.epoch},
          {"train_loss", e.train_loss}, {"val_loss", e.val_loss},     {"learning_rate", e.learning_rate},
          {"train_accuracy", e.train_accuracy}, {"val_accuracy", e.val_accuracy}};
}

void check_dataset_len(const io::Dataset& ds, int expected, const char* who) {
  if (static_cast<int>(ds.header.signal_len) != expected)
    throw ShapeError(std::string(who) + " expects signal length " + std::to_string(expected) +
                     " but the dataset holds " + std::to_string(ds.header.signal_len));
}

fs::path sibling(const fs::path& p, const std::string& suffix) {
  fs::path out = p;
  out += suffix;
  return out;
}

}  // namespace

fs::path history_path_for(const fs::path& checkpoint) { return sibling(checkpoint, ".history.csv"); }
fs::path manifest_path_for(const fs::path& checkpoint) { return sibling(checkpoint, ".pipeline.json"); }

CommandOutcome cmd_init_config(const InitConfigArgs& args, std::ostream* live) {
  return guarded("init-config", {args.out}, live, [&](Logger&) {
    config::save_experiment_config(config::default_experiment_config(), args.out);
  });
}

CommandOutcome cmd_synth(const SynthArgs& args, std::ostream* live) {
  return guarded("synth", {args.out}, live, [&](Logger& log) {
    if (args.packets_per_device && *args.packets_per_device < 1)
      throw UsageError("--packets-per-device must be >= 1");
    require_file(args.config, "config");
    const auto cfg = config::load_experiment_config(args.config);
    const int ppd = args.packets_per_device.value_or(cfg.packets_per_device);
    const std::uint64_t seed = args.seed.value_or(cfg.synthesis_seed);
    const auto records = synth::synthesize_dataset(cfg.synthesis, ppd, seed);
    io::DatasetMeta meta;
    meta.signal_len = static_cast<std::uint32_t>(synth::kPreambleLength);
    meta.sample_rate_hz = cfg.synthesis.sample_rate_hz;
    meta.num_classes = static_cast<std::uint32_t>(cfg.synthesis.devices.size());
    io::write_dataset(records, args.out, meta);
    log.event({{"event", "synthesized"},
               {"records", records.size()},
               {"devices", cfg.synthesis.devices.size()},
               {"packets_per_device", ppd},
               {"seed", seed}});
  });
}

CommandOutcome cmd_train_dm(const TrainDmArgs& args, std::ostream* live) {
  return guarded("train-dm", {args.out, history_path_for(args.out)}, live, [&](Logger& log) {
    require_file(args.config, "config");
    require_file(args.dataset, "dataset");
    const auto cfg = config::load_experiment_config(args.config);
    const auto ds = io::read_dataset(args.dataset);
    check_dataset_len(ds, cfg.predictor.signal_len, "noise predictor");
    if (ds.records.size() < 2) throw ConfigError("train-dm needs at least two records");
    const auto sched = schedule_of(cfg.schedule);
    auto result = training::train_noise_predictor(ds.records, sched, cfg.predictor, cfg.dm_training,
                                                  [&](const auto& e) { log.event(epoch_event("train-dm", e)); });
    io::save_predictor(result.model,
                       {cfg.schedule.num_steps, cfg.schedule.beta_min, cfg.schedule.beta_max, cfg.schedule.t_prime},
                       args.out);
    io::write_history_csv(result.history, history_path_for(args.out));
    log.event({{"event", "trained"}, {"model", "noise_predictor"}, {"best_epoch", result.best_epoch}});
  });
}

CommandOutcome cmd_train_clf(const TrainClfArgs& args, std::ostream* live) {
  const std::vector<fs::path> declared{args.out, history_path_for(args.out), manifest_path_for(args.out)};
  return guarded("train-clf", declared, live, [&](Logger& log) {
    if (!args.baseline && !args.dm_checkpoint) throw UsageError("--dm is required unless --baseline is given");
    require_file(args.config, "config");
    require_file(args.dataset, "dataset");
    const auto cfg = config::load_experiment_config(args.config);
    const auto ds = io::read_dataset(args.dataset);
    check_dataset_len(ds, cfg.classifier.signal_len, "classifier");
    if (static_cast<int>(ds.header.num_classes) != cfg.classifier.num_classes)
      throw ConfigError("dataset has " + std::to_string(ds.header.num_classes) + " classes, config expects " +
                        std::to_string(cfg.classifier.num_classes));
    auto on_epoch = [&](const auto& e) { log.event(epoch_event("train-clf", e)); };

    io::PipelineManifest manifest;
    manifest.snr_source = cfg.snr_source;
    std::optional<training::ClassifierTrainResult> result;
    if (args.baseline) {
      manifest.denoise = false;
      manifest.t_prime = 0;
      result = training::train_baseline_classifier(ds.records, cfg.augmentation, cfg.classifier,
                                                   cfg.classifier_training, on_epoch);
    } else {
      require_file(*args.dm_checkpoint, "noise predictor checkpoint");
      const auto dm = io::load_predictor(*args.dm_checkpoint);
      check_dataset_len(ds, dm.model.config().signal_len, "noise predictor checkpoint");
      const auto sched = schedule_of(dm.schedule);
      manifest.denoise = true;
      manifest.t_prime = cfg.schedule.t_prime;
      result = training::train_classifier(ds.records, dm.model, sched, cfg.augmentation, manifest.t_prime,
                                          cfg.classifier, cfg.classifier_training, cfg.snr_source, on_epoch);
    }
    io::save_classifier(result->model, manifest, args.out);
    io::write_history_csv(result->history, history_path_for(args.out));
    const json m = {{"denoise", manifest.denoise},
                    {"t_prime", manifest.t_prime},
                    {"snr_source", training::to_string(manifest.snr_source)},
                    {"stages", manifest.denoise ? json::array({"normalize", "augment", "denoise", "classify"})
                                                : json::array({"normalize", "augment", "classify"})}};
    io::write_file(manifest_path_for(args.out), m.dump(2) + "\n");
    log.event({{"event", "trained"},
               {"model", args.baseline ? "baseline_classifier" : "classifier"},
               {"best_epoch", result->best_epoch}});
  });
}

CommandOutcome cmd_denoise(const DenoiseArgs& args, std::ostream* live) {
  return guarded("denoise", {args.out}, live, [&](Logger& log) {
    training::SnrSource source;
    try {
      source = training::parse_snr_source(args.snr_source);
    } catch (const ConfigError& e) {
      throw UsageError(e.what());
    }
    if (args.t_prime && *args.t_prime < 1) throw UsageError("--t-prime must be >= 1");
    require_file(args.dm_checkpoint, "noise predictor checkpoint");
    require_file(args.in, "dataset");
    const auto dm = io::load_predictor(args.dm_checkpoint);
    const auto ds = io::read_dataset(args.in);
    check_dataset_len(ds, dm.model.config().signal_len, "noise predictor checkpoint");
    const auto sched = schedule_of(dm.schedule);
    const training::Preprocessor front{&dm.model, &sched, args.t_prime.value_or(dm.schedule.t_prime), source};

    std::vector<LabeledObservation> out;
    out.reserve(ds.records.size());
    int clamped = 0;
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
      diffusion::DenoiseTrace trace;
      LabeledObservation rec = ds.records[i];
      rec.signal = front(rec, &trace);
      if (trace.clamped) {
        ++clamped;
        log.event({{"event", "t_prime_clamped"},
                   {"record", i},
                   {"requested", front.t_prime},
                   {"t_star", trace.plan.t_star},
                   {"used", trace.plan.t_prime}});
      }
      out.push_back(std::move(rec));
    }
    io::DatasetMeta meta{ds.header.signal_len, ds.header.sample_rate_hz, ds.header.num_classes};
    io::write_dataset(out, args.out, meta);
    log.event({{"event", "denoised"}, {"records", out.size()}, {"clamped", clamped}, {"t_prime", front.t_prime},
               {"snr_source", training::to_string(source)}});
  });
}

CommandOutcome cmd_eval(const EvalArgs& args, std::ostream* live) {
  const fs::path& d = args.out_dir;
  const std::vector<fs::path> declared{d / "schedule.svg",          d / "schedule.csv",
                                       d / "waveform_original.svg", d / "waveform_noised.svg",
                                       d / "waveform_denoised.svg", d / "waveforms.csv",
                                       d / "correlation_sweep.csv", d / "correlation_sweep.svg",
                                       d / "accuracy_sweep.csv",    d / "accuracy_sweep.svg",
                                       d / "summary.json"};
  return guarded("eval", declared, live, [&](Logger& log) {
    if (args.trials && *args.trials < 1) throw UsageError("--trials must be >= 1");
    require_file(args.config, "config");
    require_file(args.dm_checkpoint, "noise predictor checkpoint");
    require_file(args.classifier, "classifier checkpoint");
    require_file(args.baseline, "baseline checkpoint");
    require_file(args.test_dataset, "test dataset");
    const auto cfg = config::load_experiment_config(args.config);
    const auto dm = io::load_predictor(args.dm_checkpoint);
    const auto clf = io::load_classifier(args.classifier);
    const auto base = io::load_classifier(args.baseline);
    if (!clf.pipeline.denoise) throw ConfigError("--classifier was trained without the denoising stage");
    if (base.pipeline.denoise) throw ConfigError("--baseline was trained with the denoising stage");
    const auto test = io::read_dataset(args.test_dataset);
    check_dataset_len(test, dm.model.config().signal_len, "noise predictor checkpoint");
    check_dataset_len(test, clf.model.config().signal_len, "classifier checkpoint");
    if (test.records.empty()) throw ConfigError("test dataset is empty");
    for (const auto& r : test.records)
      if (!r.clean_ref) throw ConfigError("test dataset records need clean references for the correlation sweep");

    const auto sched = schedule_of(dm.schedule);
    const int t_prime = clf.pipeline.t_prime;
    const auto& grid = cfg.eval.snr_points_db;
    fs::create_directories(d);

    eval::export_schedule_figure(sched, d);
    const auto wf = eval::export_waveform_figures(test.records.front(), dm.model, sched, t_prime, d);
    log.event({{"event", "waveforms"},
               {"noised_correlation", wf.noised_correlation},
               {"denoised_correlation", wf.denoised_correlation}});

    const int trials = args.trials.value_or(cfg.eval.correlation_trials);
    const auto corr = eval::correlation_sweep(test.records, dm.model, sched, grid, trials, t_prime, cfg.eval.seed);
    io::write_sweep_csv(corr, d / "correlation_sweep.csv");
    plot::write_line_plot(d / "correlation_sweep.svg", {"Correlation with clean capture", "SNR (dB)", "correlation"},
                          {{"denoised", corr.snr_points_db, corr.values_denoised},
                           {"noisy", corr.snr_points_db, corr.values_noisy_or_baseline}});

    const auto acc = eval::accuracy_sweep(test.records, clf.model, base.model, dm.model, sched, grid, t_prime,
                                          cfg.eval.seed, clf.pipeline.snr_source);
    io::write_sweep_csv(acc.result, d / "accuracy_sweep.csv");
    plot::write_line_plot(d / "accuracy_sweep.svg", {"Identification accuracy", "SNR (dB)", "accuracy"},
                          {{"denoised", acc.result.snr_points_db, acc.result.values_denoised},
                           {"baseline", acc.result.snr_points_db, acc.result.values_noisy_or_baseline}});

    json summary = {{"t_prime", t_prime}, {"trials", trials}, {"records", test.records.size()}};
    json points = json::array();
    std::optional<double> gap_at_zero;
    double max_high_gap = 0.0;
    bool any_high = false;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double gap = acc.result.values_denoised[i] - acc.result.values_noisy_or_baseline[i];
      points.push_back({{"snr_db", grid[i]},
                        {"correlation_denoised", corr.values_denoised[i]},
                        {"correlation_noisy", corr.values_noisy_or_baseline[i]},
                        {"accuracy_denoised", acc.result.values_denoised[i]},
                        {"accuracy_baseline", acc.result.values_noisy_or_baseline[i]}});
      if (grid[i] == 0.0) gap_at_zero = gap;
      if (grid[i] >= 30.0) {
        any_high = true;
        max_high_gap = std::max(max_high_gap, std::abs(gap));
      }
    }
    summary["points"] = points;
    json criterion = {{"name", "accuracy_gap_0db"}};
    if (gap_at_zero) {
      criterion["gap_points"] = 100.0 * *gap_at_zero;
      criterion["pass"] = 100.0 * *gap_at_zero >= 10.0;
    } else {
      criterion["gap_points"] = nullptr;
      criterion["pass"] = false;
      criterion["note"] = "0 dB is not on the evaluation grid";
    }
    if (any_high) criterion["max_gap_at_or_above_30db_points"] = 100.0 * max_high_gap;
    summary["criterion"] = criterion;
    io::write_file(d / "summary.json", summary.dump(2) + "\n");
    log.event({{"event", "criterion"}, {"detail", criterion}});
  });
}


int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Diffusion-model denoising for RF fingerprint identification"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "rffdm 0.1.0");

  InitConfigArgs init;
  auto* c_init = app.add_subcommand("init-config", "Write the default experiment config");
  c_init->add_option("--out", init.out, "Output JSON path")->required();

  SynthArgs syn;
  auto* c_syn = app.add_subcommand("synth", "Synthesize a labeled preamble dataset");
  c_syn->add_option("--config", syn.config, "Experiment config JSON")->required();
  c_syn->add_option("--out", syn.out, "Output dataset path")->required();
  c_syn->add_option("--packets-per-device", syn.packets_per_device, "Override packets per device (>= 1)");
  c_syn->add_option("--seed", syn.seed, "Override the synthesis seed");

  TrainDmArgs tdm;
  auto* c_tdm = app.add_subcommand("train-dm", "Train the diffusion noise predictor");
  c_tdm->add_option("--config", tdm.config, "Experiment config JSON")->required();
  c_tdm->add_option("--dataset", tdm.dataset, "Training dataset")->required();
  c_tdm->add_option("--out", tdm.out, "Output checkpoint (history CSV is written alongside)")->required();

  TrainClfArgs tcl;
  auto* c_tcl = app.add_subcommand("train-clf", "Train the classifier behind the denoising front end");
  c_tcl->add_option("--config", tcl.config, "Experiment config JSON")->required();
  c_tcl->add_option("--dataset", tcl.dataset, "Training dataset")->required();
  c_tcl->add_option("--dm", tcl.dm_checkpoint, "Noise predictor checkpoint (not needed with --baseline)");
  c_tcl->add_option("--out", tcl.out, "Output checkpoint (history CSV and pipeline manifest alongside)")->required();
  c_tcl->add_flag("--baseline", tcl.baseline, "Skip the denoising stage (augmentation-only baseline)");

  DenoiseArgs den;
  auto* c_den = app.add_subcommand("denoise", "Denoise every record of a dataset");
  c_den->add_option("--dm", den.dm_checkpoint, "Noise predictor checkpoint")->required();
  c_den->add_option("--in", den.in, "Input dataset")->required();
  c_den->add_option("--out", den.out, "Output dataset")->required();
  c_den->add_option("--snr-source", den.snr_source, "Where the SNR comes from")
      ->check(CLI::IsMember({"truth", "estimate"}))
      ->capture_default_str();
  c_den->add_option("--t-prime", den.t_prime, "Number of DDIM steps (defaults to the checkpoint's value)");

  EvalArgs ev;
  auto* c_ev = app.add_subcommand("eval", "Produce figures, sweeps and the accuracy-gap summary");
  c_ev->add_option("--config", ev.config, "Experiment config JSON")->required();
  c_ev->add_option("--dm", ev.dm_checkpoint, "Noise predictor checkpoint")->required();
  c_ev->add_option("--classifier", ev.classifier, "Classifier trained behind the denoiser")->required();
  c_ev->add_option("--baseline", ev.baseline, "Baseline classifier")->required();
  c_ev->add_option("--test", ev.test_dataset, "Test dataset with clean references")->required();
  c_ev->add_option("--out-dir", ev.out_dir, "Output directory")->required();
  c_ev->add_option("--trials", ev.trials, "Override correlation trials per SNR point");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << app.version() << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    if (auto* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front())
      err << sub->help();
    else
      err << app.help();
    return kUsage;
  }

  CommandOutcome outcome;
  if (c_init->parsed()) outcome = cmd_init_config(init, &out);
  else if (c_syn->parsed()) outcome = cmd_synth(syn, &out);
  else if (c_tdm->parsed()) outcome = cmd_train_dm(tdm, &out);
  else if (c_tcl->parsed()) outcome = cmd_train_clf(tcl, &out);
  else if (c_den->parsed()) outcome = cmd_denoise(den, &out);
  else if (c_ev->parsed()) outcome = cmd_eval(ev, &out);
  if (outcome.exit_code != kOk && !outcome.log.empty()) err << outcome.log.back() << '\n';
  return outcome.exit_code;
}

}  // namespace rffdm::cli
