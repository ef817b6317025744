#include "rffdm/eval.hpp"

#include <cmath>
#include <cstdio>

#include "rffdm/errors.hpp"
#include "rffdm/io.hpp"
#include "rffdm/plot.hpp"
#include "rffdm/random.hpp"
#include "rffdm/synth.hpp"

namespace rffdm::eval {

double correlation(const ComplexSignal& a, const ComplexSignal& b) {
  if (a.size() != b.size()) throw ShapeError("correlation: signals differ in length");
  Complex inner{};
  for (std::size_t n = 0; n < a.size(); ++n) inner += a[n] * std::conj(b[n]);
  const double na = l2_norm(a.samples);
  const double nb = l2_norm(b.samples);
  if (na == 0.0 || nb == 0.0) throw ConfigError("correlation: zero-norm input");
  return std::min(1.0, std::abs(inner) / (na * nb));
}

void validate(const SweepResult& r) {
  const auto n = r.snr_points_db.size();
  if (r.values_denoised.size() != n || r.values_noisy_or_baseline.size() != n)
    throw ShapeError("sweep value lists must match the SNR grid length");
  for (const auto* v : {&r.values_denoised, &r.values_noisy_or_baseline})
    for (double x : *v)
      if (!(x >= 0.0 && x <= 1.0)) throw ConfigError("sweep values must lie in [0, 1]");
}

std::vector<double> default_snr_grid() { return {0, 5, 10, 15, 20, 25, 30, 35, 40}; }

namespace {

ComplexSignal denoise_observation(const ComplexSignal& noisy, double snr_db, const models::NoisePredictor& predictor,
                                  const diffusion::NoiseSchedule& sched, int t_prime) {
  LabeledObservation obs;
  obs.signal = noisy;
  obs.snr_db = snr_db;
  const training::Preprocessor front{&predictor, &sched, t_prime, training::SnrSource::kTruth};
  return front(obs);
}

}  // namespace

SweepResult correlation_sweep(const std::vector<LabeledObservation>& dataset,
                              const models::NoisePredictor& predictor, const diffusion::NoiseSchedule& sched,
                              const std::vector<double>& snr_points_db, int trials, int t_prime,
                              std::uint64_t seed) {
  if (dataset.empty()) throw ConfigError("correlation sweep needs a nonempty dataset");
  if (trials < 1) throw ConfigError("correlation sweep needs at least one trial");
  for (const auto& r : dataset)
    if (!r.clean_ref) throw ConfigError("correlation sweep needs clean references in every record");

  SweepResult out;
  out.snr_points_db = snr_points_db;
  out.metric_name = "correlation";
  out.num_trials = trials;
  out.seed = seed;
  for (std::size_t p = 0; p < snr_points_db.size(); ++p) {
    const double snr = snr_points_db[p];
    double noisy_sum = 0.0;
    double denoised_sum = 0.0;
    for (int i = 0; i < trials; ++i) {
      const auto& clean = *dataset[static_cast<std::size_t>(i) % dataset.size()].clean_ref;
      // Shared across SNR points so the noisy curve is comparable point to point.
      const auto noisy = synth::add_awgn(clean, snr, mix_seed(seed, static_cast<std::uint64_t>(i))).noisy;
      noisy_sum += correlation(noisy, clean);
      denoised_sum += correlation(denoise_observation(noisy, snr, predictor, sched, t_prime), clean);
    }
    out.values_noisy_or_baseline.push_back(noisy_sum / trials);
    out.values_denoised.push_back(denoised_sum / trials);
  }
  return out;
}

void ConfusionMatrix::add(int truth, int predicted) {
  if (truth < 0 || truth >= num_classes || predicted < 0 || predicted >= num_classes)
    throw ConfigError("confusion matrix index out of range");
  ++counts[static_cast<std::size_t>(truth)][static_cast<std::size_t>(predicted)];
}

int ConfusionMatrix::total() const {
  int n = 0;
  for (const auto& row : counts)
    for (int c : row) n += c;
  return n;
}

int ConfusionMatrix::correct() const {
  int n = 0;
  for (int i = 0; i < num_classes; ++i) n += counts[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)];
  return n;
}

double ConfusionMatrix::accuracy() const {
  const int n = total();
  return n == 0 ? 0.0 : static_cast<double>(correct()) / n;
}

std::vector<LabeledObservation> corrupt_to_snr(const std::vector<LabeledObservation>& records, double snr_db,
                                               std::uint64_t seed) {
  std::vector<LabeledObservation> out = records;
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto& r = out[i];
    const double target = std::min(snr_db, r.snr_db);
    const double var = training::augmentation_noise_variance(mean_power(r.signal), r.snr_db, target);
    if (var > 0.0) r.signal = synth::add_noise_variance(r.signal, var, mix_seed(seed, i)).noisy;
    r.snr_db = target;
  }
  return out;
}

ConfusionMatrix score(const std::vector<LabeledObservation>& records, const models::Classifier& classifier,
                      const training::Preprocessor& front_end) {
  ConfusionMatrix cm(classifier.config().num_classes);
  for (const auto& r : records) cm.add(r.device_id, classifier.predict(front_end(r)));
  return cm;
}

AccuracySweep accuracy_sweep(const std::vector<LabeledObservation>& test_set, const models::Classifier& classifier,
                             const models::Classifier& baseline_classifier, const models::NoisePredictor& predictor,
                             const diffusion::NoiseSchedule& sched, const std::vector<double>& snr_points_db,
                             int t_prime, std::uint64_t seed, training::SnrSource snr_source) {
  if (test_set.empty()) throw ConfigError("accuracy sweep needs a nonempty test set");
  if (classifier.config().num_classes != baseline_classifier.config().num_classes)
    throw ConfigError("classifiers disagree on the number of classes");
  const training::Preprocessor denoised{&predictor, &sched, t_prime, snr_source};
  const training::Preprocessor plain{};

  AccuracySweep out;
  out.result.snr_points_db = snr_points_db;
  out.result.metric_name = "accuracy";
  out.result.num_trials = static_cast<int>(test_set.size());
  out.result.seed = seed;
  for (std::size_t p = 0; p < snr_points_db.size(); ++p) {
    const auto corrupted = corrupt_to_snr(test_set, snr_points_db[p], mix_seed(seed, p));
    out.denoised_confusion.push_back(score(corrupted, classifier, denoised));
    out.baseline_confusion.push_back(score(corrupted, baseline_classifier, plain));
    out.result.values_denoised.push_back(out.denoised_confusion.back().accuracy());
    out.result.values_noisy_or_baseline.push_back(out.baseline_confusion.back().accuracy());
  }
  return out;
}

namespace {

plot::Series real_part(const std::string& label, const ComplexSignal& s) {
  plot::Series out{label, {}, {}};
  for (std::size_t n = 0; n < s.size(); ++n) {
    out.x.push_back(static_cast<double>(n));
    out.y.push_back(s[n].real());
  }
  return out;
}

plot::Series imag_part(const std::string& label, const ComplexSignal& s) {
  plot::Series out = real_part(label, s);
  for (std::size_t n = 0; n < s.size(); ++n) out.y[n] = s[n].imag();
  return out;
}

}  // namespace

WaveformExport export_waveform_figures(const LabeledObservation& example, const models::NoisePredictor& predictor,
                                       const diffusion::NoiseSchedule& sched, int t_prime,
                                       const std::filesystem::path& out_dir, double noised_snr_db,
                                       std::uint64_t seed) {
  if (!example.clean_ref) throw ConfigError("waveform export needs a record with a clean reference");
  WaveformExport w;
  w.original = normalize_power(example.signal);
  const auto lowered = corrupt_to_snr({example}, noised_snr_db, seed).front();
  w.noised = normalize_power(lowered.signal);
  const training::Preprocessor front{&predictor, &sched, t_prime, training::SnrSource::kTruth};
  w.denoised = front(lowered);
  w.noised_correlation = correlation(w.noised, w.original);
  w.denoised_correlation = correlation(w.denoised, w.original);

  char title[128];
  std::snprintf(title, sizeof title, "Original signal (%.0f dB)", example.snr_db);
  const std::vector<std::pair<std::string, const ComplexSignal*>> panels{
      {"waveform_original.svg", &w.original}, {"waveform_noised.svg", &w.noised}, {"waveform_denoised.svg", &w.denoised}};
  std::vector<std::string> titles{title};
  std::snprintf(title, sizeof title, "Noised signal (%.0f dB)", noised_snr_db);
  titles.emplace_back(title);
  std::snprintf(title, sizeof title, "Denoised signal from %.0f dB", noised_snr_db);
  titles.emplace_back(title);
  for (std::size_t k = 0; k < panels.size(); ++k) {
    const auto path = out_dir / panels[k].first;
    plot::write_line_plot(path, {titles[k], "sample index", "amplitude"},
                          {real_part("I", *panels[k].second), imag_part("Q", *panels[k].second)});
    w.files.push_back(path);
  }

  std::string csv = "n,original_i,original_q,noised_i,noised_q,denoised_i,denoised_q\n";
  char row[256];
  for (std::size_t n = 0; n < w.original.size(); ++n) {
    std::snprintf(row, sizeof row, "%zu,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g\n", n, w.original[n].real(),
                  w.original[n].imag(), w.noised[n].real(), w.noised[n].imag(), w.denoised[n].real(),
                  w.denoised[n].imag());
    csv += row;
  }
  const auto csv_path = out_dir / "waveforms.csv";
  io::write_file(csv_path, csv);
  w.files.push_back(csv_path);
  return w;
}

std::vector<std::filesystem::path> export_schedule_figure(const diffusion::NoiseSchedule& sched,
                                                          const std::filesystem::path& out_dir) {
  plot::Series curve{"SNR", {}, {}};
  std::string csv = "t,alpha_bar,snr_db\n";
  char row[128];
  for (int t = 0; t <= sched.num_steps(); ++t) {
    curve.x.push_back(t);
    curve.y.push_back(sched.snr_db(t));
    std::snprintf(row, sizeof row, "%d,%.10g,%.6g\n", t, sched.alpha_bar(t), sched.snr_db(t));
    csv += row;
  }
  const auto svg_path = out_dir / "schedule.svg";
  const auto csv_path = out_dir / "schedule.csv";
  plot::write_line_plot(svg_path, {"Noise schedule SNR", "diffusion step t", "SNR (dB)"}, {curve});
  io::write_file(csv_path, csv);
  return {svg_path, csv_path};
}

}  // namespace rffdm::eval
