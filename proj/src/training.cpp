#include "rffdm/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rffdm/errors.hpp"
#include "rffdm/nn/optim.hpp"
#include "rffdm/random.hpp"
#include "rffdm/synth.hpp"

namespace rffdm::training {

void validate(const TrainConfig& c) {
  if (!(c.learning_rate > 0.0) || !std::isfinite(c.learning_rate)) throw ConfigError("learning_rate must be > 0");
  if (c.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (c.lr_halving_patience < 1 || c.early_stop_patience < 1) throw ConfigError("patience values must be >= 1");
  if (c.max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (!(c.validation_fraction > 0.0 && c.validation_fraction < 1.0))
    throw ConfigError("validation_fraction must lie in (0, 1)");
  nn::make_optimizer(c.optimizer_id);
}

void validate(const AugmentationPolicy& p) {
  if (!std::isfinite(p.snr_low_db) || !std::isfinite(p.snr_high_db) || !(p.snr_low_db < p.snr_high_db))
    throw ConfigError("augmentation needs finite snr_low_db < snr_high_db");
}

SnrSource parse_snr_source(const std::string& s) {
  if (s == "truth") return SnrSource::kTruth;
  if (s == "estimate") return SnrSource::kEstimate;
  throw ConfigError("snr source must be 'truth' or 'estimate', got '" + s + "'");
}

std::string to_string(SnrSource s) { return s == SnrSource::kTruth ? "truth" : "estimate"; }

PlateauTracker::PlateauTracker(int halving_patience, int stop_patience)
    : halving_patience_(halving_patience),
      stop_patience_(stop_patience),
      best_(std::numeric_limits<double>::infinity()) {
  if (halving_patience < 1 || stop_patience < 1) throw ConfigError("patience values must be >= 1");
}

PlateauTracker::Decision PlateauTracker::observe(double val_loss) {
  Decision d;
  if (val_loss < best_) {
    best_ = val_loss;
    since_best_ = 0;
    d.improved = true;
    return d;
  }
  ++since_best_;
  d.halve_lr = since_best_ % halving_patience_ == 0;
  d.stop = since_best_ >= stop_patience_;
  return d;
}

Split split_records(std::size_t n, double validation_fraction, std::uint64_t seed) {
  if (n < 2) throw ConfigError("need at least two records to form train/validation splits");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(mix_seed(seed, 0x5b1));
  std::shuffle(idx.begin(), idx.end(), rng);
  auto n_val = static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(n)));
  n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
  Split s;
  s.validation.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
  s.train.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
  std::sort(s.validation.begin(), s.validation.end());
  return s;
}

namespace {

void check_uniform(const std::vector<LabeledObservation>& dataset) {
  if (dataset.empty()) throw ConfigError("dataset is empty");
  const auto len = dataset.front().signal.size();
  for (const auto& r : dataset) {
    if (r.signal.size() != len || (r.clean_ref && r.clean_ref->size() != len))
      throw ShapeError("dataset signals have non-uniform lengths");
  }
}

struct NoiseDraw {
  int t;
  std::vector<Complex> eps;
};

NoiseDraw draw_noise(std::size_t len, int num_steps, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_int_distribution<int> step(1, num_steps);
  NoiseDraw d;
  d.t = step(rng);
  d.eps = complex_gaussian(len, rng);
  return d;
}

double noise_loss_one(const models::NoisePredictor& model, const ComplexSignal& x0,
                      const diffusion::NoiseSchedule& sched, const NoiseDraw& draw, nn::Graph& g, bool backprop,
                      double weight) {
  const auto sample = diffusion::forward_diffuse(x0, draw.t, sched, draw.eps);
  nn::Var l = model.loss(g, sample.x_t, draw.t, sample.epsilon);
  const double value = g.value(l)(0, 0);
  if (backprop) {
    nn::Var scaled = nn::scale(g, l, weight);
    g.backward(scaled);
  }
  return value;
}

}  // namespace

double evaluate_noise_loss(const models::NoisePredictor& model, const std::vector<ComplexSignal>& signals,
                           const diffusion::NoiseSchedule& sched, std::uint64_t seed) {
  if (signals.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < signals.size(); ++i) {
    const auto draw = draw_noise(signals[i].size(), sched.num_steps(), mix_seed(seed, i));
    nn::Graph g(false);
    total += noise_loss_one(model, signals[i], sched, draw, g, false, 1.0);
  }
  return total / static_cast<double>(signals.size());
}

PredictorTrainResult train_noise_predictor(const std::vector<LabeledObservation>& dataset,
                                           const diffusion::NoiseSchedule& sched,
                                           const models::NoisePredictorConfig& model_cfg, const TrainConfig& cfg,
                                           const EpochCallback& on_epoch) {
  validate(cfg);
  check_uniform(dataset);
  if (static_cast<int>(dataset.front().signal.size()) != model_cfg.signal_len)
    throw ShapeError("dataset signal length differs from predictor signal_len");
  if (model_cfg.num_steps < sched.num_steps()) throw ConfigError("predictor num_steps below schedule T");

  std::vector<ComplexSignal> clean;
  clean.reserve(dataset.size());
  for (const auto& r : dataset) clean.push_back(r.clean_ref ? *r.clean_ref : r.signal);

  const Split split = split_records(clean.size(), cfg.validation_fraction, cfg.seed);
  std::vector<ComplexSignal> val;
  for (auto i : split.validation) val.push_back(clean[i]);
  const std::uint64_t val_seed = mix_seed(cfg.seed, 0x7a1);

  models::NoisePredictor model(model_cfg, mix_seed(cfg.seed, 0x1));
  auto optimizer = nn::make_optimizer(cfg.optimizer_id);
  PlateauTracker plateau(cfg.lr_halving_patience, cfg.early_stop_patience);
  double lr = cfg.learning_rate;
  nn::ParamStore best = model.params();
  int best_epoch = 0;
  std::vector<EpochRecord> history;

  std::vector<std::size_t> order = split.train;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    Rng shuffle_rng(mix_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double train_total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const double weight = 1.0 / static_cast<double>(end - start);
      model.params().zero_grad();
      for (std::size_t k = start; k < end; ++k) {
        const std::uint64_t s = mix_seed(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch)), k);
        const auto draw = draw_noise(clean[order[k]].size(), sched.num_steps(), s);
        nn::Graph g(true);
        train_total += noise_loss_one(model, clean[order[k]], sched, draw, g, true, weight);
      }
      optimizer->step(model.params(), lr);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = train_total / static_cast<double>(order.size());
    rec.val_loss = evaluate_noise_loss(model, val, sched, val_seed);
    rec.learning_rate = lr;
    rec.train_accuracy = rec.val_accuracy = std::numeric_limits<double>::quiet_NaN();
    history.push_back(rec);
    if (on_epoch) on_epoch(rec);

    const auto d = plateau.observe(rec.val_loss);
    if (d.improved) {
      best = model.params();
      best_epoch = epoch;
    }
    if (d.stop) break;
    if (d.halve_lr) lr *= 0.5;
  }
  return PredictorTrainResult{models::NoisePredictor(model_cfg, std::move(best)), std::move(history), best_epoch};
}

double augmentation_noise_variance(double total_power, double snr_init_db, double snr_target_db) {
  if (snr_target_db >= snr_init_db) return 0.0;
  const double init_ratio = std::isinf(snr_init_db) ? 0.0 : std::pow(10.0, -snr_init_db / 10.0);
  const double signal_power = total_power / (1.0 + init_ratio);
  const double existing = signal_power * init_ratio;
  const double target = signal_power * std::pow(10.0, -snr_target_db / 10.0);
  return std::max(0.0, target - existing);
}

std::vector<LabeledObservation> noise_augment_batch(std::vector<LabeledObservation> batch,
                                                    const AugmentationPolicy& policy, std::uint64_t seed) {
  validate(policy);
  Rng rng(seed);
  std::uniform_real_distribution<double> target(policy.snr_low_db, policy.snr_high_db);
  const double shared = target(rng);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto& r = batch[i];
    const double drawn = policy.per_batch ? shared : target(rng);
    const double tgt = std::min(drawn, r.snr_db);
    const double var = augmentation_noise_variance(mean_power(r.signal), r.snr_db, tgt);
    if (var > 0.0) r.signal = synth::add_noise_variance(r.signal, var, mix_seed(seed, i + 1)).noisy;
    r.snr_db = tgt;
  }
  return batch;
}

ComplexSignal Preprocessor::operator()(const LabeledObservation& obs, diffusion::DenoiseTrace* trace) const {
  ComplexSignal x = normalize_power(obs.signal);
  if (!denoises()) return x;
  if (!predictor || !schedule) throw ConfigError("denoising front end needs a predictor and a schedule");
  const double gamma = snr_source == SnrSource::kTruth ? obs.snr_db : synth::estimate_snr(obs.signal);
  const models::NoisePredictor& model = *predictor;
  return diffusion::denoise(
      x, gamma, t_prime, [&model](const ComplexSignal& xt, int t) { return model.predict(xt, t); }, *schedule,
      trace);
}

namespace {

struct ScoredBatch {
  double loss = 0.0;
  int correct = 0;
};

}  // namespace

ClassifierTrainResult train_classifier(const std::vector<LabeledObservation>& dataset, const Preprocessor& front_end,
                                       const AugmentationPolicy& policy, const models::ClassifierConfig& model_cfg,
                                       const TrainConfig& cfg, const EpochCallback& on_epoch) {
  validate(cfg);
  validate(policy);
  check_uniform(dataset);
  if (static_cast<int>(dataset.front().signal.size()) != model_cfg.signal_len)
    throw ShapeError("dataset signal length differs from classifier signal_len");
  if (front_end.denoises() && front_end.predictor &&
      front_end.predictor->config().signal_len != model_cfg.signal_len)
    throw ShapeError("noise predictor signal length differs from classifier signal_len");
  for (const auto& r : dataset)
    if (r.device_id < 0 || r.device_id >= model_cfg.num_classes)
      throw ConfigError("label " + std::to_string(r.device_id) + " outside [0, " +
                        std::to_string(model_cfg.num_classes) + ")");

  const Split split = split_records(dataset.size(), cfg.validation_fraction, cfg.seed);
  const auto bs = static_cast<std::size_t>(cfg.batch_size);

  // Validation inputs use fixed augmentation draws, so they are prepared once.
  std::vector<ComplexSignal> val_inputs;
  std::vector<int> val_labels;
  for (std::size_t start = 0; start < split.validation.size(); start += bs) {
    const std::size_t end = std::min(split.validation.size(), start + bs);
    std::vector<LabeledObservation> batch;
    for (std::size_t k = start; k < end; ++k) batch.push_back(dataset[split.validation[k]]);
    batch = noise_augment_batch(std::move(batch), policy, mix_seed(cfg.seed, 0xa11 + start));
    for (const auto& r : batch) {
      val_inputs.push_back(front_end(r));
      val_labels.push_back(r.device_id);
    }
  }

  models::Classifier model(model_cfg, mix_seed(cfg.seed, 0x2));
  auto optimizer = nn::make_optimizer(cfg.optimizer_id);
  PlateauTracker plateau(cfg.lr_halving_patience, cfg.early_stop_patience);
  double lr = cfg.learning_rate;
  nn::ParamStore best = model.params();
  int best_epoch = 0;
  std::vector<EpochRecord> history;

  std::vector<std::size_t> order = split.train;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    Rng shuffle_rng(mix_seed(cfg.seed, 2000 + static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    ScoredBatch train;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t end = std::min(order.size(), start + bs);
      std::vector<LabeledObservation> batch;
      for (std::size_t k = start; k < end; ++k) batch.push_back(dataset[order[k]]);
      batch = noise_augment_batch(std::move(batch), policy,
                                  mix_seed(mix_seed(cfg.seed, 3000 + static_cast<std::uint64_t>(epoch)), start));
      const double weight = 1.0 / static_cast<double>(batch.size());
      model.params().zero_grad();
      for (const auto& r : batch) {
        const ComplexSignal x = front_end(r);
        nn::Graph g(true);
        nn::Var logits = model.forward(g, x);
        nn::Var loss = nn::cross_entropy(g, logits, r.device_id);
        const nn::Mat& z = g.value(logits);
        Eigen::Index arg = 0;
        z.row(0).maxCoeff(&arg);
        train.correct += static_cast<int>(arg) == r.device_id;
        train.loss += g.value(loss)(0, 0);
        g.backward(nn::scale(g, loss, weight));
      }
      optimizer->step(model.params(), lr);
    }

    ScoredBatch val;
    for (std::size_t i = 0; i < val_inputs.size(); ++i) {
      nn::Graph g(false);
      nn::Var logits = model.forward(g, val_inputs[i]);
      val.loss += g.value(nn::cross_entropy(g, logits, val_labels[i]))(0, 0);
      Eigen::Index arg = 0;
      g.value(logits).row(0).maxCoeff(&arg);
      val.correct += static_cast<int>(arg) == val_labels[i];
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = train.loss / static_cast<double>(order.size());
    rec.val_loss = val.loss / static_cast<double>(val_inputs.size());
    rec.learning_rate = lr;
    rec.train_accuracy = static_cast<double>(train.correct) / static_cast<double>(order.size());
    rec.val_accuracy = static_cast<double>(val.correct) / static_cast<double>(val_inputs.size());
    history.push_back(rec);
    if (on_epoch) on_epoch(rec);

    const auto d = plateau.observe(rec.val_loss);
    if (d.improved) {
      best = model.params();
      best_epoch = epoch;
    }
    if (d.stop) break;
    if (d.halve_lr) lr *= 0.5;
  }
  return ClassifierTrainResult{models::Classifier(model_cfg, std::move(best)), std::move(history), best_epoch};
}

ClassifierTrainResult train_classifier(const std::vector<LabeledObservation>& dataset,
                                       const models::NoisePredictor& predictor,
                                       const diffusion::NoiseSchedule& sched, const AugmentationPolicy& policy,
                                       int t_prime, const models::ClassifierConfig& model_cfg,
                                       const TrainConfig& cfg, SnrSource snr_source, const EpochCallback& on_epoch) {
  if (t_prime < 0) throw PlanError("t' must be >= 0");
  Preprocessor front{&predictor, &sched, t_prime, snr_source};
  return train_classifier(dataset, front, policy, model_cfg, cfg, on_epoch);
}

ClassifierTrainResult train_baseline_classifier(const std::vector<LabeledObservation>& dataset,
                                                const AugmentationPolicy& policy,
                                                const models::ClassifierConfig& model_cfg, const TrainConfig& cfg,
                                                const EpochCallback& on_epoch) {
  return train_classifier(dataset, Preprocessor{}, policy, model_cfg, cfg, on_epoch);
}

}  // namespace rffdm::training
