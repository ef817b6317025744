#include "rffdm/config.hpp"

#include <limits>
#include <set>

#include "rffdm/errors.hpp"
#include "rffdm/io.hpp"

namespace rffdm::config {

using nlohmann::json;

namespace {

// Strict view of one JSON object: typed getters plus an unknown-key check.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError("config: " + where_ + " must be an object");
  }

  const json& raw(const std::string& key) {
    auto it = j_.find(key);
    if (it == j_.end()) throw ConfigError("config: missing key " + path(key));
    seen_.insert(key);
    return *it;
  }

  double number(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_number()) throw ConfigError("config: " + path(key) + " must be a number");
    return v.get<double>();
  }

  int integer(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_number_integer()) throw ConfigError("config: " + path(key) + " must be an integer");
    const auto x = v.get<long long>();
    if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
      throw ConfigError("config: " + path(key) + " out of range");
    return static_cast<int>(x);
  }

  std::uint64_t unsigned_integer(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
      throw ConfigError("config: " + path(key) + " must be a non-negative integer");
    return v.get<std::uint64_t>();
  }

  bool boolean(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_boolean()) throw ConfigError("config: " + path(key) + " must be true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_string()) throw ConfigError("config: " + path(key) + " must be a string");
    return v.get<std::string>();
  }

  const json& array(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_array()) throw ConfigError("config: " + path(key) + " must be an array");
    return v;
  }

  std::string path(const std::string& key) const { return where_ + "." + key; }

  void finish() const {
    for (const auto& [key, _] : j_.items())
      if (!seen_.count(key)) throw ConfigError("config: unknown key " + path(key));
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

json complex_json(Complex c) { return json::array({c.real(), c.imag()}); }

Complex complex_from(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw ConfigError("config: " + where + " must be a [re, im] pair");
  return {j[0].get<double>(), j[1].get<double>()};
}

json to_json(const training::TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"lr_halving_patience", c.lr_halving_patience},
          {"early_stop_patience", c.early_stop_patience},
          {"max_epochs", c.max_epochs},
          {"optimizer", c.optimizer_id},
          {"seed", c.seed},
          {"validation_fraction", c.validation_fraction}};
}

training::TrainConfig train_from(const json& j, const std::string& where) {
  ObjectReader r(j, where);
  training::TrainConfig c;
  c.learning_rate = r.number("learning_rate");
  c.batch_size = r.integer("batch_size");
  c.lr_halving_patience = r.integer("lr_halving_patience");
  c.early_stop_patience = r.integer("early_stop_patience");
  c.max_epochs = r.integer("max_epochs");
  c.optimizer_id = r.string("optimizer");
  c.seed = r.unsigned_integer("seed");
  c.validation_fraction = r.number("validation_fraction");
  r.finish();
  try {
    training::validate(c);
  } catch (const ConfigError& e) {
    throw ConfigError("config: " + where + ": " + e.what());
  }
  return c;
}

json to_json(const synth::DeviceProfile& p) {
  return {{"device_id", p.device_id},
          {"cfo_hz", p.cfo_hz},
          {"iq_gain_mismatch", p.iq_gain_mismatch},
          {"iq_phase_mismatch_rad", p.iq_phase_mismatch_rad},
          {"dc_offset", complex_json(p.dc_offset)},
          {"pa_coeffs", json::array({complex_json(p.pa_coeffs[0]), complex_json(p.pa_coeffs[1]),
                                     complex_json(p.pa_coeffs[2])})}};
}

synth::DeviceProfile device_from(const json& j, const std::string& where) {
  ObjectReader r(j, where);
  synth::DeviceProfile p;
  p.device_id = r.integer("device_id");
  p.cfo_hz = r.number("cfo_hz");
  p.iq_gain_mismatch = r.number("iq_gain_mismatch");
  p.iq_phase_mismatch_rad = r.number("iq_phase_mismatch_rad");
  p.dc_offset = complex_from(r.raw("dc_offset"), r.path("dc_offset"));
  const json& pa = r.array("pa_coeffs");
  if (pa.size() != 3) throw ConfigError("config: " + r.path("pa_coeffs") + " must hold [a1, a3, a5]");
  for (std::size_t i = 0; i < 3; ++i)
    p.pa_coeffs[i] = complex_from(pa[i], r.path("pa_coeffs") + "[" + std::to_string(i) + "]");
  r.finish();
  try {
    synth::validate(p);
  } catch (const ConfigError& e) {
    throw ConfigError("config: " + where + ": " + e.what());
  }
  return p;
}

template <typename F>
void rethrow_at(const std::string& where, F&& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    throw ConfigError("config: " + where + ": " + e.what());
  }
}

}  // namespace

json to_json(const models::NoisePredictorConfig& c) {
  return {{"signal_len", c.signal_len}, {"model_dim", c.model_dim},
          {"num_blocks", c.num_blocks}, {"num_heads", c.num_heads},
          {"step_embed_dim", c.step_embed_dim}, {"patch_len", c.patch_len},
          {"ffn_dim", c.ffn_dim},       {"num_steps", c.num_steps},
          {"diagnostic_linear", c.diagnostic_linear}};
}

models::NoisePredictorConfig predictor_config_from_json(const json& j, const std::string& where) {
  ObjectReader r(j, where);
  models::NoisePredictorConfig c;
  c.signal_len = r.integer("signal_len");
  c.model_dim = r.integer("model_dim");
  c.num_blocks = r.integer("num_blocks");
  c.num_heads = r.integer("num_heads");
  c.step_embed_dim = r.integer("step_embed_dim");
  c.patch_len = r.integer("patch_len");
  c.ffn_dim = r.integer("ffn_dim");
  c.num_steps = r.integer("num_steps");
  c.diagnostic_linear = r.boolean("diagnostic_linear");
  r.finish();
  rethrow_at(where, [&] { models::validate(c); });
  return c;
}

json to_json(const models::ClassifierConfig& c) {
  return {{"num_classes", c.num_classes},         {"signal_len", c.signal_len},
          {"temporal_depth", c.temporal_depth},   {"class_depth", c.class_depth},
          {"num_heads", c.num_heads},             {"mlp_hidden", c.mlp_hidden},
          {"temporal_ffn_dim", c.temporal_ffn_dim}, {"class_ffn_dim", c.class_ffn_dim}};
}

models::ClassifierConfig classifier_config_from_json(const json& j, const std::string& where) {
  ObjectReader r(j, where);
  models::ClassifierConfig c;
  c.num_classes = r.integer("num_classes");
  c.signal_len = r.integer("signal_len");
  c.temporal_depth = r.integer("temporal_depth");
  c.class_depth = r.integer("class_depth");
  c.num_heads = r.integer("num_heads");
  c.mlp_hidden = r.integer("mlp_hidden");
  c.temporal_ffn_dim = r.integer("temporal_ffn_dim");
  c.class_ffn_dim = r.integer("class_ffn_dim");
  r.finish();
  rethrow_at(where, [&] { models::validate(c); });
  return c;
}

ExperimentConfig default_experiment_config() {
  ExperimentConfig c;
  c.synthesis.devices = synth::make_device_population(6, kDefaultPopulationSeed);
  c.synthesis.channel.taps = {Complex{1.0, 0.0}, Complex{0.2, -0.1}, Complex{0.05, 0.04}};
  return c;
}

void validate(const ExperimentConfig& c) {
  rethrow_at("schedule", [&] {
    diffusion::NoiseSchedule(c.schedule.num_steps, c.schedule.beta_min, c.schedule.beta_max);
    if (c.schedule.t_prime < 0) throw ConfigError("t_prime must be >= 0");
  });
  rethrow_at("predictor", [&] { models::validate(c.predictor); });
  rethrow_at("classifier", [&] { models::validate(c.classifier); });
  rethrow_at("dm_training", [&] { training::validate(c.dm_training); });
  rethrow_at("classifier_training", [&] { training::validate(c.classifier_training); });
  rethrow_at("augmentation", [&] { training::validate(c.augmentation); });
  rethrow_at("synthesis", [&] { synth::validate(c.synthesis); });
  if (c.predictor.num_steps < c.schedule.num_steps)
    throw ConfigError("config: predictor.num_steps must cover schedule.num_steps");
  if (c.predictor.signal_len != c.classifier.signal_len)
    throw ConfigError("config: predictor and classifier signal_len differ");
  if (c.classifier.num_classes != static_cast<int>(c.synthesis.devices.size()))
    throw ConfigError("config: classifier.num_classes must equal the number of devices");
  if (c.packets_per_device < 1) throw ConfigError("config: packets_per_device must be >= 1");
  if (c.eval.snr_points_db.empty()) throw ConfigError("config: eval.snr_points_db must be nonempty");
  if (c.eval.correlation_trials < 1) throw ConfigError("config: eval.correlation_trials must be >= 1");
}

json to_json(const ExperimentConfig& c) {
  json devices = json::array();
  for (const auto& d : c.synthesis.devices) devices.push_back(to_json(d));
  json taps = json::array();
  for (const auto& t : c.synthesis.channel.taps) taps.push_back(complex_json(t));
  return {
      {"schedule",
       {{"num_steps", c.schedule.num_steps},
        {"beta_min", c.schedule.beta_min},
        {"beta_max", c.schedule.beta_max},
        {"t_prime", c.schedule.t_prime}}},
      {"predictor", to_json(c.predictor)},
      {"classifier", to_json(c.classifier)},
      {"dm_training", to_json(c.dm_training)},
      {"classifier_training", to_json(c.classifier_training)},
      {"augmentation",
       {{"snr_low_db", c.augmentation.snr_low_db},
        {"snr_high_db", c.augmentation.snr_high_db},
        {"per_batch", c.augmentation.per_batch}}},
      {"snr_source", training::to_string(c.snr_source)},
      {"synthesis",
       {{"sample_rate_hz", c.synthesis.sample_rate_hz},
        {"capture_snr_db", c.synthesis.capture_snr_db},
        {"cfo_jitter_hz", c.synthesis.cfo_jitter_hz},
        {"packets_per_device", c.packets_per_device},
        {"seed", c.synthesis_seed},
        {"devices", devices},
        {"channel_taps", taps}}},
      {"eval",
       {{"snr_points_db", c.eval.snr_points_db},
        {"correlation_trials", c.eval.correlation_trials},
        {"seed", c.eval.seed}}},
  };
}

ExperimentConfig experiment_from_json(const json& j) {
  ObjectReader root(j, "$");
  ExperimentConfig c;
  {
    ObjectReader r(root.raw("schedule"), "$.schedule");
    c.schedule.num_steps = r.integer("num_steps");
    c.schedule.beta_min = r.number("beta_min");
    c.schedule.beta_max = r.number("beta_max");
    c.schedule.t_prime = r.integer("t_prime");
    r.finish();
  }
  c.predictor = predictor_config_from_json(root.raw("predictor"), "$.predictor");
  c.classifier = classifier_config_from_json(root.raw("classifier"), "$.classifier");
  c.dm_training = train_from(root.raw("dm_training"), "$.dm_training");
  c.classifier_training = train_from(root.raw("classifier_training"), "$.classifier_training");
  {
    ObjectReader r(root.raw("augmentation"), "$.augmentation");
    c.augmentation.snr_low_db = r.number("snr_low_db");
    c.augmentation.snr_high_db = r.number("snr_high_db");
    c.augmentation.per_batch = r.boolean("per_batch");
    r.finish();
  }
  c.snr_source = training::parse_snr_source(root.string("snr_source"));
  {
    ObjectReader r(root.raw("synthesis"), "$.synthesis");
    c.synthesis.sample_rate_hz = r.number("sample_rate_hz");
    c.synthesis.capture_snr_db = r.number("capture_snr_db");
    c.synthesis.cfo_jitter_hz = r.number("cfo_jitter_hz");
    c.packets_per_device = r.integer("packets_per_device");
    c.synthesis_seed = r.unsigned_integer("seed");
    const json& devices = r.array("devices");
    for (std::size_t i = 0; i < devices.size(); ++i)
      c.synthesis.devices.push_back(device_from(devices[i], "$.synthesis.devices[" + std::to_string(i) + "]"));
    const json& taps = r.array("channel_taps");
    c.synthesis.channel.taps.clear();
    for (std::size_t i = 0; i < taps.size(); ++i)
      c.synthesis.channel.taps.push_back(complex_from(taps[i], "$.synthesis.channel_taps[" + std::to_string(i) + "]"));
    r.finish();
  }
  {
    ObjectReader r(root.raw("eval"), "$.eval");
    const json& pts = r.array("snr_points_db");
    c.eval.snr_points_db.clear();
    for (const auto& p : pts) {
      if (!p.is_number()) throw ConfigError("config: $.eval.snr_points_db entries must be numbers");
      c.eval.snr_points_db.push_back(p.get<double>());
    }
    c.eval.correlation_trials = r.integer("correlation_trials");
    c.eval.seed = r.unsigned_integer("seed");
    r.finish();
  }
  root.finish();
  validate(c);
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  const std::string text = io::read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + path.string() + " is not valid JSON: " + e.what());
  }
  return experiment_from_json(j);
}

void save_experiment_config(const ExperimentConfig& cfg, const std::filesystem::path& path) {
  io::write_file(path, to_json(cfg).dump(2) + "\n");
}

}  // namespace rffdm::config
