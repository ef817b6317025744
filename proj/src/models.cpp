#include "rffdm/models.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "rffdm/errors.hpp"
#include "rffdm/nn/layers.hpp"
#include "rffdm/random.hpp"

namespace rffdm::models {

using nn::Graph;
using nn::Mat;
using nn::Var;

std::vector<double> sinusoidal_step_embedding(int t, int dim) {
  if (dim <= 0 || dim % 2 != 0) throw ConfigError("step embedding width must be positive and even");
  std::vector<double> out(static_cast<std::size_t>(dim));
  const int half = dim / 2;
  for (int k = 0; k < half; ++k) {
    const double freq = std::pow(10000.0, -2.0 * k / dim);
    out[static_cast<std::size_t>(2 * k)] = std::sin(t * freq);
    out[static_cast<std::size_t>(2 * k + 1)] = std::cos(t * freq);
  }
  return out;
}

namespace {

ComplexSignal rotate(const ComplexSignal& sig, double period, double sign) {
  if (sig.samples.empty()) throw ShapeError("phase modulation needs a nonempty signal");
  if (!(period > 0.0)) throw ConfigError("phase modulation period must be positive");
  ComplexSignal out = sig;
  for (std::size_t n = 0; n < sig.size(); ++n)
    out[n] = sig[n] * std::polar(1.0, sign * 2.0 * std::numbers::pi * static_cast<double>(n) / period);
  return out;
}

}  // namespace

ComplexSignal phase_modulation_encoding(const ComplexSignal& sig, double period) { return rotate(sig, period, 1.0); }

ComplexSignal phase_modulation_decoding(const ComplexSignal& sig, double period) {
  return rotate(sig, period, -1.0);
}

Mat patchify(const ComplexSignal& sig, int patch_len) {
  const auto n = static_cast<int>(sig.size());
  if (patch_len < 1 || n % patch_len != 0) throw ShapeError("signal length not divisible by patch length");
  Mat tokens(n / patch_len, 2 * patch_len);
  for (int i = 0; i < n; ++i) {
    tokens(i / patch_len, 2 * (i % patch_len)) = sig[static_cast<std::size_t>(i)].real();
    tokens(i / patch_len, 2 * (i % patch_len) + 1) = sig[static_cast<std::size_t>(i)].imag();
  }
  return tokens;
}

ComplexSignal unpatchify(const Mat& tokens, double sample_rate_hz) {
  const auto patch = static_cast<int>(tokens.cols() / 2);
  ComplexSignal out;
  out.sample_rate_hz = sample_rate_hz;
  out.samples.resize(static_cast<std::size_t>(tokens.rows() * patch));
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i) / patch;
    const auto c = static_cast<Eigen::Index>(i) % patch;
    out[i] = {tokens(r, 2 * c), tokens(r, 2 * c + 1)};
  }
  return out;
}

void check_same_layout(const nn::ParamStore& expected, const nn::ParamStore& actual) {
  if (expected.size() != actual.size())
    throw ShapeError("parameter count " + std::to_string(actual.size()) + " does not match model layout (" +
                     std::to_string(expected.size()) + ")");
  for (const auto& [name, p] : expected) {
    if (!actual.contains(name)) throw ShapeError("missing parameter '" + name + "'");
    const auto& q = actual.at(name);
    if (q.value.rows() != p.value.rows() || q.value.cols() != p.value.cols())
      throw ShapeError("parameter '" + name + "' has shape " + std::to_string(q.value.rows()) + "x" +
                       std::to_string(q.value.cols()) + ", expected " + std::to_string(p.value.rows()) + "x" +
                       std::to_string(p.value.cols()));
  }
  if (!actual.all_finite()) throw ShapeError("parameters contain non-finite values");
}

// ---------------------------------------------------------------------------
// Noise predictor

void validate(const NoisePredictorConfig& c) {
  if (c.signal_len < 1 || c.patch_len < 1 || c.signal_len % c.patch_len != 0)
    throw ConfigError("predictor: signal_len must be a positive multiple of patch_len");
  if (c.model_dim < 1 || c.num_heads < 1 || c.model_dim % c.num_heads != 0)
    throw ConfigError("predictor: model_dim must be divisible by num_heads");
  if (c.num_blocks < 1) throw ConfigError("predictor: num_blocks must be >= 1");
  if (c.step_embed_dim < 2 || c.step_embed_dim % 2 != 0) throw ConfigError("predictor: step_embed_dim must be even");
  if (c.ffn_dim < 1) throw ConfigError("predictor: ffn_dim must be >= 1");
  if (c.num_steps < 1) throw ConfigError("predictor: num_steps must be >= 1");
}

namespace {

void init_predictor(nn::ParamStore& ps, const NoisePredictorConfig& c, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x5eed));
  nn::init_linear(ps, "embed", 2 * c.patch_len, c.model_dim, rng);
  Mat pos(c.num_tokens(), c.model_dim);
  std::normal_distribution<double> small(0.0, 0.02);
  for (Eigen::Index i = 0; i < pos.size(); ++i) pos.data()[i] = small(rng);
  ps.add("embed.position", std::move(pos));
  nn::init_linear(ps, "step.fc1", c.step_embed_dim, c.step_embed_dim, rng);
  nn::init_linear(ps, "step.fc2", c.step_embed_dim, c.step_embed_dim, rng);
  for (int b = 0; b < c.num_blocks; ++b) {
    const std::string name = "block" + std::to_string(b);
    nn::init_layer_norm(ps, name + ".ln_self", c.model_dim);
    nn::init_attention(ps, name + ".self", c.model_dim, c.model_dim, c.model_dim, rng);
    nn::init_layer_norm(ps, name + ".ln_cross", c.model_dim);
    nn::init_attention(ps, name + ".cross", c.model_dim, c.step_embed_dim, c.model_dim, rng);
    nn::init_layer_norm(ps, name + ".ln_ffn", c.model_dim);
    nn::init_feed_forward(ps, name + ".ffn", c.model_dim, c.ffn_dim, rng);
  }
  nn::init_layer_norm(ps, "final_ln", c.model_dim);
  nn::init_linear(ps, "head", c.model_dim, 2 * c.patch_len, rng, /*zero_init=*/true);
}

}  // namespace

NoisePredictor::NoisePredictor(const NoisePredictorConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  validate(cfg_);
  init_predictor(params_, cfg_, seed);
}

NoisePredictor::NoisePredictor(const NoisePredictorConfig& cfg, nn::ParamStore params) : cfg_(cfg) {
  validate(cfg_);
  nn::ParamStore reference;
  init_predictor(reference, cfg_, 0);
  check_same_layout(reference, params);
  params_ = std::move(params);
}

void NoisePredictor::check_input(const ComplexSignal& x_t, int t) const {
  if (static_cast<int>(x_t.size()) != cfg_.signal_len)
    throw ShapeError("noise predictor expects " + std::to_string(cfg_.signal_len) + " samples, got " +
                     std::to_string(x_t.size()));
  if (t < 0 || t > cfg_.num_steps)
    throw ConfigError("diffusion step " + std::to_string(t) + " outside [0, " + std::to_string(cfg_.num_steps) + "]");
}

Var NoisePredictor::forward(Graph& g, const ComplexSignal& x_t, int t) const {
  check_input(x_t, t);
  const auto& c = cfg_;
  const bool lin = c.diagnostic_linear;
  const bool bias = !lin;
  const ComplexSignal rotated = phase_modulation_encoding(x_t, c.phase_period());

  Var h = nn::linear(g, params_, "embed", g.constant(patchify(rotated, c.patch_len)), bias);
  if (!lin) h = nn::add(g, h, g.param(params_.at("embed.position")));

  Var step{};
  if (!lin) {
    const auto feats = sinusoidal_step_embedding(t, c.step_embed_dim);
    Mat row = Eigen::Map<const Mat>(feats.data(), 1, c.step_embed_dim);
    step = nn::linear(g, params_, "step.fc1", g.constant(std::move(row)));
    step = nn::linear(g, params_, "step.fc2", nn::gelu(g, step));
  }

  for (int b = 0; b < c.num_blocks; ++b) {
    const std::string name = "block" + std::to_string(b);
    if (lin) {
      const std::string f = name + ".ffn";
      h = nn::add(g, h, nn::linear(g, params_, f + ".fc2", nn::linear(g, params_, f + ".fc1", h, false), false));
      continue;
    }
    Var n1 = nn::layer_norm(g, params_, name + ".ln_self", h);
    h = nn::add(g, h, nn::attention(g, params_, name + ".self", n1, n1, c.num_heads));
    Var n2 = nn::layer_norm(g, params_, name + ".ln_cross", h);
    h = nn::add(g, h, nn::attention(g, params_, name + ".cross", n2, step, c.num_heads));
    Var n3 = nn::layer_norm(g, params_, name + ".ln_ffn", h);
    h = nn::add(g, h, nn::feed_forward(g, params_, name + ".ffn", n3));
  }
  if (!lin) h = nn::layer_norm(g, params_, "final_ln", h);
  return nn::linear(g, params_, "head", h, bias);
}

ComplexSignal NoisePredictor::predict(const ComplexSignal& x_t, int t) const {
  Graph g(/*record=*/false);
  Var out = forward(g, x_t, t);
  return unpatchify(g.value(out), x_t.sample_rate_hz);
}

Var NoisePredictor::loss(Graph& g, const ComplexSignal& x_t, int t, const ComplexSignal& epsilon) const {
  if (epsilon.size() != x_t.size()) throw ShapeError("noise target length differs from input");
  Var out = forward(g, x_t, t);
  return nn::squared_error(g, out, patchify(epsilon, cfg_.patch_len), static_cast<double>(cfg_.signal_len));
}

ComplexSignal predict_noise(const NoisePredictor& model, const ComplexSignal& x_t, int t) {
  return model.predict(x_t, t);
}

// ---------------------------------------------------------------------------
// Classifier

int ClassifierConfig::class_heads() const {
  for (int h = std::max(1, num_heads); h > 1; --h)
    if ((num_classes + 1) % h == 0) return h;
  return 1;
}

void validate(const ClassifierConfig& c) {
  if (c.num_classes < 2) throw ConfigError("classifier: num_classes must be >= 2");
  if (c.signal_len < 1) throw ConfigError("classifier: signal_len must be >= 1");
  if (c.temporal_depth < 0 || c.class_depth < 0) throw ConfigError("classifier: depths must be >= 0");
  if (c.num_heads < 1 || c.signal_len % c.num_heads != 0)
    throw ConfigError("classifier: signal_len must be divisible by num_heads");
  if (c.mlp_hidden < 1 || c.temporal_ffn_dim < 1 || c.class_ffn_dim < 1)
    throw ConfigError("classifier: hidden widths must be >= 1");
}

namespace {

void init_classifier(nn::ParamStore& ps, const ClassifierConfig& c, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0xc1a55));
  const int width = c.num_classes + 1;
  nn::init_linear(ps, "input_proj", 2 * c.signal_len, c.signal_len, rng);
  Mat tokens(c.num_classes, c.signal_len);
  std::normal_distribution<double> n(0.0, 1.0);
  for (Eigen::Index i = 0; i < tokens.size(); ++i) tokens.data()[i] = n(rng);
  ps.add("class_tokens", std::move(tokens));
  for (int d = 0; d < c.temporal_depth; ++d)
    nn::init_encoder_block(ps, "temporal" + std::to_string(d), c.signal_len, c.temporal_ffn_dim, rng);
  for (int d = 0; d < c.class_depth; ++d)
    nn::init_encoder_block(ps, "class" + std::to_string(d), width, c.class_ffn_dim, rng);
  nn::init_linear(ps, "mlp.fc1", c.signal_len * width, c.mlp_hidden, rng);
  nn::init_linear(ps, "mlp.fc2", c.mlp_hidden, c.num_classes, rng, /*zero_init=*/true);
}

}  // namespace

Classifier::Classifier(const ClassifierConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  validate(cfg_);
  init_classifier(params_, cfg_, seed);
}

Classifier::Classifier(const ClassifierConfig& cfg, nn::ParamStore params) : cfg_(cfg) {
  validate(cfg_);
  nn::ParamStore reference;
  init_classifier(reference, cfg_, 0);
  check_same_layout(reference, params);
  params_ = std::move(params);
}

Var Classifier::forward(Graph& g, const ComplexSignal& x_prime, ClassifierTrace* trace) const {
  const auto& c = cfg_;
  if (static_cast<int>(x_prime.size()) != c.signal_len)
    throw ShapeError("classifier expects " + std::to_string(c.signal_len) + " samples, got " +
                     std::to_string(x_prime.size()));
  Mat iq(1, 2 * c.signal_len);
  for (int i = 0; i < c.signal_len; ++i) {
    iq(0, 2 * i) = x_prime[static_cast<std::size_t>(i)].real();
    iq(0, 2 * i + 1) = x_prime[static_cast<std::size_t>(i)].imag();
  }
  Var row = nn::linear(g, params_, "input_proj", g.constant(std::move(iq)));
  Var z = nn::concat_rows(g, g.param(params_.at("class_tokens")), row);
  if (trace) trace->temporal_input = {g.value(z).rows(), g.value(z).cols()};
  for (int d = 0; d < c.temporal_depth; ++d) z = nn::encoder_block(g, params_, "temporal" + std::to_string(d), z, c.num_heads);

  z = nn::transpose(g, z);
  if (trace) trace->class_input = {g.value(z).rows(), g.value(z).cols()};
  for (int d = 0; d < c.class_depth; ++d) z = nn::encoder_block(g, params_, "class" + std::to_string(d), z, c.class_heads());

  const auto flat_len = static_cast<int>(g.value(z).size());
  z = nn::reshape(g, z, 1, flat_len);
  if (trace) trace->flattened = {1, flat_len};
  Var hidden = nn::gelu(g, nn::linear(g, params_, "mlp.fc1", z));
  return nn::linear(g, params_, "mlp.fc2", hidden);
}

std::vector<double> Classifier::logits(const ComplexSignal& x_prime) const {
  Graph g(/*record=*/false);
  const Mat& out = g.value(forward(g, x_prime));
  return {out.data(), out.data() + out.size()};
}

int Classifier::predict(const ComplexSignal& x_prime) const {
  const auto z = logits(x_prime);
  return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
}

std::vector<double> classify(const Classifier& model, const ComplexSignal& x_prime) {
  return model.logits(x_prime);
}

}  // namespace rffdm::models
