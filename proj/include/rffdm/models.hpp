#pragma once

#include <cstdint>
#include <vector>

#include "rffdm/nn/graph.hpp"
#include "rffdm/signal.hpp"

namespace rffdm::models {

/// Sinusoidal diffusion-step features [sin(t w_0), cos(t w_0), sin(t w_1), ...]
/// with w_k = 10000^(-2k/dim). `dim` must be even.
std::vector<double> sinusoidal_step_embedding(int t, int dim);

/// out[n] = sig[n] * exp(j 2 pi n / period). Magnitude preserving.
ComplexSignal phase_modulation_encoding(const ComplexSignal& sig, double period);
/// Inverse rotation of phase_modulation_encoding.
ComplexSignal phase_modulation_decoding(const ComplexSignal& sig, double period);

struct NoisePredictorConfig {
  int signal_len = 320;
  int model_dim = 128;
  int num_blocks = 4;
  int num_heads = 4;
  int step_embed_dim = 128;
  int patch_len = 4;
  int ffn_dim = 512;
  /// Largest diffusion step the model is asked about.
  int num_steps = 1000;
  /// Bypasses attention, normalization, activations, biases, and positional offsets so the
  /// network collapses to a linear map. For plumbing checks only.
  bool diagnostic_linear = false;

  int num_tokens() const { return signal_len / patch_len; }
  /// Period of the positional phase rotation (2M).
  double phase_period() const { return 2.0 * signal_len; }

  bool operator==(const NoisePredictorConfig&) const = default;
};

void validate(const NoisePredictorConfig& cfg);

/// Transformer noise predictor: phase-modulation encoding, patch tokens, blocks of
/// self-attention, cross-attention onto the step embedding, and feed-forward.
class NoisePredictor {
 public:
  explicit NoisePredictor(const NoisePredictorConfig& cfg, std::uint64_t seed = 0);
  /// Adopts existing parameters; throws ShapeError unless they match a fresh init of `cfg`.
  NoisePredictor(const NoisePredictorConfig& cfg, nn::ParamStore params);

  const NoisePredictorConfig& config() const noexcept { return cfg_; }
  nn::ParamStore& params() noexcept { return params_; }
  const nn::ParamStore& params() const noexcept { return params_; }

  /// Records the forward pass on g. Returns the (tokens x 2*patch_len) real output.
  nn::Var forward(nn::Graph& g, const ComplexSignal& x_t, int t) const;

  /// Inference: predicted noise, same length as x_t.
  ComplexSignal predict(const ComplexSignal& x_t, int t) const;

  /// Per-complex-sample squared error ||eps - eps_hat||^2 / M, recorded on g.
  nn::Var loss(nn::Graph& g, const ComplexSignal& x_t, int t, const ComplexSignal& epsilon) const;

 private:
  void check_input(const ComplexSignal& x_t, int t) const;

  NoisePredictorConfig cfg_;
  nn::ParamStore params_;
};

ComplexSignal predict_noise(const NoisePredictor& model, const ComplexSignal& x_t, int t);

/// Interleaves I/Q into (len/patch) x (2*patch) rows.
nn::Mat patchify(const ComplexSignal& sig, int patch_len);
ComplexSignal unpatchify(const nn::Mat& tokens, double sample_rate_hz);

struct ClassifierConfig {
  int num_classes = 6;
  int signal_len = 320;
  int temporal_depth = 2;
  int class_depth = 2;
  int num_heads = 4;
  int mlp_hidden = 256;
  int temporal_ffn_dim = 640;
  int class_ffn_dim = 28;

  /// Heads used by the class encoder: the largest divisor of N+1 not above num_heads.
  int class_heads() const;

  bool operator==(const ClassifierConfig&) const = default;
};

void validate(const ClassifierConfig& cfg);

/// Intermediate shapes recorded by Classifier::forward.
struct ClassifierTrace {
  std::pair<long, long> temporal_input;  // Z_T
  std::pair<long, long> class_input;     // Z_C
  std::pair<long, long> flattened;
};

/// Dual-encoder classifier with one learnable token per class.
class Classifier {
 public:
  explicit Classifier(const ClassifierConfig& cfg, std::uint64_t seed = 0);
  Classifier(const ClassifierConfig& cfg, nn::ParamStore params);

  const ClassifierConfig& config() const noexcept { return cfg_; }
  nn::ParamStore& params() noexcept { return params_; }
  const nn::ParamStore& params() const noexcept { return params_; }

  /// Records the forward pass; returns a 1 x N logit row.
  nn::Var forward(nn::Graph& g, const ComplexSignal& x_prime, ClassifierTrace* trace = nullptr) const;

  std::vector<double> logits(const ComplexSignal& x_prime) const;
  int predict(const ComplexSignal& x_prime) const;

 private:
  ClassifierConfig cfg_;
  nn::ParamStore params_;
};

std::vector<double> classify(const Classifier& model, const ComplexSignal& x_prime);

/// Shape-checks `params` against a fresh init of a model with the given layout.
void check_same_layout(const nn::ParamStore& expected, const nn::ParamStore& actual);

}  // namespace rffdm::models
