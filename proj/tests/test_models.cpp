#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "gradcheck.hpp"
#include "rffdm/errors.hpp"
#include "rffdm/models.hpp"
#include "rffdm/synth.hpp"
#include "support.hpp"

using namespace rffdm;
using namespace rffdm::models;

namespace {

NoisePredictorConfig tiny_predictor() {
  NoisePredictorConfig c;
  c.signal_len = 32;
  c.model_dim = 16;
  c.num_blocks = 1;
  c.num_heads = 2;
  c.step_embed_dim = 16;
  c.patch_len = 4;
  c.ffn_dim = 32;
  c.num_steps = 1000;
  return c;
}

ClassifierConfig tiny_classifier() {
  ClassifierConfig c;
  c.num_classes = 3;
  c.signal_len = 8;
  c.temporal_depth = 1;
  c.class_depth = 1;
  c.num_heads = 2;
  c.mlp_hidden = 6;
  c.temporal_ffn_dim = 12;
  c.class_ffn_dim = 5;
  return c;
}

// Applies a class permutation to every parameter that is indexed by class.
nn::ParamStore permute_classes(const nn::ParamStore& src, const std::vector<int>& perm, const ClassifierConfig& c) {
  const int width = c.num_classes + 1;
  // Feature index f of the class encoder maps to f' (the signal row stays last).
  std::vector<int> feat(static_cast<std::size_t>(width));
  for (int i = 0; i < c.num_classes; ++i) feat[static_cast<std::size_t>(i)] = perm[static_cast<std::size_t>(i)];
  feat.back() = c.num_classes;
  auto permute_rows = [](const nn::Mat& m, const std::vector<int>& p) {
    nn::Mat out = m;
    for (std::size_t i = 0; i < p.size(); ++i) out.row(p[i]) = m.row(static_cast<Eigen::Index>(i));
    return out;
  };
  auto permute_cols = [](const nn::Mat& m, const std::vector<int>& p) {
    nn::Mat out = m;
    for (std::size_t i = 0; i < p.size(); ++i) out.col(p[i]) = m.col(static_cast<Eigen::Index>(i));
    return out;
  };
  auto ends_with = [](const std::string& s, const std::string& tail) {
    return s.size() >= tail.size() && s.compare(s.size() - tail.size(), tail.size(), tail) == 0;
  };

  nn::ParamStore out;
  for (const auto& [name, p] : src) {
    nn::Mat v = p.value;
    if (name == "class_tokens") {
      v = permute_rows(v, perm);
    } else if (name.rfind("class", 0) == 0 && name != "class_tokens") {
      if (ends_with(name, ".gain") || ends_with(name, "ln1.bias") || ends_with(name, "ln2.bias") ||
          ends_with(name, ".out.weight") || ends_with(name, ".out.bias") || ends_with(name, "fc2.weight") ||
          ends_with(name, "fc2.bias"))
        v = permute_cols(v, feat);
      else if (ends_with(name, "q.weight") || ends_with(name, "k.weight") || ends_with(name, "v.weight") ||
               ends_with(name, "fc1.weight"))
        v = permute_rows(v, feat);
    } else if (name == "mlp.fc1.weight") {
      // Flattened index m * width + f.
      std::vector<int> flat(static_cast<std::size_t>(c.signal_len * width));
      for (int m = 0; m < c.signal_len; ++m)
        for (int f = 0; f < width; ++f)
          flat[static_cast<std::size_t>(m * width + f)] = m * width + feat[static_cast<std::size_t>(f)];
      v = permute_rows(v, flat);
    } else if (name == "mlp.fc2.weight" || name == "mlp.fc2.bias") {
      v = permute_cols(v, perm);
    }
    out.add(name, v);
  }
  return out;
}

}  // namespace

TEST(StepEmbedding, ZeroStepPattern) {
  const auto e = sinusoidal_step_embedding(0, 16);
  for (int k = 0; k < 16; ++k) EXPECT_EQ(e[static_cast<std::size_t>(k)], k % 2 == 0 ? 0.0 : 1.0);
}

TEST(StepEmbedding, DistinctAndDeterministic) {
  std::set<std::vector<double>> seen;
  for (int t = 0; t <= 1000; ++t) {
    const auto e = sinusoidal_step_embedding(t, 32);
    EXPECT_EQ(e, sinusoidal_step_embedding(t, 32));
    seen.insert(e);
  }
  EXPECT_EQ(seen.size(), 1001u);
  EXPECT_THROW(sinusoidal_step_embedding(1, 7), ConfigError);
}

TEST(PhaseModulation, MagnitudePreservedAndInvertible) {
  const auto x = test::random_signal(320, 3);
  const auto y = phase_modulation_encoding(x, 640.0);
  for (std::size_t n = 0; n < x.size(); ++n) EXPECT_NEAR(std::abs(y[n]), std::abs(x[n]), 1e-14);
  EXPECT_LT(test::rel_l2(phase_modulation_decoding(y, 640.0), x), 1e-15);
}

TEST(PhaseModulation, ConstantInputBecomesPositional) {
  ComplexSignal c;
  c.samples.assign(320, Complex{1.0, 0.0});
  for (const double period : {2.0, 7.5, 640.0}) {
    const auto y = phase_modulation_encoding(c, period);
    EXPECT_GT(std::abs(y[1] - y[0]), 1e-6);
  }
  // With period 2M no two positions share a phase.
  const auto y = phase_modulation_encoding(c, 640.0);
  for (std::size_t n = 1; n < 320; ++n) EXPECT_GT(std::abs(y[n] - y[0]), 1e-3);
}

TEST(Patching, RoundTrip) {
  const auto x = test::random_signal(32, 4);
  const auto tokens = patchify(x, 4);
  EXPECT_EQ(tokens.rows(), 8);
  EXPECT_EQ(tokens.cols(), 8);
  EXPECT_EQ(unpatchify(tokens, x.sample_rate_hz), x);
  EXPECT_THROW(patchify(x, 5), ShapeError);
}

TEST(NoisePredictorTest, OutputLengthAndZeroHead) {
  for (const auto& cfg : {tiny_predictor(), NoisePredictorConfig{}}) {
    NoisePredictor model(cfg, 1);
    const auto x = test::random_signal(static_cast<std::size_t>(cfg.signal_len), 5);
    const auto eps = predict_noise(model, x, 500);
    ASSERT_EQ(eps.size(), x.size());
    for (const auto& v : eps.samples) EXPECT_EQ(v, Complex{});
  }
}

TEST(NoisePredictorTest, RejectsWrongInputs) {
  NoisePredictor model(tiny_predictor(), 1);
  EXPECT_THROW(model.predict(test::random_signal(31, 1), 5), ShapeError);
  EXPECT_THROW(model.predict(test::random_signal(32, 1), 1001), ConfigError);
}

TEST(NoisePredictorTest, LossGradientMatchesFiniteDifferences) {
  NoisePredictor model(tiny_predictor(), 2);
  test::randomize(model.params(), 3, 0.2);
  const auto x = test::random_signal(32, 6);
  const auto eps = test::random_signal(32, 7);
  const auto r = test::finite_difference_check(
      model.params(), [&](nn::Graph& g) { return model.loss(g, x, 420, eps); }, 10, 8);
  EXPECT_EQ(r.checked, 10);
  EXPECT_LT(r.max_rel_error, 1e-4);
}

TEST(NoisePredictorTest, UntrainedLossIsNoiseVariance) {
  NoisePredictor model(tiny_predictor(), 2);
  double total = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto x = test::random_signal(32, 100 + i);
    const auto eps = test::random_signal(32, 5000 + i);
    nn::Graph g(false);
    total += g.value(model.loss(g, x, 1 + i % 1000, eps))(0, 0);
  }
  EXPECT_NEAR(total / 1000.0, 1.0, 0.05);
}

TEST(NoisePredictorTest, DiagnosticLinearModeIsLinear) {
  auto cfg = tiny_predictor();
  cfg.diagnostic_linear = true;
  NoisePredictor model(cfg, 9);
  test::randomize(model.params(), 10);
  const auto x = test::random_signal(32, 11);
  const auto y = test::random_signal(32, 12);
  ComplexSignal x2 = x, xy = x;
  for (std::size_t n = 0; n < 32; ++n) {
    x2[n] *= 2.0;
    xy[n] += y[n];
  }
  const auto fx = model.predict(x, 7), fy = model.predict(y, 7);
  const auto f2 = model.predict(x2, 7), fxy = model.predict(xy, 7);
  for (std::size_t n = 0; n < 32; ++n) {
    EXPECT_NEAR(std::abs(f2[n] - 2.0 * fx[n]), 0.0, 1e-10);
    EXPECT_NEAR(std::abs(fxy[n] - fx[n] - fy[n]), 0.0, 1e-10);
  }
}

TEST(NoisePredictorTest, DeterministicInference) {
  NoisePredictor model(tiny_predictor(), 13);
  test::randomize(model.params(), 14);
  const auto x = test::random_signal(32, 15);
  EXPECT_EQ(model.predict(x, 33), model.predict(x, 33));
}

TEST(NoisePredictorTest, AdoptedParamsAreShapeChecked) {
  NoisePredictor a(tiny_predictor(), 1);
  auto params = a.params();
  EXPECT_NO_THROW(NoisePredictor(tiny_predictor(), params));
  auto other = tiny_predictor();
  other.model_dim = 8;
  EXPECT_THROW(NoisePredictor(other, params), ShapeError);
}

TEST(ClassifierTest, ShapeContractForSixDevices) {
  ClassifierConfig cfg;  // N = 6, M = 320
  Classifier model(cfg, 1);
  ClassifierTrace trace;
  nn::Graph g(false);
  const auto x = synth::generate_legacy_preamble();
  const nn::Mat z = g.value(model.forward(g, x, &trace));
  EXPECT_EQ(trace.temporal_input, (std::pair<long, long>{7, 320}));
  EXPECT_EQ(trace.class_input, (std::pair<long, long>{320, 7}));
  EXPECT_EQ(trace.flattened, (std::pair<long, long>{1, 2240}));
  ASSERT_EQ(z.cols(), 6);
  EXPECT_NEAR(nn::softmax(z).sum(), 1.0, 1e-6);
}

TEST(ClassifierTest, ClassHeadsDivideTokenCount) {
  ClassifierConfig c;
  EXPECT_EQ(c.class_heads(), 1);
  c.num_classes = 7;
  EXPECT_EQ(c.class_heads(), 4);
  c.num_classes = 5;
  EXPECT_EQ(c.class_heads(), 3);
}

TEST(ClassifierTest, UntrainedLogitsUniform) {
  Classifier model(ClassifierConfig{}, 3);
  const auto z = classify(model, synth::generate_legacy_preamble());
  ASSERT_EQ(z.size(), 6u);
  for (const double v : z) EXPECT_EQ(v, 0.0);
}

TEST(ClassifierTest, ClassPermutationPermutesLogits) {
  const auto cfg = tiny_classifier();
  Classifier base(cfg, 4);
  test::randomize(base.params(), 5);
  const std::vector<int> perm{2, 0, 1};
  Classifier permuted(cfg, permute_classes(base.params(), perm, cfg));
  for (unsigned s = 0; s < 5; ++s) {
    const auto x = test::random_signal(8, 20 + s);
    const auto a = base.logits(x), b = permuted.logits(x);
    for (std::size_t i = 0; i < perm.size(); ++i) EXPECT_NEAR(b[static_cast<std::size_t>(perm[i])], a[i], 1e-10);
  }
}

TEST(ClassifierTest, CrossEntropyGradientMatchesFiniteDifferences) {
  Classifier model(tiny_classifier(), 6);
  test::randomize(model.params(), 7, 0.2);
  const auto x = test::random_signal(8, 8);
  const auto r = test::finite_difference_check(
      model.params(), [&](nn::Graph& g) { return nn::cross_entropy(g, model.forward(g, x), 1); }, 10, 9);
  EXPECT_LT(r.max_rel_error, 1e-3);
}

TEST(ClassifierTest, RejectsWrongLength) {
  Classifier model(tiny_classifier(), 1);
  EXPECT_THROW(model.logits(test::random_signal(9, 1)), ShapeError);
}
