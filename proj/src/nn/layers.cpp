#include "rffdm/nn/layers.hpp"

#include <cmath>

#include "rffdm/errors.hpp"

namespace rffdm::nn {

void init_linear(ParamStore& ps, const std::string& name, int in, int out, Rng& rng, bool zero_init) {
  Mat w = Mat::Zero(in, out);
  if (!zero_init) {
    std::normal_distribution<double> n(0.0, 1.0 / std::sqrt(static_cast<double>(in)));
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = n(rng);
  }
  ps.add(name + ".weight", std::move(w));
  ps.add(name + ".bias", Mat::Zero(1, out));
}

Var linear(Graph& g, const ParamStore& ps, const std::string& name, Var x, bool use_bias) {
  Var y = matmul(g, x, g.param(ps.at(name + ".weight")));
  if (!use_bias) return y;
  return add_row(g, y, g.param(ps.at(name + ".bias")));
}

void init_layer_norm(ParamStore& ps, const std::string& name, int dim) {
  ps.add(name + ".gain", Mat::Ones(1, dim));
  ps.add(name + ".bias", Mat::Zero(1, dim));
}

Var layer_norm(Graph& g, const ParamStore& ps, const std::string& name, Var x) {
  return layer_norm_rows(g, x, g.param(ps.at(name + ".gain")), g.param(ps.at(name + ".bias")));
}

void init_attention(ParamStore& ps, const std::string& name, int q_dim, int kv_dim, int model_dim, Rng& rng) {
  init_linear(ps, name + ".q", q_dim, model_dim, rng);
  init_linear(ps, name + ".k", kv_dim, model_dim, rng);
  init_linear(ps, name + ".v", kv_dim, model_dim, rng);
  init_linear(ps, name + ".out", model_dim, q_dim, rng, /*zero_init=*/true);
}

Var attention(Graph& g, const ParamStore& ps, const std::string& name, Var queries, Var keys_values, int num_heads) {
  Var q = linear(g, ps, name + ".q", queries);
  Var k = linear(g, ps, name + ".k", keys_values);
  Var v = linear(g, ps, name + ".v", keys_values);
  const auto dim = static_cast<int>(g.value(q).cols());
  if (num_heads < 1 || dim % num_heads != 0)
    throw ConfigError("attention width " + std::to_string(dim) + " not divisible by " + std::to_string(num_heads) +
                      " heads");
  const int head_dim = dim / num_heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));

  std::vector<Var> heads;
  heads.reserve(static_cast<std::size_t>(num_heads));
  for (int h = 0; h < num_heads; ++h) {
    Var qh = num_heads == 1 ? q : slice_cols(g, q, h * head_dim, head_dim);
    Var kh = num_heads == 1 ? k : slice_cols(g, k, h * head_dim, head_dim);
    Var vh = num_heads == 1 ? v : slice_cols(g, v, h * head_dim, head_dim);
    Var weights = softmax_rows(g, scale(g, matmul_nt(g, qh, kh), inv_sqrt));
    heads.push_back(matmul(g, weights, vh));
  }
  Var merged = num_heads == 1 ? heads.front() : concat_cols(g, heads);
  return linear(g, ps, name + ".out", merged);
}

void init_feed_forward(ParamStore& ps, const std::string& name, int dim, int hidden, Rng& rng) {
  init_linear(ps, name + ".fc1", dim, hidden, rng);
  init_linear(ps, name + ".fc2", hidden, dim, rng, /*zero_init=*/true);
}

Var feed_forward(Graph& g, const ParamStore& ps, const std::string& name, Var x) {
  return linear(g, ps, name + ".fc2", gelu(g, linear(g, ps, name + ".fc1", x)));
}

void init_encoder_block(ParamStore& ps, const std::string& name, int dim, int ffn_hidden, Rng& rng) {
  init_layer_norm(ps, name + ".ln1", dim);
  init_attention(ps, name + ".attn", dim, dim, dim, rng);
  init_layer_norm(ps, name + ".ln2", dim);
  init_feed_forward(ps, name + ".ffn", dim, ffn_hidden, rng);
}

Var encoder_block(Graph& g, const ParamStore& ps, const std::string& name, Var x, int num_heads) {
  Var h = layer_norm(g, ps, name + ".ln1", x);
  x = add(g, x, attention(g, ps, name + ".attn", h, h, num_heads));
  h = layer_norm(g, ps, name + ".ln2", x);
  return add(g, x, feed_forward(g, ps, name + ".ffn", h));
}

}  // namespace rffdm::nn
