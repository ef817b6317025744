#pragma once

#include <string>

#include "rffdm/nn/graph.hpp"
#include "rffdm/random.hpp"

namespace rffdm::nn {

/// Fan-in scaled Gaussian init, or zeros when `zero_init`. Registers `<name>.weight` (in x out)
/// and `<name>.bias` (1 x out).
void init_linear(ParamStore& ps, const std::string& name, int in, int out, Rng& rng, bool zero_init = false);
/// x W + b. With use_bias == false the bias is skipped (diagnostic linear mode).
Var linear(Graph& g, const ParamStore& ps, const std::string& name, Var x, bool use_bias = true);

void init_layer_norm(ParamStore& ps, const std::string& name, int dim);
Var layer_norm(Graph& g, const ParamStore& ps, const std::string& name, Var x);

/// Multi-head attention projections: q from q_dim, k/v from kv_dim, model_dim wide.
/// The output projection is zero-initialized.
void init_attention(ParamStore& ps, const std::string& name, int q_dim, int kv_dim, int model_dim, Rng& rng);
Var attention(Graph& g, const ParamStore& ps, const std::string& name, Var queries, Var keys_values, int num_heads);

/// Two-layer GELU MLP whose output projection is zero-initialized.
void init_feed_forward(ParamStore& ps, const std::string& name, int dim, int hidden, Rng& rng);
Var feed_forward(Graph& g, const ParamStore& ps, const std::string& name, Var x);

/// Pre-norm Transformer encoder block: x + MHSA(LN(x)), then x + FFN(LN(x)).
void init_encoder_block(ParamStore& ps, const std::string& name, int dim, int ffn_hidden, Rng& rng);
Var encoder_block(Graph& g, const ParamStore& ps, const std::string& name, Var x, int num_heads);

}  // namespace rffdm::nn
