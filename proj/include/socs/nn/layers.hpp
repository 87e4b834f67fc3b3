#pragma once

#include <string>

#include "socs/nn/graph.hpp"
#include "socs/nn/ops.hpp"
#include "socs/rng.hpp"

namespace socs::nn {

/// Fills `t` with U(-a, a), a = sqrt(6 / (fan_in + fan_out)).
template <typename T>
void glorot_uniform(Tensor<T>& t, int fan_in, int fan_out, CounterRng& rng);

template <typename T>
struct Linear {
  Parameter<T>* weight = nullptr;  // [in, out]
  Parameter<T>* bias = nullptr;    // [out]

  Linear() = default;
  Linear(ParameterStore<T>& store, const std::string& name, int in, int out, CounterRng& rng);
  Var operator()(Graph<T>& g, Var x) const;
  int in_features() const { return weight->value.dim(0); }
  int out_features() const { return weight->value.dim(1); }
};

template <typename T>
struct LayerNorm {
  Parameter<T>* gamma = nullptr;
  Parameter<T>* beta = nullptr;

  LayerNorm() = default;
  LayerNorm(ParameterStore<T>& store, const std::string& name, int dim);
  Var operator()(Graph<T>& g, Var x) const;
};

/// Square-kernel convolution on NHWC tensors.
template <typename T>
struct Conv2d {
  Parameter<T>* weight = nullptr;  // [k*k*in, out]
  Parameter<T>* bias = nullptr;
  int kernel = 3;
  int stride = 1;
  int pad = 0;

  Conv2d() = default;
  Conv2d(ParameterStore<T>& store, const std::string& name, int in, int out, int kernel, int stride, int pad,
         CounterRng& rng);
  Var operator()(Graph<T>& g, Var x) const;
};

/// Pre-norm transformer block: x + MHA(LN(x)), then x + FF(LN(x)).
/// Attention spans every row of the input.
template <typename T>
struct TransformerBlock {
  LayerNorm<T> norm1;
  Linear<T> qkv;
  Linear<T> proj;
  LayerNorm<T> norm2;
  Linear<T> ff1;
  Linear<T> ff2;
  int heads = 1;

  TransformerBlock() = default;
  TransformerBlock(ParameterStore<T>& store, const std::string& name, int dim, int heads, int ff_dim,
                   CounterRng& rng);
  /// x: [S, dim] -> [S, dim].
  Var operator()(Graph<T>& g, Var x) const;
};

}  // namespace socs::nn
