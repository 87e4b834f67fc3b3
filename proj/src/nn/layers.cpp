#include "socs/nn/layers.hpp"

#include <cmath>

namespace socs::nn {

template <typename T>
void glorot_uniform(Tensor<T>& t, int fan_in, int fan_out, CounterRng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : t.data) v = static_cast<T>(rng.uniform(-a, a));
}

template <typename T>
Linear<T>::Linear(ParameterStore<T>& store, const std::string& name, int in, int out, CounterRng& rng) {
  weight = &store.add(name + ".weight", {in, out});
  bias = &store.add(name + ".bias", {out});
  auto stream = rng.fork(name);
  glorot_uniform(weight->value, in, out, stream);
}

template <typename T>
Var Linear<T>::operator()(Graph<T>& g, Var x) const {
  return linear(g, x, g.parameter(*weight), g.parameter(*bias));
}

template <typename T>
LayerNorm<T>::LayerNorm(ParameterStore<T>& store, const std::string& name, int dim) {
  gamma = &store.add(name + ".gamma", {dim});
  beta = &store.add(name + ".beta", {dim});
  std::fill(gamma->value.data.begin(), gamma->value.data.end(), T{1});
}

template <typename T>
Var LayerNorm<T>::operator()(Graph<T>& g, Var x) const {
  return layer_norm(g, x, g.parameter(*gamma), g.parameter(*beta));
}

template <typename T>
Conv2d<T>::Conv2d(ParameterStore<T>& store, const std::string& name, int in, int out, int kernel_, int stride_,
                  int pad_, CounterRng& rng)
    : kernel(kernel_), stride(stride_), pad(pad_) {
  weight = &store.add(name + ".weight", {kernel * kernel * in, out});
  bias = &store.add(name + ".bias", {out});
  auto stream = rng.fork(name);
  glorot_uniform(weight->value, kernel * kernel * in, kernel * kernel * out, stream);
}

template <typename T>
Var Conv2d<T>::operator()(Graph<T>& g, Var x) const {
  return conv2d(g, x, g.parameter(*weight), g.parameter(*bias), kernel, stride, pad);
}

template <typename T>
TransformerBlock<T>::TransformerBlock(ParameterStore<T>& store, const std::string& name, int dim, int heads_,
                                      int ff_dim, CounterRng& rng)
    : norm1(store, name + ".norm1", dim),
      qkv(store, name + ".qkv", dim, 3 * dim, rng),
      proj(store, name + ".proj", dim, dim, rng),
      norm2(store, name + ".norm2", dim),
      ff1(store, name + ".ff1", dim, ff_dim, rng),
      ff2(store, name + ".ff2", ff_dim, dim, rng),
      heads(heads_) {}

template <typename T>
Var TransformerBlock<T>::operator()(Graph<T>& g, Var x) const {
  Var h = self_attention(g, qkv(g, norm1(g, x)), heads);
  x = add(g, x, proj(g, h));
  Var f = ff2(g, gelu(g, ff1(g, norm2(g, x))));
  return add(g, x, f);
}

template void glorot_uniform<float>(Tensor<float>&, int, int, CounterRng&);
template void glorot_uniform<double>(Tensor<double>&, int, int, CounterRng&);
template struct Linear<float>;
template struct Linear<double>;
template struct LayerNorm<float>;
template struct LayerNorm<double>;
template struct Conv2d<float>;
template struct Conv2d<double>;
template struct TransformerBlock<float>;
template struct TransformerBlock<double>;

}  // namespace socs::nn
