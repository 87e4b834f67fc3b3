#pragma once

#include <vector>

#include "socs/nn/graph.hpp"

namespace socs::nn {

// Matrix-shaped ops treat every tensor as [rows, cols] with cols = last dim.

template <typename T> Var matmul(Graph<T>& g, Var a, Var b);
/// x[..., in] @ w[in, out] + b[out]. `b` may be an invalid Var.
template <typename T> Var linear(Graph<T>& g, Var x, Var w, Var b);
template <typename T> Var add(Graph<T>& g, Var a, Var b);
template <typename T> Var mul(Graph<T>& g, Var a, Var b);
template <typename T> Var scale(Graph<T>& g, Var a, T factor);
template <typename T> Var gelu(Graph<T>& g, Var a);
template <typename T> Var exp(Graph<T>& g, Var a);
template <typename T> Var clamp(Graph<T>& g, Var a, T lo, T hi);
template <typename T> Var reshape(Graph<T>& g, Var a, std::vector<int> shape);
template <typename T> Var slice_cols(Graph<T>& g, Var a, int start, int count);
template <typename T> Var concat_cols(Graph<T>& g, Var a, Var b);
template <typename T> Var sum_all(Graph<T>& g, Var a);
template <typename T> Var layer_norm(Graph<T>& g, Var x, Var gamma, Var beta, T eps = T(1e-5));

/// Multi-head scaled dot-product self-attention over all rows of
/// qkv[S, 3d] (column blocks q | k | v). Returns [S, d].
template <typename T> Var self_attention(Graph<T>& g, Var qkv, int heads);

/// x[B, H, W, C] (NHWC), w[k*k*C, O], b[O] -> [B, Ho, Wo, O].
template <typename T> Var conv2d(Graph<T>& g, Var x, Var w, Var b, int kernel, int stride, int pad);

/// x[B, Hp*Wp, d] -> [B, Hs*Ws, d] by averaging (Hp/Hs) x (Wp/Ws) blocks.
template <typename T> Var avg_pool_grid(Graph<T>& g, Var x, int hp, int wp, int hs, int ws);

/// x[B, R, d] -> [R, d], mean over the leading axis.
template <typename T> Var mean_leading(Graph<T>& g, Var x);

/// x[n, d] -> [1, d].
template <typename T> Var mean_rows(Graph<T>& g, Var x);

/// a[K, h], b[N, h] -> [N*K, h] with row n*K + k = a[k] + b[n].
template <typename T> Var broadcast_pairs(Graph<T>& g, Var a, Var b);

}  // namespace socs::nn
