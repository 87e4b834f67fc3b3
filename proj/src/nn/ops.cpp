#include "socs/nn/ops.hpp"

#include <cmath>
#include <memory>

#include "socs/error.hpp"

namespace socs::nn {
namespace {

template <typename T>
std::vector<int> with_last(std::vector<int> shape, int last) {
  shape.back() = last;
  return shape;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

template <typename T>
void accumulate(Tensor<T>& dst, const Tensor<T>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst.data[i] += src.data[i];
}

}  // namespace

template <typename T>
Var matmul(Graph<T>& g, Var a, Var b) {
  const auto& A = g.value(a);
  const auto& B = g.value(b);
  require(B.rank() == 2 && A.cols() == B.dim(0),
          "matmul: incompatible shapes " + shape_string(A.shape) + " x " + shape_string(B.shape));
  Tensor<T> out(with_last<T>(A.shape, B.dim(1)));
  out.matrix().noalias() = A.matrix() * B.matrix();
  return g.record(std::move(out), {a, b}, [a, b](Graph<T>& g, Var self) {
    const auto dC = g.grad(self).matrix();
    if (g.requires_grad(a)) g.grad(a).matrix().noalias() += dC * g.value(b).matrix().transpose();
    if (g.requires_grad(b)) g.grad(b).matrix().noalias() += g.value(a).matrix().transpose() * dC;
  });
}

template <typename T>
Var linear(Graph<T>& g, Var x, Var w, Var b) {
  const auto& X = g.value(x);
  const auto& W = g.value(w);
  require(W.rank() == 2 && X.cols() == W.dim(0),
          "linear: incompatible shapes " + shape_string(X.shape) + " x " + shape_string(W.shape));
  Tensor<T> out(with_last<T>(X.shape, W.dim(1)));
  auto O = out.matrix();
  O.noalias() = X.matrix() * W.matrix();
  if (b.valid()) {
    const auto& B = g.value(b);
    require(static_cast<int>(B.size()) == W.dim(1), "linear: bias size mismatch");
    O.rowwise() += ConstMatrixMap<T>(B.data.data(), 1, W.dim(1)).row(0);
  }
  if (!b.valid()) {
    return g.record(std::move(out), {x, w}, [x, w](Graph<T>& g, Var self) {
      const auto dC = g.grad(self).matrix();
      if (g.requires_grad(x)) g.grad(x).matrix().noalias() += dC * g.value(w).matrix().transpose();
      if (g.requires_grad(w)) g.grad(w).matrix().noalias() += g.value(x).matrix().transpose() * dC;
    });
  }
  return g.record(std::move(out), {x, w, b}, [x, w, b](Graph<T>& g, Var self) {
    const auto dC = g.grad(self).matrix();
    if (g.requires_grad(x)) g.grad(x).matrix().noalias() += dC * g.value(w).matrix().transpose();
    if (g.requires_grad(w)) g.grad(w).matrix().noalias() += g.value(x).matrix().transpose() * dC;
    if (g.requires_grad(b)) {
      auto& db = g.grad(b);
      MatrixMap<T>(db.data.data(), 1, static_cast<int>(db.size())) += dC.colwise().sum();
    }
  });
}

template <typename T>
Var add(Graph<T>& g, Var a, Var b) {
  const auto& A = g.value(a);
  const auto& B = g.value(b);
  require(A.size() == B.size(), "add: size mismatch " + shape_string(A.shape) + " vs " + shape_string(B.shape));
  Tensor<T> out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += B.data[i];
  return g.record(std::move(out), {a, b}, [a, b](Graph<T>& g, Var self) {
    const auto& d = g.grad(self);
    if (g.requires_grad(a)) accumulate(g.grad(a), d);
    if (g.requires_grad(b)) accumulate(g.grad(b), d);
  });
}

template <typename T>
Var mul(Graph<T>& g, Var a, Var b) {
  const auto& A = g.value(a);
  const auto& B = g.value(b);
  require(A.size() == B.size(), "mul: size mismatch " + shape_string(A.shape) + " vs " + shape_string(B.shape));
  Tensor<T> out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= B.data[i];
  return g.record(std::move(out), {a, b}, [a, b](Graph<T>& g, Var self) {
    const auto& d = g.grad(self);
    if (g.requires_grad(a)) {
      auto& da = g.grad(a);
      const auto& bv = g.value(b);
      for (std::size_t i = 0; i < d.size(); ++i) da.data[i] += d.data[i] * bv.data[i];
    }
    if (g.requires_grad(b)) {
      auto& db = g.grad(b);
      const auto& av = g.value(a);
      for (std::size_t i = 0; i < d.size(); ++i) db.data[i] += d.data[i] * av.data[i];
    }
  });
}

template <typename T>
Var scale(Graph<T>& g, Var a, T factor) {
  Tensor<T> out = g.value(a);
  for (auto& v : out.data) v *= factor;
  return g.record(std::move(out), {a}, [a, factor](Graph<T>& g, Var self) {
    const auto& d = g.grad(self);
    auto& da = g.grad(a);
    for (std::size_t i = 0; i < d.size(); ++i) da.data[i] += factor * d.data[i];
  });
}

template <typename T>
Var gelu(Graph<T>& g, Var a) {
  constexpr T c = T(0.7978845608028654);  // sqrt(2/pi)
  constexpr T k = T(0.044715);
  Tensor<T> out = g.value(a);
  for (auto& v : out.data) {
    const T x = v;
    v = T(0.5) * x * (T(1) + std::tanh(c * (x + k * x * x * x)));
  }
  return g.record(std::move(out), {a}, [a](Graph<T>& g, Var self) {
    const auto& d = g.grad(self);
    const auto& x = g.value(a);
    auto& da = g.grad(a);
    for (std::size_t i = 0; i < d.size(); ++i) {
      const T xi = x.data[i];
      const T t = std::tanh(c * (xi + k * xi * xi * xi));
      const T dt = (T(1) - t * t) * c * (T(1) + T(3) * k * xi * xi);
      da.data[i] += d.data[i] * (T(0.5) * (T(1) + t) + T(0.5) * xi * dt);
    }
  });
}

template <typename T>
Var exp(Graph<T>& g, Var a) {
  Tensor<T> out = g.value(a);
  for (auto& v : out.data) v = std::exp(v);
  return g.record(std::move(out), {a}, [a](Graph<T>& g, Var self) {
    const auto& d = g.grad(self);
    const auto& y = g.value(self);
    auto& da = g.grad(a);
    for (std::size_t i = 0; i < d.size(); ++i) da.data[i] += d.data[i] * y.data[i];
  });
}

template <typename T>
Var clamp(Graph<T>& g, Var a, T lo, T hi) {
  Tensor<T> out = g.value(a);
  for (auto& v : out.data) v = std::min(hi, std::max(lo, v));
  return g.record(std::move(out), {a}, [a, lo, hi](Graph<T>& g, Var self) {
    const auto& d = g.grad(self);
    const auto& x = g.value(a);
    auto& da = g.grad(a);
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (x.data[i] >= lo && x.data[i] <= hi) da.data[i] += d.data[i];
    }
  });
}

template <typename T>
Var reshape(Graph<T>& g, Var a, std::vector<int> shape) {
  require(shape_size(shape) == g.value(a).size(),
          "reshape: " + shape_string(g.value(a).shape) + " -> " + shape_string(shape));
  Tensor<T> out(std::move(shape), g.value(a).data);
  return g.record(std::move(out), {a}, [a](Graph<T>& g, Var self) {
    accumulate(g.grad(a), g.grad(self));
  });
}

template <typename T>
Var slice_cols(Graph<T>& g, Var a, int start, int count) {
  const auto& A = g.value(a);
  require(start >= 0 && count > 0 && start + count <= A.cols(), "slice_cols: out of range");
  Tensor<T> out(with_last<T>(A.shape, count));
  out.matrix() = A.matrix().middleCols(start, count);
  return g.record(std::move(out), {a}, [a, start, count](Graph<T>& g, Var self) {
    g.grad(a).matrix().middleCols(start, count) += g.grad(self).matrix();
  });
}

template <typename T>
Var concat_cols(Graph<T>& g, Var a, Var b) {
  const auto& A = g.value(a);
  const auto& B = g.value(b);
  require(A.rows() == B.rows(), "concat_cols: row mismatch " + shape_string(A.shape) + " vs " + shape_string(B.shape));
  const int ca = A.cols();
  const int cb = B.cols();
  Tensor<T> out(with_last<T>(A.shape, ca + cb));
  auto O = out.matrix();
  O.leftCols(ca) = A.matrix();
  O.rightCols(cb) = B.matrix();
  return g.record(std::move(out), {a, b}, [a, b, ca, cb](Graph<T>& g, Var self) {
    const auto d = g.grad(self).matrix();
    if (g.requires_grad(a)) g.grad(a).matrix() += d.leftCols(ca);
    if (g.requires_grad(b)) g.grad(b).matrix() += d.rightCols(cb);
  });
}

template <typename T>
Var sum_all(Graph<T>& g, Var a) {
  T s = T{0};
  for (T v : g.value(a).data) s += v;
  return g.record(Tensor<T>({1}, s), {a}, [a](Graph<T>& g, Var self) {
    const T d = g.grad(self)[0];
    for (auto& v : g.grad(a).data) v += d;
  });
}

template <typename T>
Var layer_norm(Graph<T>& g, Var x, Var gamma, Var beta, T eps) {
  const auto& X = g.value(x);
  const int n = X.rows();
  const int d = X.cols();
  require(static_cast<int>(g.value(gamma).size()) == d && static_cast<int>(g.value(beta).size()) == d,
          "layer_norm: parameter size mismatch");
  auto xhat = std::make_shared<Tensor<T>>(X.shape);
  auto inv_std = std::make_shared<std::vector<T>>(static_cast<std::size_t>(n));
  Tensor<T> out(X.shape);
  const T* gm = g.value(gamma).data.data();
  const T* bt = g.value(beta).data.data();
  for (int r = 0; r < n; ++r) {
    const T* row = X.data.data() + static_cast<std::size_t>(r) * d;
    T mean = 0;
    for (int c = 0; c < d; ++c) mean += row[c];
    mean /= T(d);
    T var = 0;
    for (int c = 0; c < d; ++c) var += (row[c] - mean) * (row[c] - mean);
    var /= T(d);
    const T is = T(1) / std::sqrt(var + eps);
    (*inv_std)[static_cast<std::size_t>(r)] = is;
    T* xh = xhat->data.data() + static_cast<std::size_t>(r) * d;
    T* o = out.data.data() + static_cast<std::size_t>(r) * d;
    for (int c = 0; c < d; ++c) {
      xh[c] = (row[c] - mean) * is;
      o[c] = gm[c] * xh[c] + bt[c];
    }
  }
  return g.record(std::move(out), {x, gamma, beta},
                          [x, gamma, beta, xhat, inv_std, n, d](Graph<T>& g, Var self) {
    const auto& dy = g.grad(self);
    const T* gm = g.value(gamma).data.data();
    const bool need_x = g.requires_grad(x);
    T* dg = g.requires_grad(gamma) ? g.grad(gamma).data.data() : nullptr;
    T* db = g.requires_grad(beta) ? g.grad(beta).data.data() : nullptr;
    T* dx = need_x ? g.grad(x).data.data() : nullptr;
    std::vector<T> dxh(static_cast<std::size_t>(d));
    for (int r = 0; r < n; ++r) {
      const std::size_t off = static_cast<std::size_t>(r) * d;
      const T* dyr = dy.data.data() + off;
      const T* xh = xhat->data.data() + off;
      T sum_dxh = 0;
      T sum_dxh_xh = 0;
      for (int c = 0; c < d; ++c) {
        if (dg) dg[c] += dyr[c] * xh[c];
        if (db) db[c] += dyr[c];
        dxh[static_cast<std::size_t>(c)] = dyr[c] * gm[c];
        sum_dxh += dxh[static_cast<std::size_t>(c)];
        sum_dxh_xh += dxh[static_cast<std::size_t>(c)] * xh[c];
      }
      if (dx) {
        const T is = (*inv_std)[static_cast<std::size_t>(r)];
        for (int c = 0; c < d; ++c) {
          dx[off + c] += is / T(d) * (T(d) * dxh[static_cast<std::size_t>(c)] - sum_dxh - xh[c] * sum_dxh_xh);
        }
      }
    }
  });
}

template <typename T>
Var self_attention(Graph<T>& g, Var qkv, int heads) {
  const auto& QKV = g.value(qkv);
  const int s = QKV.rows();
  require(QKV.cols() % 3 == 0, "self_attention: qkv width must be 3*d");
  const int d = QKV.cols() / 3;
  require(heads > 0 && d % heads == 0, "self_attention: feature dim not divisible by heads");
  const int dh = d / heads;
  const T inv_sqrt = T(1) / std::sqrt(T(dh));
  auto probs = std::make_shared<std::vector<RowMatrix<T>>>(static_cast<std::size_t>(heads));
  Tensor<T> out({s, d});
  const auto M = QKV.matrix();
  auto O = out.matrix();
  for (int h = 0; h < heads; ++h) {
    RowMatrix<T> scores = (M.middleCols(h * dh, dh) * M.middleCols(d + h * dh, dh).transpose()) * inv_sqrt;
    for (int r = 0; r < s; ++r) {
      auto row = scores.row(r);
      const T mx = row.maxCoeff();
      row = (row.array() - mx).exp().matrix();
      row /= row.sum();
    }
    O.middleCols(h * dh, dh).noalias() = scores * M.middleCols(2 * d + h * dh, dh);
    (*probs)[static_cast<std::size_t>(h)] = std::move(scores);
  }
  return g.record(std::move(out), {qkv}, [qkv, heads, d, dh, inv_sqrt, probs](Graph<T>& g, Var self) {
    const auto M = g.value(qkv).matrix();
    const auto dO = g.grad(self).matrix();
    auto dM = g.grad(qkv).matrix();
    for (int h = 0; h < heads; ++h) {
      const RowMatrix<T>& P = (*probs)[static_cast<std::size_t>(h)];
      const auto Q = M.middleCols(h * dh, dh);
      const auto K = M.middleCols(d + h * dh, dh);
      const auto V = M.middleCols(2 * d + h * dh, dh);
      const auto dOh = dO.middleCols(h * dh, dh);
      dM.middleCols(2 * d + h * dh, dh).noalias() += P.transpose() * dOh;
      RowMatrix<T> dP = dOh * V.transpose();
      const Eigen::Matrix<T, Eigen::Dynamic, 1> rowdot = (dP.array() * P.array()).rowwise().sum();
      RowMatrix<T> dS = (P.array() * (dP.colwise() - rowdot).array()).matrix() * inv_sqrt;
      dM.middleCols(h * dh, dh).noalias() += dS * K;
      dM.middleCols(d + h * dh, dh).noalias() += dS.transpose() * Q;
    }
  });
}

template <typename T>
Var conv2d(Graph<T>& g, Var x, Var w, Var b, int kernel, int stride, int pad) {
  const auto& X = g.value(x);
  require(X.rank() == 4, "conv2d: expected NHWC input, got " + shape_string(X.shape));
  const int B = X.dim(0), H = X.dim(1), W = X.dim(2), C = X.dim(3);
  const auto& Wt = g.value(w);
  const int patch = kernel * kernel * C;
  require(Wt.rank() == 2 && Wt.dim(0) == patch, "conv2d: weight shape " + shape_string(Wt.shape) +
                                                      " does not match kernel " + std::to_string(kernel) +
                                                      " and channels " + std::to_string(C));
  const int O = Wt.dim(1);
  const int Ho = (H + 2 * pad - kernel) / stride + 1;
  const int Wo = (W + 2 * pad - kernel) / stride + 1;
  require(Ho > 0 && Wo > 0, "conv2d: input too small");
  auto cols = std::make_shared<RowMatrix<T>>(RowMatrix<T>::Zero(static_cast<Eigen::Index>(B) * Ho * Wo, patch));
  for (int n = 0; n < B; ++n) {
    for (int oy = 0; oy < Ho; ++oy) {
      for (int ox = 0; ox < Wo; ++ox) {
        T* dst = cols->data() + ((static_cast<std::size_t>(n) * Ho + oy) * Wo + ox) * patch;
        for (int ky = 0; ky < kernel; ++ky) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= H) continue;
          for (int kx = 0; kx < kernel; ++kx) {
            const int ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= W) continue;
            const T* src = X.data.data() + ((static_cast<std::size_t>(n) * H + iy) * W + ix) * C;
            std::copy(src, src + C, dst + (ky * kernel + kx) * C);
          }
        }
      }
    }
  }
  Tensor<T> out({B, Ho, Wo, O});
  auto Om = out.matrix();
  Om.noalias() = *cols * Wt.matrix();
  Om.rowwise() += ConstMatrixMap<T>(g.value(b).data.data(), 1, O).row(0);
  return g.record(std::move(out), {x, w, b},
                          [x, w, b, cols, B, H, W, C, Ho, Wo, kernel, stride, pad, patch](Graph<T>& g, Var self) {
    const auto dOut = g.grad(self).matrix();
    if (g.requires_grad(w)) g.grad(w).matrix().noalias() += cols->transpose() * dOut;
    if (g.requires_grad(b)) {
      auto& db = g.grad(b);
      MatrixMap<T>(db.data.data(), 1, static_cast<int>(db.size())) += dOut.colwise().sum();
    }
    if (!g.requires_grad(x)) return;
    const RowMatrix<T> dcols = dOut * g.value(w).matrix().transpose();
    auto& dx = g.grad(x);
    for (int n = 0; n < B; ++n) {
      for (int oy = 0; oy < Ho; ++oy) {
        for (int ox = 0; ox < Wo; ++ox) {
          const T* src = dcols.data() + ((static_cast<std::size_t>(n) * Ho + oy) * Wo + ox) * patch;
          for (int ky = 0; ky < kernel; ++ky) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= H) continue;
            for (int kx = 0; kx < kernel; ++kx) {
              const int ix = ox * stride - pad + kx;
              if (ix < 0 || ix >= W) continue;
              T* dst = dx.data.data() + ((static_cast<std::size_t>(n) * H + iy) * W + ix) * C;
              const T* s = src + (ky * kernel + kx) * C;
              for (int c = 0; c < C; ++c) dst[c] += s[c];
            }
          }
        }
      }
    }
  });
}

template <typename T>
Var avg_pool_grid(Graph<T>& g, Var x, int hp, int wp, int hs, int ws) {
  const auto& X = g.value(x);
  require(X.rank() == 3 && X.dim(1) == hp * wp, "avg_pool_grid: expected [B, " + std::to_string(hp * wp) +
                                                    ", d], got " + shape_string(X.shape));
  require(hs > 0 && ws > 0 && hp % hs == 0 && wp % ws == 0, "avg_pool_grid: grid not divisible");
  const int B = X.dim(0), d = X.dim(2);
  const int fh = hp / hs, fw = wp / ws;
  const T inv = T(1) / T(fh * fw);
  Tensor<T> out({B, hs * ws, d});
  for (int n = 0; n < B; ++n) {
    for (int r = 0; r < hp; ++r) {
      for (int c = 0; c < wp; ++c) {
        const T* src = X.data.data() + (static_cast<std::size_t>(n) * hp * wp + r * wp + c) * d;
        T* dst = out.data.data() + (static_cast<std::size_t>(n) * hs * ws + (r / fh) * ws + c / fw) * d;
        for (int k = 0; k < d; ++k) dst[k] += inv * src[k];
      }
    }
  }
  return g.record(std::move(out), {x}, [x, B, hp, wp, hs, ws, fh, fw, d, inv](Graph<T>& g, Var self) {
    const auto& dy = g.grad(self);
    auto& dx = g.grad(x);
    for (int n = 0; n < B; ++n) {
      for (int r = 0; r < hp; ++r) {
        for (int c = 0; c < wp; ++c) {
          T* dst = dx.data.data() + (static_cast<std::size_t>(n) * hp * wp + r * wp + c) * d;
          const T* src = dy.data.data() + (static_cast<std::size_t>(n) * hs * ws + (r / fh) * ws + c / fw) * d;
          for (int k = 0; k < d; ++k) dst[k] += inv * src[k];
        }
      }
    }
  });
}

template <typename T>
Var mean_leading(Graph<T>& g, Var x) {
  const auto& X = g.value(x);
  require(X.rank() == 3, "mean_leading: expected rank-3 input, got " + shape_string(X.shape));
  const int B = X.dim(0);
  const std::size_t block = static_cast<std::size_t>(X.dim(1)) * X.dim(2);
  const T inv = T(1) / T(B);
  Tensor<T> out({X.dim(1), X.dim(2)});
  for (int n = 0; n < B; ++n) {
    const T* src = X.data.data() + n * block;
    for (std::size_t i = 0; i < block; ++i) out.data[i] += inv * src[i];
  }
  return g.record(std::move(out), {x}, [x, B, block, inv](Graph<T>& g, Var self) {
    const auto& dy = g.grad(self);
    auto& dx = g.grad(x);
    for (int n = 0; n < B; ++n) {
      T* dst = dx.data.data() + n * block;
      for (std::size_t i = 0; i < block; ++i) dst[i] += inv * dy.data[i];
    }
  });
}

template <typename T>
Var mean_rows(Graph<T>& g, Var x) {
  const auto& X = g.value(x);
  const int n = X.rows();
  Tensor<T> out({1, X.cols()});
  out.matrix() = X.matrix().colwise().mean();
  return g.record(std::move(out), {x}, [x, n](Graph<T>& g, Var self) {
    const auto dy = g.grad(self).matrix();
    g.grad(x).matrix().rowwise() += dy.row(0) / T(n);
  });
}

template <typename T>
Var broadcast_pairs(Graph<T>& g, Var a, Var b) {
  const auto& A = g.value(a);
  const auto& B = g.value(b);
  require(A.cols() == B.cols(), "broadcast_pairs: width mismatch");
  const int K = A.rows(), N = B.rows(), h = A.cols();
  Tensor<T> out({N * K, h});
  for (int n = 0; n < N; ++n) {
    const T* bn = B.data.data() + static_cast<std::size_t>(n) * h;
    for (int k = 0; k < K; ++k) {
      const T* ak = A.data.data() + static_cast<std::size_t>(k) * h;
      T* o = out.data.data() + (static_cast<std::size_t>(n) * K + k) * h;
      for (int c = 0; c < h; ++c) o[c] = ak[c] + bn[c];
    }
  }
  return g.record(std::move(out), {a, b}, [a, b, K, N, h](Graph<T>& g, Var self) {
    const auto& dy = g.grad(self);
    const bool need_a = g.requires_grad(a);
    const bool need_b = g.requires_grad(b);
    T* da = need_a ? g.grad(a).data.data() : nullptr;
    T* db = need_b ? g.grad(b).data.data() : nullptr;
    for (int n = 0; n < N; ++n) {
      for (int k = 0; k < K; ++k) {
        const T* src = dy.data.data() + (static_cast<std::size_t>(n) * K + k) * h;
        for (int c = 0; c < h; ++c) {
          if (da) da[static_cast<std::size_t>(k) * h + c] += src[c];
          if (db) db[static_cast<std::size_t>(n) * h + c] += src[c];
        }
      }
    }
  });
}

#define SOCS_INSTANTIATE_OPS(T)                                                  \
  template Var matmul<T>(Graph<T>&, Var, Var);                                   \
  template Var linear<T>(Graph<T>&, Var, Var, Var);                              \
  template Var add<T>(Graph<T>&, Var, Var);                                      \
  template Var mul<T>(Graph<T>&, Var, Var);                                      \
  template Var scale<T>(Graph<T>&, Var, T);                                      \
  template Var gelu<T>(Graph<T>&, Var);                                          \
  template Var exp<T>(Graph<T>&, Var);                                           \
  template Var clamp<T>(Graph<T>&, Var, T, T);                                   \
  template Var reshape<T>(Graph<T>&, Var, std::vector<int>);                     \
  template Var slice_cols<T>(Graph<T>&, Var, int, int);                          \
  template Var concat_cols<T>(Graph<T>&, Var, Var);                              \
  template Var sum_all<T>(Graph<T>&, Var);                                       \
  template Var layer_norm<T>(Graph<T>&, Var, Var, Var, T);                       \
  template Var self_attention<T>(Graph<T>&, Var, int);                           \
  template Var conv2d<T>(Graph<T>&, Var, Var, Var, int, int, int);               \
  template Var avg_pool_grid<T>(Graph<T>&, Var, int, int, int, int);             \
  template Var mean_leading<T>(Graph<T>&, Var);                                  \
  template Var mean_rows<T>(Graph<T>&, Var);                                     \
  template Var broadcast_pairs<T>(Graph<T>&, Var, Var);

SOCS_INSTANTIATE_OPS(float)
SOCS_INSTANTIATE_OPS(double)

}  // namespace socs::nn
