#include <doctest.h>

#include <cmath>
#include <functional>

#include "socs/error.hpp"
#include "socs/nn/layers.hpp"
#include "socs/nn/ops.hpp"
#include "socs/nn/optim.hpp"

using namespace socs;
using namespace socs::nn;

namespace {

using Builder = std::function<Var(Graph<double>&, const std::vector<Var>&)>;

// Random-weighted sum of the op output so every output element matters.
double scalar_of(Graph<double>& g, Var out, std::uint64_t seed, Var* loss = nullptr) {
  CounterRng r(seed, 0, "proj");
  Tensor<double> w(g.shape(out));
  for (auto& v : w.data) v = r.uniform(-1.0, 1.0);
  const Var s = sum_all(g, mul(g, out, g.constant(std::move(w))));
  if (loss != nullptr) *loss = s;
  return g.value(s).data[0];
}

double max_grad_error(ParameterStore<double>& store, const Builder& build, double h = 1e-6) {
  store.zero_grad();
  {
    Graph<double> g;
    std::vector<Var> in;
    for (auto* p : store.all()) in.push_back(g.parameter(*p));
    Var loss;
    scalar_of(g, build(g, in), 9, &loss);
    g.backward(loss);
  }
  double worst = 0.0;
  for (auto* p : store.all()) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double orig = p->value.data[i];
      auto eval = [&](double v) {
        p->value.data[i] = v;
        Graph<double> g(false);
        std::vector<Var> in;
        for (auto* q : store.all()) in.push_back(g.parameter(*q));
        return scalar_of(g, build(g, in), 9);
      };
      const double num = (eval(orig + h) - eval(orig - h)) / (2 * h);
      p->value.data[i] = orig;
      const double ana = p->grad.data[i];
      worst = std::max(worst, std::abs(num - ana) / std::max(1.0, std::abs(num) + std::abs(ana)));
    }
  }
  return worst;
}

Parameter<double>& random_param(ParameterStore<double>& s, const std::string& name, std::vector<int> shape,
                                double lo = -1.0, double hi = 1.0) {
  auto& p = s.add(name, std::move(shape));
  CounterRng r(17, 0, name);
  for (auto& v : p.value.data) v = r.uniform(lo, hi);
  return p;
}

}  // namespace

TEST_CASE("elementwise and matrix op gradients") {
  ParameterStore<double> s;
  random_param(s, "a", {3, 4});
  random_param(s, "b", {4, 5});
  random_param(s, "c", {3, 4});
  random_param(s, "bias", {5});
  CHECK(max_grad_error(s, [](auto& g, auto& v) { return matmul(g, v[0], v[1]); }) < 1e-7);
  CHECK(max_grad_error(s, [](auto& g, auto& v) { return linear(g, v[0], v[1], v[3]); }) < 1e-7);
  CHECK(max_grad_error(s, [](auto& g, auto& v) { return add(g, v[0], v[2]); }) < 1e-7);
  CHECK(max_grad_error(s, [](auto& g, auto& v) { return mul(g, v[0], v[2]); }) < 1e-7);
  CHECK(max_grad_error(s, [](auto& g, auto& v) { return scale(g, v[0], 2.5); }) < 1e-7);
  CHECK(max_grad_error(s, [](auto& g, auto& v) { return gelu(g, v[0]); }) < 1e-7);
  CHECK(max_grad_error(s, [](auto& g, auto& v) { return exp(g, v[0]); }) < 1e-7);
  CHECK(max_grad_error(s, [](auto& g, auto& v) { return clamp(g, v[0], -0.5, 0.5); }) < 1e-7);
  CHECK(max_grad_error(s, [](auto& g, auto& v) { return reshape(g, v[0], {2, 6}); }) < 1e-7);
  CHECK(max_grad_error(s, [](auto& g, auto& v) { return slice_cols(g, v[0], 1, 2); }) < 1e-7);
  CHECK(max_grad_error(s, [](auto& g, auto& v) { return concat_cols(g, v[0], v[2]); }) < 1e-7);
  CHECK(max_grad_error(s, [](auto& g, auto& v) { return mean_rows(g, v[0]); }) < 1e-7);
}

TEST_CASE("layer norm and attention gradients") {
  ParameterStore<double> s;
  random_param(s, "x", {5, 8});
  random_param(s, "gamma", {8}, 0.5, 1.5);
  random_param(s, "beta", {8});
  random_param(s, "qkv", {6, 24});
  CHECK(max_grad_error(s, [](auto& g, auto& v) { return layer_norm(g, v[0], v[1], v[2]); }) < 1e-6);
  CHECK(max_grad_error(s, [](auto& g, auto& v) { return self_attention(g, v[3], 4); }) < 1e-6);
  CHECK(max_grad_error(s, [](auto& g, auto& v) { return self_attention(g, v[3], 1); }) < 1e-6);
}

TEST_CASE("conv, pooling and broadcast gradients") {
  ParameterStore<double> s;
  random_param(s, "x", {2, 5, 6, 3});
  random_param(s, "w", {3 * 3 * 3, 4});
  random_param(s, "b", {4});
  random_param(s, "grid", {2, 4 * 6, 3});
  random_param(s, "a", {3, 4});
  random_param(s, "q", {5, 4});
  CHECK(max_grad_error(s, [](auto& g, auto& v) { return conv2d(g, v[0], v[1], v[2], 3, 2, 1); }) < 1e-6);
  CHECK(max_grad_error(s, [](auto& g, auto& v) { return conv2d(g, v[0], v[1], v[2], 3, 1, 1); }) < 1e-6);
  CHECK(max_grad_error(s, [](auto& g, auto& v) { return avg_pool_grid(g, v[3], 4, 6, 2, 3); }) < 1e-7);
  CHECK(max_grad_error(s, [](auto& g, auto& v) { return mean_leading(g, v[3]); }) < 1e-7);
  CHECK(max_grad_error(s, [](auto& g, auto& v) { return broadcast_pairs(g, v[4], v[5]); }) < 1e-7);
}

TEST_CASE("conv2d matches a direct convolution") {
  ParameterStore<double> s;
  auto& x = random_param(s, "x", {1, 4, 5, 2});
  auto& w = random_param(s, "w", {3 * 3 * 2, 3});
  auto& b = random_param(s, "b", {3});
  Graph<double> g(false);
  const auto& y = g.value(conv2d(g, g.parameter(x), g.parameter(w), g.parameter(b), 3, 2, 1));
  REQUIRE(y.shape == std::vector<int>{1, 2, 3, 3});
  for (int oy = 0; oy < 2; ++oy) {
    for (int ox = 0; ox < 3; ++ox) {
      for (int o = 0; o < 3; ++o) {
        double acc = b.value.data[o];
        for (int ky = 0; ky < 3; ++ky) {
          for (int kx = 0; kx < 3; ++kx) {
            const int iy = oy * 2 - 1 + ky, ix = ox * 2 - 1 + kx;
            if (iy < 0 || ix < 0 || iy >= 4 || ix >= 5) continue;
            for (int c = 0; c < 2; ++c) {
              acc += x.value.data[(iy * 5 + ix) * 2 + c] * w.value.data[((ky * 3 + kx) * 2 + c) * 3 + o];
            }
          }
        }
        CHECK(y.data[(oy * 3 + ox) * 3 + o] == doctest::Approx(acc).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("attention rows are convex combinations of values") {
  ParameterStore<double> s;
  auto& qkv = random_param(s, "qkv", {4, 6});
  for (int r = 0; r < 4; ++r) {
    for (int c = 4; c < 6; ++c) qkv.value.data[r * 6 + c] = 3.0;  // constant v
  }
  Graph<double> g(false);
  const auto& out = g.value(self_attention(g, g.parameter(qkv), 1));
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 2; ++c) CHECK(out.data[r * 2 + c] == doctest::Approx(3.0));
  }
}

TEST_CASE("transformer block gradient") {
  ParameterStore<double> s;
  CounterRng rng(3, 0, "init");
  TransformerBlock<double> block(s, "blk", 8, 2, 12, rng);
  random_param(s, "x", {5, 8});
  CHECK(max_grad_error(s, [&](auto& g, auto& v) { return block(g, v.back()); }) < 1e-6);
}

TEST_CASE("shape errors are validation errors") {
  Graph<double> g;
  const Var a = g.constant(Tensor<double>({2, 3}));
  const Var b = g.constant(Tensor<double>({4, 2}));
  CHECK_THROWS_AS(matmul(g, a, b), ValidationError);
  CHECK_THROWS_AS(add(g, a, b), ValidationError);
}

TEST_CASE("parameter store") {
  ParameterStore<float> s;
  s.add("w", {2, 3});
  CHECK_THROWS(s.add("w", {1}));
  CHECK(s.scalar_count() == 6);
  CHECK(s.contains("w"));
  CHECK_THROWS(s.get("missing"));
}

TEST_CASE("adam minimizes a quadratic and clips the global norm") {
  ParameterStore<double> s;
  auto& p = s.add("p", {2});
  p.value.data = {3.0, -2.0};
  AdamSettings settings;
  settings.learning_rate = 0.05;
  Adam<double> opt(settings);
  for (int i = 0; i < 2000; ++i) {
    p.grad.data = {2 * p.value.data[0], 2 * p.value.data[1]};
    opt.step(s);
  }
  CHECK(std::abs(p.value.data[0]) < 1e-2);
  CHECK(std::abs(p.value.data[1]) < 1e-2);

  // First step of Adam moves each coordinate by ~lr regardless of scale.
  ParameterStore<double> t;
  auto& q = t.add("q", {2});
  q.grad.data = {300.0, 400.0};
  Adam<double> one(settings);
  const double norm = one.step(t);
  CHECK(norm == doctest::Approx(500.0));
  CHECK(q.value.data[0] == doctest::Approx(-0.05).epsilon(1e-6));
  CHECK(one.steps_taken() == 1);
}
