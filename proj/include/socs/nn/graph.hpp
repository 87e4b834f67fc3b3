#pragma once

#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "socs/tensor.hpp"

namespace socs::nn {

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
};

/// Owns every trainable array of a model. Insertion order is stable and
/// defines checkpoint layout.
template <typename T>
class ParameterStore {
 public:
  Parameter<T>& add(const std::string& name, std::vector<int> shape);
  Parameter<T>& get(const std::string& name);
  const Parameter<T>& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::vector<Parameter<T>*> all();
  std::vector<const Parameter<T>*> all() const;
  void zero_grad();
  std::size_t scalar_count() const;

 private:
  std::vector<std::unique_ptr<Parameter<T>>> params_;
  std::map<std::string, Parameter<T>*> index_;
};

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Reverse-mode tape. Each op appends a node holding its value and, when any
/// input needs a gradient, a closure that pushes the output gradient back to
/// its inputs. `backward` accumulates into `Parameter::grad`.
template <typename T>
class Graph {
 public:
  using Backward = std::function<void(Graph&, Var self)>;

  explicit Graph(bool track_gradients = true) : tracking_(track_gradients) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor<T> value);
  Var parameter(Parameter<T>& p);
  Var record(Tensor<T> value, std::initializer_list<Var> inputs, Backward backward);

  const Tensor<T>& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
  const std::vector<int>& shape(Var v) const { return value(v).shape; }
  /// Gradient buffer, zero-filled on first access.
  Tensor<T>& grad(Var v);
  bool requires_grad(Var v) const { return v.valid() && nodes_[static_cast<std::size_t>(v.id)].requires_grad; }
  bool tracking() const { return tracking_; }

  /// Seeds d(output)/d(output) = seed for a single-element output.
  void backward(Var output, T seed = T{1});

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    Backward backward;
    Parameter<T>* param = nullptr;
    bool requires_grad = false;
  };
  std::deque<Node> nodes_;
  bool tracking_;
};

extern template class ParameterStore<float>;
extern template class ParameterStore<double>;
extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace socs::nn
