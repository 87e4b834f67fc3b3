#include "socs/nn/graph.hpp"

#include "socs/error.hpp"

namespace socs {

std::string shape_string(const std::vector<int>& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

namespace nn {

template <typename T>
Parameter<T>& ParameterStore<T>::add(const std::string& name, std::vector<int> shape) {
  if (index_.count(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  auto p = std::make_unique<Parameter<T>>();
  p->name = name;
  p->value = Tensor<T>(shape);
  p->grad = Tensor<T>(std::move(shape));
  Parameter<T>& ref = *p;
  index_[name] = p.get();
  params_.push_back(std::move(p));
  return ref;
}

template <typename T>
Parameter<T>& ParameterStore<T>::get(const std::string& name) {
  const auto it = index_.find(name);
  if (it == index_.end()) throw ValidationError("unknown parameter '" + name + "'");
  return *it->second;
}

template <typename T>
const Parameter<T>& ParameterStore<T>::get(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw ValidationError("unknown parameter '" + name + "'");
  return *it->second;
}

template <typename T>
std::vector<Parameter<T>*> ParameterStore<T>::all() {
  std::vector<Parameter<T>*> out;
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

template <typename T>
std::vector<const Parameter<T>*> ParameterStore<T>::all() const {
  std::vector<const Parameter<T>*> out;
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

template <typename T>
void ParameterStore<T>::zero_grad() {
  for (auto& p : params_) std::fill(p->grad.data.begin(), p->grad.data.end(), T{0});
}

template <typename T>
std::size_t ParameterStore<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

template <typename T>
Var Graph<T>::constant(Tensor<T> value) {
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, false});
  return Var{static_cast<int>(nodes_.size() - 1)};
}

template <typename T>
Var Graph<T>::parameter(Parameter<T>& p) {
  nodes_.push_back(Node{p.value, {}, {}, &p, tracking_});
  return Var{static_cast<int>(nodes_.size() - 1)};
}

template <typename T>
Var Graph<T>::record(Tensor<T> value, std::initializer_list<Var> inputs, Backward backward) {
  bool needs = false;
  if (tracking_) {
    for (Var v : inputs) needs = needs || requires_grad(v);
  }
  nodes_.push_back(Node{std::move(value), {}, needs ? std::move(backward) : Backward{}, nullptr, needs});
  return Var{static_cast<int>(nodes_.size() - 1)};
}

template <typename T>
Tensor<T>& Graph<T>::grad(Var v) {
  Node& n = nodes_[static_cast<std::size_t>(v.id)];
  if (n.grad.size() != n.value.size()) n.grad = Tensor<T>(n.value.shape);
  return n.grad;
}

template <typename T>
void Graph<T>::backward(Var output, T seed) {
  if (value(output).size() != 1) {
    throw ValidationError("backward expects a scalar output, got shape " + shape_string(shape(output)));
  }
  if (!requires_grad(output)) return;
  grad(output)[0] += seed;
  for (int i = output.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, Var{i});
    if (n.param != nullptr) {
      auto& dst = n.param->grad.data;
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += n.grad.data[j];
    }
  }
}

template class ParameterStore<float>;
template class ParameterStore<double>;
template class Graph<float>;
template class Graph<double>;

}  // namespace nn
}  // namespace socs
