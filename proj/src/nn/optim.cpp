#include "socs/nn/optim.hpp"

#include <cmath>

namespace socs::nn {

template <typename T>
double Adam<T>::step(ParameterStore<T>& params) {
  double sq = 0.0;
  for (const Parameter<T>* p : params.all()) {
    for (T v : p->grad.data) sq += static_cast<double>(v) * static_cast<double>(v);
  }
  const double norm = std::sqrt(sq);
  const double clip = (settings_.clip_norm > 0.0 && norm > settings_.clip_norm) ? settings_.clip_norm / norm : 1.0;

  ++t_;
  const double bc1 = 1.0 - std::pow(settings_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(settings_.beta2, static_cast<double>(t_));
  const double lr = settings_.learning_rate;
  for (Parameter<T>* p : params.all()) {
    auto& m = m_[p->name];
    auto& v = v_[p->name];
    if (m.size() != p->value.size()) m = Tensor<T>(p->value.shape);
    if (v.size() != p->value.size()) v = Tensor<T>(p->value.shape);
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double gi = static_cast<double>(p->grad.data[i]) * clip;
      const double mi = settings_.beta1 * static_cast<double>(m.data[i]) + (1.0 - settings_.beta1) * gi;
      const double vi = settings_.beta2 * static_cast<double>(v.data[i]) + (1.0 - settings_.beta2) * gi * gi;
      m.data[i] = static_cast<T>(mi);
      v.data[i] = static_cast<T>(vi);
      p->value.data[i] -= static_cast<T>(lr * (mi / bc1) / (std::sqrt(vi / bc2) + settings_.epsilon));
    }
  }
  return norm;
}

template class Adam<float>;
template class Adam<double>;

}  // namespace socs::nn
