#pragma once

#include <map>
#include <string>

#include "socs/nn/graph.hpp"

namespace socs::nn {

struct AdamSettings {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Global-norm gradient clipping threshold; <= 0 disables clipping.
  double clip_norm = 1.0;
};

/// First-order adaptive-moment optimizer with bias correction.
template <typename T>
class Adam {
 public:
  explicit Adam(AdamSettings settings = {}) : settings_(settings) {}

  /// Applies one update from the accumulated gradients. Returns the global
  /// gradient norm measured before clipping.
  double step(ParameterStore<T>& params);

  long long steps_taken() const { return t_; }
  void set_steps_taken(long long t) { t_ = t; }
  const AdamSettings& settings() const { return settings_; }

  std::map<std::string, Tensor<T>>& first_moments() { return m_; }
  std::map<std::string, Tensor<T>>& second_moments() { return v_; }

 private:
  AdamSettings settings_;
  long long t_ = 0;
  std::map<std::string, Tensor<T>> m_;
  std::map<std::string, Tensor<T>> v_;
};

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace socs::nn
