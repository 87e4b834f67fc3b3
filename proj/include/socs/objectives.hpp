#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "socs/dataset_io.hpp"
#include "socs/model.hpp"
#include "socs/nn/graph.hpp"
#include "socs/rng.hpp"

namespace socs {

/// Column layout of one decoder row (one query, one slot): 3*H means ordered
/// h*3 + c, then the mode logits (h*3 + c, or h when shared), then the slot
/// logit.
struct DecoderLayout {
  int mixture_heads = 3;
  bool shared_mode_weights = false;

  int mode_logit_count() const { return shared_mode_weights ? mixture_heads : 3 * mixture_heads; }
  int width() const { return 3 * mixture_heads + mode_logit_count() + 1; }
  int mean_index(int h, int c) const { return h * 3 + c; }
  int mode_index(int h, int c) const { return 3 * mixture_heads + (shared_mode_weights ? h : h * 3 + c); }
  int slot_logit_index() const { return width() - 1; }
};

DecoderLayout decoder_layout(const ModelConfig& config);

struct LossWeights {
  double beta = 5e-7;
  double omega_task = 1e-4;
  double sigma_x = 0.08;
  int pixels_per_sequence = 512;  // N
};

/// Throws ConfigError unless every weight is positive (β and ω may be zero)
/// and N fits in `total_pixels`.
void validate(const LossWeights& weights, std::size_t total_pixels);

struct LossBreakdown {
  double recon = 0.0;
  double kl = 0.0;
  double task = 0.0;
  double total = 0.0;
};

/// log p(x | o_k) for one decoder row, summed over the three channels.
double per_slot_log_likelihood(std::span<const double> row, const std::array<double, 3>& target, double sigma_x,
                               const DecoderLayout& layout);

/// log[(1/K) sum_k softmax(slot logits)_k p(x | o_k)] for one pixel; `rows`
/// holds K consecutive decoder rows.
double slot_mixture_log_likelihood(std::span<const double> rows, int num_slots, const std::array<double, 3>& target,
                                   double sigma_x, const DecoderLayout& layout);

/// -(1/N) sum_n slot_mixture_log_likelihood. decoded [N*K, width], targets [N, 3].
double reconstruction_loss(const Tensor<double>& decoded, const Tensor<double>& targets, int num_slots,
                           double sigma_x, const DecoderLayout& layout);

/// Sum over slots and dims of KL(N(z, sigma^2) || N(0, 1)). DomainError on sigma <= 0.
double kl_loss(const Tensor<double>& z, const Tensor<double>& sigma);

/// Sum of L1 distances between waypoints; ValidationError on length mismatch.
double task_loss(const Tensor<double>& truth, const Tensor<double>& predicted);

/// N distinct flat pixel indices ((v*F + f)*H + r)*W + c, uniform without
/// replacement. ConfigError when N exceeds the pixel count.
std::vector<std::size_t> sample_pixel_queries(CounterRng& rng, std::size_t n, int views, int frames, int height,
                                              int width);

/// RGB targets [N, 3] gathered from frames [V, F, H, W, 3].
template <typename T>
Tensor<T> gather_targets(const SequenceRecord& record, std::span<const std::size_t> pixels);

namespace nn {

/// Scalar -(1/N) sum_n slot mixture log-likelihood with analytic backward
/// into `decoded` [N*K, width].
template <typename T>
Var mixture_nll(Graph<T>& g, Var decoded, const Tensor<T>& targets, int num_slots, double sigma_x,
                const DecoderLayout& layout);

/// Scalar KL to the unit normal, summed over all entries.
template <typename T>
Var kl_divergence(Graph<T>& g, Var z, Var sigma);

/// Scalar sum |a - target|.
template <typename T>
Var l1_distance(Graph<T>& g, Var a, const Tensor<T>& target);

}  // namespace nn

/// Forward (and, with `accumulate_gradients`, backward into the model's
/// parameter grads) over a batch. Each sequence draws its latent noise and
/// pixel sample from `rng.fork("sequence", i)`. Values are batch means.
template <typename T>
LossBreakdown total_loss(SocsModel<T>& model, std::span<const SequenceRecord* const> batch,
                         const LossWeights& weights, const CounterRng& rng, bool accumulate_gradients);

}  // namespace socs
