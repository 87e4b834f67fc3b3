#include "socs/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "socs/error.hpp"
#include "socs/nn/ops.hpp"

namespace socs {

namespace {

double log_sum_exp(const double* v, int n) {
  double mx = v[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, v[i]);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += std::exp(v[i] - mx);
  return mx + std::log(s);
}

struct Scratch {
  std::vector<double> logw, logn, slot_ll;
};

// log p(x | o_k) for one row; when `grad` is given, adds d/d(row) scaled by
// `weight` into it.
double row_log_likelihood(const double* row, const double* x, double sigma_x, const DecoderLayout& L, double* grad,
                          double weight, Scratch& s) {
  const int H = L.mixture_heads;
  const double inv_var = 1.0 / (sigma_x * sigma_x);
  const double log_norm = -std::log(sigma_x) - 0.5 * std::log(2.0 * std::numbers::pi);
  const double log_h = std::log(static_cast<double>(H));
  s.logw.resize(static_cast<std::size_t>(H));
  s.logn.resize(static_cast<std::size_t>(H));
  double total = 0.0;
  for (int c = 0; c < 3; ++c) {
    for (int h = 0; h < H; ++h) s.logw[static_cast<std::size_t>(h)] = row[L.mode_index(h, c)];
    const double lz = log_sum_exp(s.logw.data(), H);
    for (int h = 0; h < H; ++h) {
      const double d = x[c] - row[L.mean_index(h, c)];
      s.logw[static_cast<std::size_t>(h)] -= lz;
      s.logn[static_cast<std::size_t>(h)] = s.logw[static_cast<std::size_t>(h)] + log_norm - 0.5 * d * d * inv_var;
    }
    const double lc = log_sum_exp(s.logn.data(), H);
    total += lc - log_h;
    if (grad != nullptr) {
      for (int h = 0; h < H; ++h) {
        const double gamma = std::exp(s.logn[static_cast<std::size_t>(h)] - lc);
        const double w = std::exp(s.logw[static_cast<std::size_t>(h)]);
        grad[L.mean_index(h, c)] += weight * gamma * (x[c] - row[L.mean_index(h, c)]) * inv_var;
        grad[L.mode_index(h, c)] += weight * (gamma - w);
      }
    }
  }
  return total;
}

double pixel_log_likelihood(const double* rows, int K, const double* x, double sigma_x, const DecoderLayout& L,
                            double* grad, double weight, Scratch& s) {
  const int width = L.width();
  const int a = L.slot_logit_index();
  s.slot_ll.resize(static_cast<std::size_t>(K));
  std::vector<double> logits(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) logits[static_cast<std::size_t>(k)] = rows[k * width + a];
  const double lz = log_sum_exp(logits.data(), K);
  std::vector<double> joint(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    s.slot_ll[static_cast<std::size_t>(k)] = row_log_likelihood(rows + k * width, x, sigma_x, L, nullptr, 0.0, s);
    joint[static_cast<std::size_t>(k)] = logits[static_cast<std::size_t>(k)] - lz + s.slot_ll[static_cast<std::size_t>(k)];
  }
  const double lj = log_sum_exp(joint.data(), K);
  if (grad != nullptr) {
    for (int k = 0; k < K; ++k) {
      const double r = std::exp(joint[static_cast<std::size_t>(k)] - lj);
      const double alpha = std::exp(logits[static_cast<std::size_t>(k)] - lz);
      grad[k * width + a] += weight * (r - alpha);
      row_log_likelihood(rows + k * width, x, sigma_x, L, grad + k * width, weight * r, s);
    }
  }
  return lj - std::log(static_cast<double>(K));
}

void check_row(std::span<const double> row, const DecoderLayout& L, std::size_t count) {
  if (row.size() != static_cast<std::size_t>(L.width()) * count) {
    throw ValidationError("decoder rows: expected " + std::to_string(count) + " x " + std::to_string(L.width()) +
                          " values, got " + std::to_string(row.size()));
  }
}

}  // namespace

DecoderLayout decoder_layout(const ModelConfig& config) {
  return DecoderLayout{config.mixture_heads, config.shared_mode_weights};
}

void validate(const LossWeights& w, std::size_t total_pixels) {
  if (!(w.beta >= 0.0) || !std::isfinite(w.beta)) throw ConfigError("beta must be finite and >= 0");
  if (!(w.omega_task >= 0.0) || !std::isfinite(w.omega_task)) throw ConfigError("omega_task must be finite and >= 0");
  if (!(w.sigma_x > 0.0)) throw ConfigError("sigma_x must be > 0");
  if (w.pixels_per_sequence < 1) throw ConfigError("pixels_per_sequence must be >= 1");
  if (static_cast<std::size_t>(w.pixels_per_sequence) > total_pixels) {
    throw ConfigError("pixels_per_sequence = " + std::to_string(w.pixels_per_sequence) + " exceeds the " +
                      std::to_string(total_pixels) + " pixels of a sequence");
  }
}

double per_slot_log_likelihood(std::span<const double> row, const std::array<double, 3>& target, double sigma_x,
                               const DecoderLayout& layout) {
  check_row(row, layout, 1);
  Scratch s;
  return row_log_likelihood(row.data(), target.data(), sigma_x, layout, nullptr, 0.0, s);
}

double slot_mixture_log_likelihood(std::span<const double> rows, int num_slots, const std::array<double, 3>& target,
                                   double sigma_x, const DecoderLayout& layout) {
  check_row(rows, layout, static_cast<std::size_t>(num_slots));
  Scratch s;
  return pixel_log_likelihood(rows.data(), num_slots, target.data(), sigma_x, layout, nullptr, 0.0, s);
}

double reconstruction_loss(const Tensor<double>& decoded, const Tensor<double>& targets, int num_slots,
                           double sigma_x, const DecoderLayout& layout) {
  const std::size_t n = static_cast<std::size_t>(targets.rows());
  if (targets.cols() != 3 || n == 0) throw ValidationError("targets must be [N >= 1, 3]");
  check_row(decoded.span(), layout, n * static_cast<std::size_t>(num_slots));
  Scratch s;
  double sum = 0.0;
  const std::size_t stride = static_cast<std::size_t>(num_slots) * layout.width();
  for (std::size_t i = 0; i < n; ++i) {
    sum += pixel_log_likelihood(decoded.data.data() + i * stride, num_slots, targets.data.data() + 3 * i, sigma_x,
                                layout, nullptr, 0.0, s);
  }
  return -sum / static_cast<double>(n);
}

double kl_loss(const Tensor<double>& z, const Tensor<double>& sigma) {
  if (z.size() != sigma.size()) throw ValidationError("kl_loss: z and sigma sizes differ");
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double s = sigma.data[i];
    if (!(s > 0.0)) throw DomainError("kl_loss: sigma must be > 0, got " + format_double(s));
    sum += 0.5 * (s * s + z.data[i] * z.data[i] - 1.0 - 2.0 * std::log(s));
  }
  return sum;
}

double task_loss(const Tensor<double>& truth, const Tensor<double>& predicted) {
  if (truth.size() != predicted.size()) {
    throw ValidationError("task_loss: " + std::to_string(truth.size() / 2) + " ground-truth waypoints vs " +
                          std::to_string(predicted.size() / 2) + " predicted");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) sum += std::abs(truth.data[i] - predicted.data[i]);
  return sum;
}

std::vector<std::size_t> sample_pixel_queries(CounterRng& rng, std::size_t n, int views, int frames, int height,
                                              int width) {
  const std::size_t total = static_cast<std::size_t>(views) * frames * height * width;
  if (n > total) {
    throw ConfigError("cannot sample " + std::to_string(n) + " pixels from a sequence of " + std::to_string(total));
  }
  std::vector<std::size_t> idx(total);
  for (std::size_t i = 0; i < total; ++i) idx[i] = i;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(total - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(n);
  return idx;
}

template <typename T>
Tensor<T> gather_targets(const SequenceRecord& record, std::span<const std::size_t> pixels) {
  Tensor<T> out({static_cast<int>(pixels.size()), 3});
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    for (int c = 0; c < 3; ++c) out.data[3 * i + c] = static_cast<T>(record.frames.data.at(3 * pixels[i] + c));
  }
  return out;
}

template Tensor<float> gather_targets<float>(const SequenceRecord&, std::span<const std::size_t>);
template Tensor<double> gather_targets<double>(const SequenceRecord&, std::span<const std::size_t>);

namespace nn {

template <typename T>
Var mixture_nll(Graph<T>& g, Var decoded, const Tensor<T>& targets, int num_slots, double sigma_x,
                const DecoderLayout& layout) {
  const auto& D = g.value(decoded);
  const std::size_t n = static_cast<std::size_t>(targets.rows());
  if (targets.cols() != 3 || n == 0) throw ValidationError("mixture_nll: targets must be [N >= 1, 3]");
  const std::size_t stride = static_cast<std::size_t>(num_slots) * layout.width();
  if (D.size() != n * stride) {
    throw ValidationError("mixture_nll: decoded " + shape_string(D.shape) + " does not match " + std::to_string(n) +
                          " pixels x " + std::to_string(num_slots) + " slots x " + std::to_string(layout.width()));
  }
  const bool want_grad = g.requires_grad(decoded);
  auto grad = std::make_shared<std::vector<double>>(want_grad ? D.size() : 0, 0.0);
  std::vector<double> rows(stride);
  Scratch s;
  double sum = 0.0;
  const double w = -1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(D.data.data() + i * stride, stride, rows.begin());
    const double x[3] = {static_cast<double>(targets.data[3 * i]), static_cast<double>(targets.data[3 * i + 1]),
                         static_cast<double>(targets.data[3 * i + 2])};
    sum += pixel_log_likelihood(rows.data(), num_slots, x, sigma_x, layout,
                                want_grad ? grad->data() + i * stride : nullptr, w, s);
  }
  Tensor<T> out({1}, std::vector<T>{static_cast<T>(-sum / static_cast<double>(n))});
  return g.record(std::move(out), {decoded}, [decoded, grad](Graph<T>& g, Var self) {
    const double seed = static_cast<double>(g.grad(self).data[0]);
    auto& dd = g.grad(decoded);
    for (std::size_t i = 0; i < dd.size(); ++i) dd.data[i] += static_cast<T>(seed * (*grad)[i]);
  });
}

template <typename T>
Var kl_divergence(Graph<T>& g, Var z, Var sigma) {
  const auto& Z = g.value(z);
  const auto& S = g.value(sigma);
  if (Z.size() != S.size()) throw ValidationError("kl_divergence: z and sigma sizes differ");
  double sum = 0.0;
  for (std::size_t i = 0; i < Z.size(); ++i) {
    const double s = S.data[i];
    if (!(s > 0.0)) throw DomainError("kl_divergence: sigma must be > 0");
    const double m = Z.data[i];
    sum += 0.5 * (s * s + m * m - 1.0 - 2.0 * std::log(s));
  }
  return g.record(Tensor<T>({1}, std::vector<T>{static_cast<T>(sum)}), {z, sigma}, [z, sigma](Graph<T>& g, Var self) {
    const T seed = g.grad(self).data[0];
    if (g.requires_grad(z)) {
      auto& dz = g.grad(z);
      const auto& Zv = g.value(z);
      for (std::size_t i = 0; i < dz.size(); ++i) dz.data[i] += seed * Zv.data[i];
    }
    if (g.requires_grad(sigma)) {
      auto& ds = g.grad(sigma);
      const auto& Sv = g.value(sigma);
      for (std::size_t i = 0; i < ds.size(); ++i) ds.data[i] += seed * (Sv.data[i] - T(1) / Sv.data[i]);
    }
  });
}

template <typename T>
Var l1_distance(Graph<T>& g, Var a, const Tensor<T>& target) {
  const auto& A = g.value(a);
  if (A.size() != target.size()) {
    throw ValidationError("l1_distance: " + shape_string(A.shape) + " vs " + shape_string(target.shape));
  }
  double sum = 0.0;
  auto sign = std::make_shared<std::vector<T>>(A.size());
  for (std::size_t i = 0; i < A.size(); ++i) {
    const double d = static_cast<double>(A.data[i]) - static_cast<double>(target.data[i]);
    sum += std::abs(d);
    (*sign)[i] = d > 0 ? T(1) : (d < 0 ? T(-1) : T(0));
  }
  return g.record(Tensor<T>({1}, std::vector<T>{static_cast<T>(sum)}), {a}, [a, sign](Graph<T>& g, Var self) {
    const T seed = g.grad(self).data[0];
    auto& da = g.grad(a);
    for (std::size_t i = 0; i < da.size(); ++i) da.data[i] += seed * (*sign)[i];
  });
}

template Var mixture_nll<float>(Graph<float>&, Var, const Tensor<float>&, int, double, const DecoderLayout&);
template Var mixture_nll<double>(Graph<double>&, Var, const Tensor<double>&, int, double, const DecoderLayout&);
template Var kl_divergence<float>(Graph<float>&, Var, Var);
template Var kl_divergence<double>(Graph<double>&, Var, Var);
template Var l1_distance<float>(Graph<float>&, Var, const Tensor<float>&);
template Var l1_distance<double>(Graph<double>&, Var, const Tensor<double>&);

}  // namespace nn

template <typename T>
LossBreakdown total_loss(SocsModel<T>& model, std::span<const SequenceRecord* const> batch,
                         const LossWeights& weights, const CounterRng& rng, bool accumulate_gradients) {
  if (batch.empty()) throw ValidationError("total_loss: empty batch");
  const ModelConfig& cfg = model.config();
  const DecoderLayout layout = decoder_layout(cfg);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  LossBreakdown out;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const SequenceRecord& rec = *batch[i];
    validate(weights, static_cast<std::size_t>(rec.num_views()) * rec.num_frames() * rec.pixels_per_image());
    CounterRng seq_rng = rng.fork("sequence", i);
    CounterRng noise_rng = seq_rng.fork("latent_noise");
    CounterRng pixel_rng = seq_rng.fork("pixels");

    nn::Graph<T> g(accumulate_gradients);
    const ImageBatch<T> inputs = model.prepare(rec);
    const auto slots = model.infer_slots(g, model.embed_positions(g, model.encode_frames(g, inputs.images), inputs));
    const nn::Var latents = model.sample_latents(g, slots, LatentMode::sample, noise_rng);
    const auto pixels = sample_pixel_queries(pixel_rng, static_cast<std::size_t>(weights.pixels_per_sequence),
                                             rec.num_views(), rec.num_frames(), rec.height(), rec.width());
    const nn::Var decoded = model.decode_pixels(g, latents, model.pixel_queries(inputs, rec.num_frames(), pixels));
    const nn::Var recon =
        nn::mixture_nll(g, decoded, gather_targets<T>(rec, pixels), cfg.num_slots, weights.sigma_x, layout);
    const nn::Var kl = nn::kl_divergence(g, slots.z, slots.sigma);
    nn::Var total = nn::add(g, recon, nn::scale(g, kl, static_cast<T>(weights.beta)));
    double task_value = 0.0;
    if (cfg.use_waypoint_head) {
      const nn::Var task = nn::l1_distance(g, model.predict_waypoints(g, slots.pooled), rec.waypoints.template cast<T>());
      total = nn::add(g, total, nn::scale(g, task, static_cast<T>(weights.omega_task)));
      task_value = static_cast<double>(g.value(task).data[0]);
    }
    const double recon_value = static_cast<double>(g.value(recon).data[0]);
    const double kl_value = static_cast<double>(g.value(kl).data[0]);
    out.recon += inv_b * recon_value;
    out.kl += inv_b * kl_value;
    out.task += inv_b * task_value;
    out.total += inv_b * (recon_value + weights.omega_task * task_value + weights.beta * kl_value);
    if (accumulate_gradients) g.backward(total, static_cast<T>(inv_b));
  }
  return out;
}

template LossBreakdown total_loss<float>(SocsModel<float>&, std::span<const SequenceRecord* const>,
                                         const LossWeights&, const CounterRng&, bool);
template LossBreakdown total_loss<double>(SocsModel<double>&, std::span<const SequenceRecord* const>,
                                          const LossWeights&, const CounterRng&, bool);

}  // namespace socs
