#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "socs/config_file.hpp"
#include "socs/dataset_io.hpp"
#include "socs/nn/graph.hpp"
#include "socs/nn/layers.hpp"
#include "socs/nn/optim.hpp"
#include "socs/rng.hpp"

namespace socs {

struct ModelConfig {
  int num_slots = 21;  // K
  int slot_grid_h = 3;
  int slot_grid_w = 7;
  int latent_dim = 32;  // m
  int image_height = 48;
  int image_width = 112;
  int num_cameras = 2;
  int cnn_stages = 4;
  int feature_dim = 128;
  int transformer_layers = 4;
  int transformer_heads = 4;
  int feedforward_dim = 256;
  int waypoint_layers = 2;
  int waypoint_count = 16;
  int recon_layers = 3;
  int recon_hidden = 256;
  int mixture_heads = 3;  // H
  double pixel_sigma = 0.08;
  bool use_viewpoint = true;
  bool use_waypoint_head = true;
  bool shared_mode_weights = false;
  /// Divides camera translations in the view encoding (world extent, meters).
  double translation_scale = 30.0;

  int patch_grid_h() const;
  int patch_grid_w() const;
  int pre_pool_layers() const { return (transformer_layers + 1) / 2; }
  int view_code_dim() const { return use_viewpoint ? 12 : num_cameras; }
  /// Patch/pixel position code: (x, y, t, view code).
  int position_dim() const { return 3 + view_code_dim(); }
  int mode_logit_count() const { return shared_mode_weights ? mixture_heads : 3 * mixture_heads; }
  /// Decoder values per (query, slot): H*3 means, mode logits, one slot logit.
  int decoder_width() const { return 3 * mixture_heads + mode_logit_count() + 1; }
};

/// Full-scale hyperparameters (96x224 images, 3 cameras, 8 frames).
ModelConfig full_model_config();
/// Desk-scale defaults: full-scale slot grid and latent size, smaller transformer
/// and decoder.
ModelConfig desk_model_config();

/// Throws ConfigError on inconsistent values (e.g. a patch grid that cannot be
/// average-pooled to the slot grid).
void validate(const ModelConfig& config);
ModelConfig model_config_from(const KeyValueConfig& kv, ModelConfig base = desk_model_config());
KeyValueConfig to_key_values(const ModelConfig& config);
/// Names of fields that differ between two configs.
std::vector<std::string> config_differences(const ModelConfig& a, const ModelConfig& b);

/// Flattened top three rows of a row-major 4x4 camera-to-world matrix with the
/// translation column divided by `translation_scale`.
std::vector<double> view_embedding(std::span<const double> c2w, double translation_scale);

/// Per-image inputs in model order (image i = view * F + frame).
template <typename T>
struct ImageBatch {
  Tensor<T> images;      // [I, H, W, 3]
  Tensor<T> view_codes;  // [I, view_code_dim]
  std::vector<T> times;  // [I], normalized to [0, 1] over the sequence
};

struct SlotPosteriorValues {
  Tensor<double> z;      // [K, m]
  Tensor<double> sigma;  // [K, m]
};

struct SegmentationResult {
  Tensor<float> soft_masks;             // [V, F, H, W, K]
  Tensor<std::int32_t> hard_labels;     // [V, F, H, W]
};

enum class LatentMode { sample, mean };

template <typename T>
class SocsModel {
 public:
  struct Slots {
    nn::Var z;       // [K, m]
    nn::Var sigma;   // [K, m]
    nn::Var pooled;  // [I*K, d], encoder output after spatial pooling, before the image mean
  };

  SocsModel(ModelConfig config, std::uint64_t init_seed);

  const ModelConfig& config() const { return config_; }
  nn::ParameterStore<T>& parameters() { return params_; }
  const nn::ParameterStore<T>& parameters() const { return params_; }

  ImageBatch<T> prepare(const SequenceRecord& record) const;

  /// Shared CNN over every image: [I, H, W, 3] -> [I, H_p*W_p, d].
  nn::Var encode_frames(nn::Graph<T>& g, const Tensor<T>& images) const;
  /// Concatenates (patch xy, t, view code) to each patch feature and projects
  /// to the transformer width: -> [I*H_p*W_p, d].
  nn::Var embed_positions(nn::Graph<T>& g, nn::Var patches, const ImageBatch<T>& batch) const;
  /// The raw position code of every token, [I*H_p*W_p, position_dim].
  Tensor<T> position_codes(const ImageBatch<T>& batch) const;
  Slots infer_slots(nn::Graph<T>& g, nn::Var tokens) const;
  nn::Var sample_latents(nn::Graph<T>& g, const Slots& slots, LatentMode mode, CounterRng& rng) const;
  /// latents [K, m], queries [Q, position_dim] -> [Q*K, decoder_width]; row
  /// q*K + k holds slot k's prediction for query q.
  nn::Var decode_pixels(nn::Graph<T>& g, nn::Var latents, const Tensor<T>& queries) const;
  /// tokens [R, d] -> [waypoint_count, 2].
  nn::Var predict_waypoints(nn::Graph<T>& g, nn::Var pooled_tokens) const;

  /// Query codes for flat pixel indices ((v*F + f)*H + r)*W + c.
  Tensor<T> pixel_queries(const ImageBatch<T>& batch, int num_frames, std::span<const std::size_t> pixels) const;

  /// Encoder through slot posterior, evaluated without gradient tracking.
  SlotPosteriorValues posterior(const SequenceRecord& record) const;
  /// Full-frame segmentation with posterior means, decoded in chunks.
  SegmentationResult segment(const SequenceRecord& record, std::size_t chunk_pixels = 4096) const;

 private:
  ModelConfig config_;
  nn::ParameterStore<T> params_;
  std::vector<nn::Conv2d<T>> convs_;
  nn::Linear<T> token_proj_;
  std::vector<nn::TransformerBlock<T>> encoder_;
  nn::LayerNorm<T> encoder_norm_;
  nn::Linear<T> slot_hidden_;
  nn::Linear<T> slot_out_;
  nn::Parameter<T>* dec_latent_ = nullptr;  // [m, hidden], no bias
  nn::Linear<T> dec_query_;
  std::vector<nn::Linear<T>> dec_hidden_;
  nn::Linear<T> dec_out_;
  std::vector<nn::TransformerBlock<T>> waypoint_blocks_;
  nn::LayerNorm<T> waypoint_norm_;
  nn::Linear<T> waypoint_out_;
};

extern template class SocsModel<float>;
extern template class SocsModel<double>;

/// Copies parameter values between models of possibly different precision.
template <typename Dst, typename Src>
void copy_parameters(SocsModel<Dst>& dst, const SocsModel<Src>& src);

// ---------------------------------------------------------------------------
// Checkpoints reuse the record container: `param.<name>`, optional
// `adam.m.<name>` / `adam.v.<name>`, `model_config` (key/value text) and
// `step`.
// ---------------------------------------------------------------------------

struct Checkpoint {
  ModelConfig config;
  long long step = 0;
  Container container;
};

void save_checkpoint(const std::filesystem::path& path, const SocsModel<float>& model,
                     const nn::Adam<float>* optimizer, long long step);
Checkpoint read_checkpoint(const std::filesystem::path& path);
/// Loads parameters (and optimizer moments, if requested and present).
void restore_checkpoint(const Checkpoint& ckpt, SocsModel<float>& model, nn::Adam<float>* optimizer);

}  // namespace socs
