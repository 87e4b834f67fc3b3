#include "socs/model.hpp"

#include <algorithm>
#include <cmath>

#include "socs/error.hpp"
#include "socs/nn/ops.hpp"

namespace socs {

using nn::Graph;
using nn::Var;

namespace {

int halve_ceil(int n, int times) {
  for (int i = 0; i < times; ++i) n = (n + 1) / 2;
  return n;
}

void positive(int v, const char* name) {
  if (v < 1) throw ConfigError(std::string(name) + " must be >= 1, got " + std::to_string(v));
}

}  // namespace

int ModelConfig::patch_grid_h() const { return halve_ceil(image_height, cnn_stages); }
int ModelConfig::patch_grid_w() const { return halve_ceil(image_width, cnn_stages); }

ModelConfig full_model_config() {
  ModelConfig c;
  c.image_height = 96;
  c.image_width = 224;
  c.num_cameras = 3;
  c.feature_dim = 512;
  c.transformer_layers = 6;
  c.transformer_heads = 4;
  c.feedforward_dim = 1024;
  c.recon_hidden = 1536;
  return c;
}

ModelConfig desk_model_config() { return ModelConfig{}; }

void validate(const ModelConfig& c) {
  positive(c.num_slots, "num_slots");
  positive(c.latent_dim, "latent_dim");
  positive(c.image_height, "image_height");
  positive(c.image_width, "image_width");
  positive(c.num_cameras, "num_cameras");
  positive(c.cnn_stages, "cnn_stages");
  positive(c.feature_dim, "feature_dim");
  positive(c.transformer_layers, "transformer_layers");
  positive(c.transformer_heads, "transformer_heads");
  positive(c.feedforward_dim, "feedforward_dim");
  positive(c.waypoint_layers, "waypoint_layers");
  positive(c.waypoint_count, "waypoint_count");
  positive(c.recon_hidden, "recon_hidden");
  positive(c.mixture_heads, "mixture_heads");
  if (c.recon_layers < 2) throw ConfigError("recon_layers must be >= 2");
  if (!(c.pixel_sigma > 0.0)) throw ConfigError("pixel_sigma must be > 0");
  if (!(c.translation_scale > 0.0)) throw ConfigError("translation_scale must be > 0");
  if (c.feature_dim % c.transformer_heads != 0) throw ConfigError("feature_dim must be divisible by transformer_heads");
  if (c.slot_grid_h * c.slot_grid_w != c.num_slots) {
    throw ConfigError("slot grid " + std::to_string(c.slot_grid_h) + "x" + std::to_string(c.slot_grid_w) +
                      " does not hold num_slots = " + std::to_string(c.num_slots));
  }
  const int ph = c.patch_grid_h();
  const int pw = c.patch_grid_w();
  if (c.slot_grid_h < 1 || c.slot_grid_w < 1 || ph % c.slot_grid_h != 0 || pw % c.slot_grid_w != 0) {
    throw ConfigError("patch grid " + std::to_string(ph) + "x" + std::to_string(pw) + " cannot be average-pooled to " +
                      std::to_string(c.slot_grid_h) + "x" + std::to_string(c.slot_grid_w) + " slots");
  }
}

ModelConfig model_config_from(const KeyValueConfig& kv, ModelConfig c) {
  kv.require_known({"num_slots", "slot_grid", "latent_dim", "image_size", "num_cameras", "cnn_stages", "feature_dim",
                    "transformer_layers", "transformer_heads", "feedforward_dim", "waypoint_layers", "waypoint_count",
                    "recon_layers", "recon_hidden", "mixture_heads", "pixel_sigma", "use_viewpoint",
                    "use_waypoint_head", "shared_mode_weights", "translation_scale"});
  auto get_int = [&](const char* key, int& dst) { dst = static_cast<int>(kv.get_int(key, dst)); };
  get_int("num_slots", c.num_slots);
  if (kv.has("slot_grid")) {
    const auto g = kv.get_doubles("slot_grid");
    if (g.size() != 2) throw ConfigError(kv.source() + ": slot_grid expects 'H, W'");
    c.slot_grid_h = static_cast<int>(g[0]);
    c.slot_grid_w = static_cast<int>(g[1]);
  }
  get_int("latent_dim", c.latent_dim);
  if (kv.has("image_size")) {
    const auto s = kv.get_doubles("image_size");
    if (s.size() != 2) throw ConfigError(kv.source() + ": image_size expects 'H, W'");
    c.image_height = static_cast<int>(s[0]);
    c.image_width = static_cast<int>(s[1]);
  }
  get_int("num_cameras", c.num_cameras);
  get_int("cnn_stages", c.cnn_stages);
  get_int("feature_dim", c.feature_dim);
  get_int("transformer_layers", c.transformer_layers);
  get_int("transformer_heads", c.transformer_heads);
  get_int("feedforward_dim", c.feedforward_dim);
  get_int("waypoint_layers", c.waypoint_layers);
  get_int("waypoint_count", c.waypoint_count);
  get_int("recon_layers", c.recon_layers);
  get_int("recon_hidden", c.recon_hidden);
  get_int("mixture_heads", c.mixture_heads);
  c.pixel_sigma = kv.get_double("pixel_sigma", c.pixel_sigma);
  c.use_viewpoint = kv.get_bool("use_viewpoint", c.use_viewpoint);
  c.use_waypoint_head = kv.get_bool("use_waypoint_head", c.use_waypoint_head);
  c.shared_mode_weights = kv.get_bool("shared_mode_weights", c.shared_mode_weights);
  c.translation_scale = kv.get_double("translation_scale", c.translation_scale);
  validate(c);
  return c;
}

KeyValueConfig to_key_values(const ModelConfig& c) {
  KeyValueConfig kv;
  kv.set("num_slots", std::to_string(c.num_slots));
  kv.set("slot_grid", std::to_string(c.slot_grid_h) + ", " + std::to_string(c.slot_grid_w));
  kv.set("latent_dim", std::to_string(c.latent_dim));
  kv.set("image_size", std::to_string(c.image_height) + ", " + std::to_string(c.image_width));
  kv.set("num_cameras", std::to_string(c.num_cameras));
  kv.set("cnn_stages", std::to_string(c.cnn_stages));
  kv.set("feature_dim", std::to_string(c.feature_dim));
  kv.set("transformer_layers", std::to_string(c.transformer_layers));
  kv.set("transformer_heads", std::to_string(c.transformer_heads));
  kv.set("feedforward_dim", std::to_string(c.feedforward_dim));
  kv.set("waypoint_layers", std::to_string(c.waypoint_layers));
  kv.set("waypoint_count", std::to_string(c.waypoint_count));
  kv.set("recon_layers", std::to_string(c.recon_layers));
  kv.set("recon_hidden", std::to_string(c.recon_hidden));
  kv.set("mixture_heads", std::to_string(c.mixture_heads));
  kv.set("pixel_sigma", format_double(c.pixel_sigma));
  kv.set("use_viewpoint", c.use_viewpoint ? "true" : "false");
  kv.set("use_waypoint_head", c.use_waypoint_head ? "true" : "false");
  kv.set("shared_mode_weights", c.shared_mode_weights ? "true" : "false");
  kv.set("translation_scale", format_double(c.translation_scale));
  return kv;
}

std::vector<std::string> config_differences(const ModelConfig& a, const ModelConfig& b) {
  const KeyValueConfig ka = to_key_values(a);
  const KeyValueConfig kb = to_key_values(b);
  std::vector<std::string> out;
  for (const auto& key : ka.keys()) {
    if (ka.get_string(key) != kb.get_string(key)) {
      out.push_back(key + " (" + ka.get_string(key) + " vs " + kb.get_string(key) + ")");
    }
  }
  return out;
}

std::vector<double> view_embedding(std::span<const double> c2w, double translation_scale) {
  if (c2w.size() != 16) throw ValidationError("view_embedding expects a 4x4 matrix");
  std::vector<double> out(c2w.begin(), c2w.begin() + 12);
  out[3] /= translation_scale;
  out[7] /= translation_scale;
  out[11] /= translation_scale;
  return out;
}

// ---------------------------------------------------------------------------

template <typename T>
SocsModel<T>::SocsModel(ModelConfig config, std::uint64_t init_seed) : config_(std::move(config)) {
  validate(config_);
  CounterRng rng(init_seed, 0, "model_init");
  const int d = config_.feature_dim;

  int in_ch = 3;
  for (int s = 0; s < config_.cnn_stages; ++s) {
    const int out_ch = std::max(8, d >> (config_.cnn_stages - 1 - s));
    convs_.emplace_back(params_, "cnn." + std::to_string(s), in_ch, out_ch, 3, 2, 1, rng);
    in_ch = out_ch;
  }
  token_proj_ = nn::Linear<T>(params_, "token_proj", in_ch + config_.position_dim(), d, rng);
  for (int l = 0; l < config_.transformer_layers; ++l) {
    encoder_.emplace_back(params_, "encoder." + std::to_string(l), d, config_.transformer_heads,
                          config_.feedforward_dim, rng);
  }
  encoder_norm_ = nn::LayerNorm<T>(params_, "encoder_norm", d);
  slot_hidden_ = nn::Linear<T>(params_, "slot_mlp.0", d, d, rng);
  slot_out_ = nn::Linear<T>(params_, "slot_mlp.1", d, 2 * config_.latent_dim, rng);

  // First decoder layer acting on [o_k ; query], split into its latent and
  // query column blocks so each is computed once.
  const int hidden = config_.recon_hidden;
  const int fan_in = config_.latent_dim + config_.position_dim();
  dec_latent_ = &params_.add("decoder.0.latent_weight", {config_.latent_dim, hidden});
  dec_query_ = nn::Linear<T>(params_, "decoder.0.query", config_.position_dim(), hidden, rng);
  {
    auto stream = rng.fork("decoder.0.latent_weight");
    nn::glorot_uniform(dec_latent_->value, fan_in, hidden, stream);
    auto qstream = rng.fork("decoder.0.query_rescaled");
    nn::glorot_uniform(dec_query_.weight->value, fan_in, hidden, qstream);
  }
  for (int l = 1; l + 1 < config_.recon_layers; ++l) {
    dec_hidden_.emplace_back(params_, "decoder." + std::to_string(l), hidden, hidden, rng);
  }
  dec_out_ = nn::Linear<T>(params_, "decoder.out", hidden, config_.decoder_width(), rng);
  for (int i = 0; i < 3 * config_.mixture_heads; ++i) dec_out_.bias->value.data[static_cast<std::size_t>(i)] = T(0.5);

  if (config_.use_waypoint_head) {
    for (int l = 0; l < config_.waypoint_layers; ++l) {
      waypoint_blocks_.emplace_back(params_, "waypoint." + std::to_string(l), d, config_.transformer_heads,
                                    config_.feedforward_dim, rng);
    }
    waypoint_norm_ = nn::LayerNorm<T>(params_, "waypoint_norm", d);
    waypoint_out_ = nn::Linear<T>(params_, "waypoint_out", d, 2 * config_.waypoint_count, rng);
  }
}

template <typename T>
ImageBatch<T> SocsModel<T>::prepare(const SequenceRecord& rec) const {
  const int V = rec.num_views();
  const int F = rec.num_frames();
  const int H = rec.height();
  const int W = rec.width();
  if (H != config_.image_height || W != config_.image_width) {
    throw ValidationError("frames: image size " + std::to_string(H) + "x" + std::to_string(W) +
                          " does not match model image size " + std::to_string(config_.image_height) + "x" +
                          std::to_string(config_.image_width));
  }
  if (!config_.use_viewpoint && V > config_.num_cameras) {
    throw ValidationError("frames: " + std::to_string(V) + " views exceed the model's camera count " +
                          std::to_string(config_.num_cameras));
  }
  ImageBatch<T> batch;
  batch.images = Tensor<T>({V * F, H, W, 3});
  std::copy(rec.frames.data.begin(), rec.frames.data.end(), batch.images.data.begin());
  batch.view_codes = Tensor<T>({V * F, config_.view_code_dim()});
  const double t0 = rec.timestamps.data.front();
  const double span = rec.timestamps.data.back() - t0;
  for (int v = 0; v < V; ++v) {
    for (int f = 0; f < F; ++f) {
      const std::size_t i = static_cast<std::size_t>(v) * F + f;
      T* code = batch.view_codes.data.data() + i * config_.view_code_dim();
      if (config_.use_viewpoint) {
        const auto e = view_embedding(std::span<const double>(rec.extrinsics.data.data() + 16 * i, 16),
                                      config_.translation_scale);
        std::copy(e.begin(), e.end(), code);
      } else {
        code[v] = T(1);
      }
      batch.times.push_back(span > 0.0 ? static_cast<T>((rec.timestamps.data[static_cast<std::size_t>(f)] - t0) / span) : T(0));
    }
  }
  return batch;
}

template <typename T>
Var SocsModel<T>::encode_frames(Graph<T>& g, const Tensor<T>& images) const {
  if (images.rank() != 4 || images.dim(1) != config_.image_height || images.dim(2) != config_.image_width ||
      images.dim(3) != 3) {
    throw ValidationError("frames: expected [I, " + std::to_string(config_.image_height) + ", " +
                          std::to_string(config_.image_width) + ", 3], got " + shape_string(images.shape));
  }
  Var x = g.constant(images);
  for (const auto& conv : convs_) x = nn::gelu(g, conv(g, x));
  const auto& s = g.shape(x);
  return nn::reshape(g, x, {s[0], s[1] * s[2], s[3]});
}

template <typename T>
Tensor<T> SocsModel<T>::position_codes(const ImageBatch<T>& batch) const {
  const int I = batch.images.dim(0);
  const int ph = config_.patch_grid_h();
  const int pw = config_.patch_grid_w();
  const int pd = config_.position_dim();
  const int vd = config_.view_code_dim();
  Tensor<T> codes({I * ph * pw, pd});
  for (int i = 0; i < I; ++i) {
    for (int r = 0; r < ph; ++r) {
      for (int c = 0; c < pw; ++c) {
        T* row = codes.data.data() + (static_cast<std::size_t>(i) * ph * pw + r * pw + c) * pd;
        row[0] = T((c + 0.5) / pw);
        row[1] = T((r + 0.5) / ph);
        row[2] = batch.times[static_cast<std::size_t>(i)];
        std::copy_n(batch.view_codes.data.data() + static_cast<std::size_t>(i) * vd, vd, row + 3);
      }
    }
  }
  return codes;
}

template <typename T>
Var SocsModel<T>::embed_positions(Graph<T>& g, Var patches, const ImageBatch<T>& batch) const {
  const auto& s = g.shape(patches);
  const int I = batch.images.dim(0);
  if (s.size() != 3 || s[0] != I || s[1] != config_.patch_grid_h() * config_.patch_grid_w()) {
    throw ValidationError("embed_positions: patch tensor " + shape_string(s) + " does not match " + std::to_string(I) +
                          " images");
  }
  Var flat = nn::reshape(g, patches, {s[0] * s[1], s[2]});
  Var codes = g.constant(position_codes(batch));
  return token_proj_(g, nn::concat_cols(g, flat, codes));
}

template <typename T>
typename SocsModel<T>::Slots SocsModel<T>::infer_slots(Graph<T>& g, Var tokens) const {
  const int P = config_.patch_grid_h() * config_.patch_grid_w();
  const int K = config_.num_slots;
  const int d = config_.feature_dim;
  const int m = config_.latent_dim;
  const auto& s = g.shape(tokens);
  if (s.size() != 2 || s[1] != d || s[0] % P != 0) {
    throw ValidationError("infer_slots: expected [I*" + std::to_string(P) + ", " + std::to_string(d) + "], got " +
                          shape_string(s));
  }
  const int I = s[0] / P;
  Var x = tokens;
  const int split = config_.pre_pool_layers();
  for (int l = 0; l < split; ++l) x = encoder_[static_cast<std::size_t>(l)](g, x);
  x = nn::avg_pool_grid(g, nn::reshape(g, x, {I, P, d}), config_.patch_grid_h(), config_.patch_grid_w(),
                        config_.slot_grid_h, config_.slot_grid_w);
  x = nn::reshape(g, x, {I * K, d});
  for (int l = split; l < config_.transformer_layers; ++l) x = encoder_[static_cast<std::size_t>(l)](g, x);
  Var pooled = encoder_norm_(g, x);
  Var per_slot = nn::mean_leading(g, nn::reshape(g, pooled, {I, K, d}));
  Var stats = slot_out_(g, nn::gelu(g, slot_hidden_(g, per_slot)));
  Var z = nn::slice_cols(g, stats, 0, m);
  Var logvar = nn::clamp(g, nn::slice_cols(g, stats, m, m), T(-10), T(10));
  Var sigma = nn::exp(g, nn::scale(g, logvar, T(0.5)));
  return {z, sigma, pooled};
}

template <typename T>
Var SocsModel<T>::sample_latents(Graph<T>& g, const Slots& slots, LatentMode mode, CounterRng& rng) const {
  if (mode == LatentMode::mean) return slots.z;
  Tensor<T> eps(g.shape(slots.sigma));
  for (auto& v : eps.data) v = static_cast<T>(rng.normal());
  return nn::add(g, slots.z, nn::mul(g, slots.sigma, g.constant(std::move(eps))));
}

template <typename T>
Var SocsModel<T>::decode_pixels(Graph<T>& g, Var latents, const Tensor<T>& queries) const {
  if (queries.rank() != 2 || queries.dim(1) != config_.position_dim() || queries.dim(0) < 1) {
    throw ValidationError("decode_pixels: queries must be [Q >= 1, " + std::to_string(config_.position_dim()) +
                          "], got " + shape_string(queries.shape));
  }
  Var from_latent = nn::matmul(g, latents, g.parameter(*dec_latent_));
  Var from_query = dec_query_(g, g.constant(queries));
  Var h = nn::gelu(g, nn::broadcast_pairs(g, from_latent, from_query));
  for (const auto& layer : dec_hidden_) h = nn::gelu(g, layer(g, h));
  return dec_out_(g, h);
}

template <typename T>
Var SocsModel<T>::predict_waypoints(Graph<T>& g, Var pooled_tokens) const {
  if (!config_.use_waypoint_head) throw ConfigError("predict_waypoints called with use_waypoint_head = false");
  Var x = pooled_tokens;
  for (const auto& block : waypoint_blocks_) x = block(g, x);
  Var summary = nn::mean_rows(g, waypoint_norm_(g, x));
  return nn::reshape(g, waypoint_out_(g, summary), {config_.waypoint_count, 2});
}

template <typename T>
Tensor<T> SocsModel<T>::pixel_queries(const ImageBatch<T>& batch, int num_frames, std::span<const std::size_t> pixels) const {
  (void)num_frames;
  const int H = config_.image_height;
  const int W = config_.image_width;
  const int pd = config_.position_dim();
  const int vd = config_.view_code_dim();
  const std::size_t per_image = static_cast<std::size_t>(H) * W;
  Tensor<T> q({static_cast<int>(pixels.size()), pd});
  for (std::size_t n = 0; n < pixels.size(); ++n) {
    const std::size_t image = pixels[n] / per_image;
    const std::size_t rem = pixels[n] % per_image;
    const int r = static_cast<int>(rem / static_cast<std::size_t>(W));
    const int c = static_cast<int>(rem % static_cast<std::size_t>(W));
    T* row = q.data.data() + n * pd;
    row[0] = T((c + 0.5) / W);
    row[1] = T((r + 0.5) / H);
    row[2] = batch.times.at(image);
    std::copy_n(batch.view_codes.data.data() + image * vd, vd, row + 3);
  }
  return q;
}

template <typename T>
SlotPosteriorValues SocsModel<T>::posterior(const SequenceRecord& record) const {
  Graph<T> g(false);
  const ImageBatch<T> batch = prepare(record);
  const Slots slots = infer_slots(g, embed_positions(g, encode_frames(g, batch.images), batch));
  return {g.value(slots.z).template cast<double>(), g.value(slots.sigma).template cast<double>()};
}

template <typename T>
SegmentationResult SocsModel<T>::segment(const SequenceRecord& record, std::size_t chunk_pixels) const {
  const ImageBatch<T> batch = prepare(record);
  const int V = record.num_views();
  const int F = record.num_frames();
  const int H = record.height();
  const int W = record.width();
  const int K = config_.num_slots;
  const int width = config_.decoder_width();

  Graph<T> enc(false);
  const Slots slots = infer_slots(enc, embed_positions(enc, encode_frames(enc, batch.images), batch));
  const Tensor<T> latents = enc.value(slots.z);

  SegmentationResult out;
  out.soft_masks = Tensor<float>({V, F, H, W, K});
  out.hard_labels = Tensor<std::int32_t>({V, F, H, W});
  const std::size_t total = static_cast<std::size_t>(V) * F * H * W;
  chunk_pixels = std::max<std::size_t>(1, chunk_pixels);
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < total; start += chunk_pixels) {
    const std::size_t end = std::min(total, start + chunk_pixels);
    idx.resize(end - start);
    for (std::size_t i = start; i < end; ++i) idx[i - start] = i;
    Graph<T> g(false);
    Var decoded = decode_pixels(g, g.constant(latents), pixel_queries(batch, F, idx));
    const auto& D = g.value(decoded);
    for (std::size_t n = 0; n < idx.size(); ++n) {
      const T* rows = D.data.data() + n * static_cast<std::size_t>(K) * width;
      T mx = rows[width - 1];
      int arg = 0;
      for (int k = 1; k < K; ++k) {
        const T v = rows[static_cast<std::size_t>(k) * width + width - 1];
        if (v > mx) {
          mx = v;
          arg = k;
        }
      }
      double z = 0.0;
      float* soft = out.soft_masks.data.data() + idx[n] * static_cast<std::size_t>(K);
      for (int k = 0; k < K; ++k) {
        const double e = std::exp(static_cast<double>(rows[static_cast<std::size_t>(k) * width + width - 1] - mx));
        soft[k] = static_cast<float>(e);
        z += e;
      }
      for (int k = 0; k < K; ++k) soft[k] = static_cast<float>(soft[k] / z);
      out.hard_labels.data[idx[n]] = arg;
    }
  }
  return out;
}

template class SocsModel<float>;
template class SocsModel<double>;

template <typename Dst, typename Src>
void copy_parameters(SocsModel<Dst>& dst, const SocsModel<Src>& src) {
  const auto diffs = config_differences(dst.config(), src.config());
  if (!diffs.empty()) throw ValidationError("copy_parameters: model configs differ in " + diffs.front());
  for (auto* p : dst.parameters().all()) {
    const auto& s = src.parameters().get(p->name);
    p->value.data.assign(s.value.data.begin(), s.value.data.end());
  }
}

template void copy_parameters<float, double>(SocsModel<float>&, const SocsModel<double>&);
template void copy_parameters<double, float>(SocsModel<double>&, const SocsModel<float>&);
template void copy_parameters<float, float>(SocsModel<float>&, const SocsModel<float>&);
template void copy_parameters<double, double>(SocsModel<double>&, const SocsModel<double>&);

// ---------------------------------------------------------------------------

void save_checkpoint(const std::filesystem::path& path, const SocsModel<float>& model,
                     const nn::Adam<float>* optimizer, long long step) {
  Container c;
  c.put_text("model_config", to_key_values(model.config()).to_text());
  c.put("step", Tensor<std::int64_t>({1}, std::vector<std::int64_t>{step}));
  for (const auto* p : model.parameters().all()) c.put("param." + p->name, p->value);
  if (optimizer != nullptr) {
    auto& opt = const_cast<nn::Adam<float>&>(*optimizer);
    c.put("adam.t", Tensor<std::int64_t>({1}, std::vector<std::int64_t>{opt.steps_taken()}));
    for (const auto& [name, m] : opt.first_moments()) c.put("adam.m." + name, m);
    for (const auto& [name, v] : opt.second_moments()) c.put("adam.v." + name, v);
  }
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  c.write(tmp);
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at '" + path.string() + "': " + ec.message());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  Checkpoint ckpt;
  ckpt.container = Container::read(path);
  ckpt.config = model_config_from(KeyValueConfig::parse(ckpt.container.get_text("model_config"), path.string()),
                                  ModelConfig{});
  const auto& step = ckpt.container.get<std::int64_t>("step");
  if (step.size() != 1) throw FormatError(path.string() + ": malformed step field");
  ckpt.step = step[0];
  return ckpt;
}

void restore_checkpoint(const Checkpoint& ckpt, SocsModel<float>& model, nn::Adam<float>* optimizer) {
  const auto diffs = config_differences(ckpt.config, model.config());
  if (!diffs.empty()) {
    std::string msg = "checkpoint/model config mismatch:";
    for (const auto& d : diffs) msg += " " + d + ";";
    throw ConfigError(msg);
  }
  for (auto* p : model.parameters().all()) {
    const auto& src = ckpt.container.get<float>("param." + p->name);
    if (src.shape != p->value.shape) {
      throw FormatError("checkpoint parameter '" + p->name + "' has shape " + shape_string(src.shape) + ", expected " +
                        shape_string(p->value.shape));
    }
    p->value = src;
  }
  if (optimizer != nullptr && ckpt.container.has("adam.t")) {
    optimizer->set_steps_taken(ckpt.container.get<std::int64_t>("adam.t")[0]);
    for (const auto* p : model.parameters().all()) {
      optimizer->first_moments()[p->name] = ckpt.container.get<float>("adam.m." + p->name);
      optimizer->second_moments()[p->name] = ckpt.container.get<float>("adam.v." + p->name);
    }
  }
}

}  // namespace socs
