#include "socs/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

#include "socs/error.hpp"
#include "socs/raster.hpp"

namespace socs {

namespace {

namespace fs = std::filesystem;

const char* kLogName = "train_log.tsv";
const char* kLogHeader = "step\trecon\tkl\ttask\ttotal\twall_seconds";

std::string g9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string log_line(const LogRow& r) {
  return std::to_string(r.step) + "\t" + g9(r.loss.recon) + "\t" + g9(r.loss.kl) + "\t" + g9(r.loss.task) + "\t" +
         g9(r.loss.total) + "\t" + g9(r.wall_seconds);
}

fs::path resolve_against(const fs::path& p, const fs::path& base) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

std::string checkpoint_name(long long step) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "step_%08lld.socsckpt", step);
  return buf;
}

}  // namespace

RunConfig run_config_preset(const std::string& name) {
  RunConfig c;
  if (name == "desk") return c;
  if (name == "full") {
    c.preset = "full";
    c.model = full_model_config();
    c.loss.pixels_per_sequence = 2016;
    c.steps = 200000;
    c.output_dir = "runs/full";
    return c;
  }
  throw ConfigError("unknown preset '" + name + "' (expected desk or full)");
}

void apply_ablation(RunConfig& c, const std::string& ablations) {
  std::stringstream ss(ablations);
  std::string ablation;
  while (std::getline(ss, ablation, ',')) {
    ablation.erase(0, ablation.find_first_not_of(" \t"));
    ablation.erase(ablation.find_last_not_of(" \t") + 1);
    if (ablation == "none" || ablation.empty()) continue;
    if (ablation == "mixture") {
      c.model.mixture_heads = 1;
    } else if (ablation == "viewpoint") {
      c.model.use_viewpoint = false;
    } else if (ablation == "waypoint") {
      c.model.use_waypoint_head = false;
      c.loss.beta = 4.5e-7;
    } else {
      throw ConfigError("unknown ablation '" + ablation + "' (expected none, mixture, viewpoint or waypoint)");
    }
  }
}

RunConfig run_config_from(const KeyValueConfig& kv, const fs::path& base_dir) {
  for (const auto& key : kv.keys()) {
    const auto dot = key.find('.');
    const std::string section = dot == std::string::npos ? "" : key.substr(0, dot);
    if (section != "run" && section != "model" && section != "loss" && section != "optim") {
      throw ConfigError(kv.source() + ": key '" + key + "' is outside the [run], [model], [loss] and [optim] sections");
    }
  }
  const KeyValueConfig run = kv.section("run");
  run.require_known({"preset", "ablation", "train_manifest", "val_manifest", "steps", "batch_size", "data_seed",
                     "init_seed", "train_seed", "output_dir", "checkpoint_every", "log_every"});
  RunConfig c = run_config_preset(run.get_string("preset", "desk"));
  if (run.has("train_manifest")) c.train_manifest = resolve_against(run.get_string("train_manifest"), base_dir);
  if (run.has("val_manifest")) c.val_manifest = resolve_against(run.get_string("val_manifest"), base_dir);
  c.steps = run.get_int("steps", c.steps);
  c.batch_size = static_cast<int>(run.get_int("batch_size", c.batch_size));
  c.data_seed = static_cast<std::uint64_t>(run.get_int("data_seed", static_cast<long long>(c.data_seed)));
  c.init_seed = static_cast<std::uint64_t>(run.get_int("init_seed", static_cast<long long>(c.init_seed)));
  c.train_seed = static_cast<std::uint64_t>(run.get_int("train_seed", static_cast<long long>(c.train_seed)));
  if (run.has("output_dir")) c.output_dir = run.get_string("output_dir");
  c.checkpoint_every = run.get_int("checkpoint_every", c.checkpoint_every);
  c.log_every = run.get_int("log_every", c.log_every);

  c.model = model_config_from(kv.section("model"), c.model);

  const KeyValueConfig loss = kv.section("loss");
  loss.require_known({"beta", "omega_task", "sigma_x", "pixels_per_sequence"});
  c.loss.beta = loss.get_double("beta", c.loss.beta);
  c.loss.omega_task = loss.get_double("omega_task", c.loss.omega_task);
  c.loss.sigma_x = loss.get_double("sigma_x", c.loss.sigma_x);
  c.loss.pixels_per_sequence = static_cast<int>(loss.get_int("pixels_per_sequence", c.loss.pixels_per_sequence));
  c.model.pixel_sigma = c.loss.sigma_x;

  const KeyValueConfig opt = kv.section("optim");
  opt.require_known({"learning_rate", "beta1", "beta2", "epsilon", "clip_norm"});
  c.optimizer.learning_rate = opt.get_double("learning_rate", c.optimizer.learning_rate);
  c.optimizer.beta1 = opt.get_double("beta1", c.optimizer.beta1);
  c.optimizer.beta2 = opt.get_double("beta2", c.optimizer.beta2);
  c.optimizer.epsilon = opt.get_double("epsilon", c.optimizer.epsilon);
  c.optimizer.clip_norm = opt.get_double("clip_norm", c.optimizer.clip_norm);

  // Ablations win over explicit keys so a shared base file can be reused.
  apply_ablation(c, run.get_string("ablation", "none"));

  if (c.steps < 0) throw ConfigError("run.steps must be >= 0");
  if (c.batch_size < 1) throw ConfigError("run.batch_size must be >= 1");
  if (c.checkpoint_every < 1) throw ConfigError("run.checkpoint_every must be >= 1");
  if (c.log_every < 1) throw ConfigError("run.log_every must be >= 1");
  if (!(c.optimizer.learning_rate > 0.0)) throw ConfigError("optim.learning_rate must be > 0");
  return c;
}

KeyValueConfig to_key_values(const RunConfig& c) {
  KeyValueConfig kv;
  kv.set("run.preset", c.preset);
  kv.set("run.train_manifest", c.train_manifest.string());
  kv.set("run.val_manifest", c.val_manifest.string());
  kv.set("run.steps", std::to_string(c.steps));
  kv.set("run.batch_size", std::to_string(c.batch_size));
  kv.set("run.data_seed", std::to_string(c.data_seed));
  kv.set("run.init_seed", std::to_string(c.init_seed));
  kv.set("run.train_seed", std::to_string(c.train_seed));
  kv.set("run.output_dir", c.output_dir.string());
  kv.set("run.checkpoint_every", std::to_string(c.checkpoint_every));
  kv.set("run.log_every", std::to_string(c.log_every));
  const KeyValueConfig model = to_key_values(c.model);
  for (const auto& key : model.keys()) kv.set("model." + key, model.get_string(key));
  kv.set("loss.beta", format_double(c.loss.beta));
  kv.set("loss.omega_task", format_double(c.loss.omega_task));
  kv.set("loss.sigma_x", format_double(c.loss.sigma_x));
  kv.set("loss.pixels_per_sequence", std::to_string(c.loss.pixels_per_sequence));
  kv.set("optim.learning_rate", format_double(c.optimizer.learning_rate));
  kv.set("optim.beta1", format_double(c.optimizer.beta1));
  kv.set("optim.beta2", format_double(c.optimizer.beta2));
  kv.set("optim.epsilon", format_double(c.optimizer.epsilon));
  kv.set("optim.clip_norm", format_double(c.optimizer.clip_norm));
  return kv;
}

fs::path resolve_output_path(const fs::path& path) {
  const char* root = std::getenv("SOCS_OUTPUT_ROOT");
  if (root == nullptr || *root == '\0' || path.is_absolute()) return path;
  return fs::path(root) / path;
}

std::vector<LogRow> read_training_log(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open training log '" + path.string() + "'");
  std::vector<LogRow> rows;
  std::string line;
  std::getline(in, line);
  if (line != kLogHeader) throw FormatError(path.string() + ": unexpected header '" + line + "'");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    LogRow r;
    if (std::sscanf(line.c_str(), "%lld\t%lf\t%lf\t%lf\t%lf\t%lf", &r.step, &r.loss.recon, &r.loss.kl, &r.loss.task,
                    &r.loss.total, &r.wall_seconds) != 6) {
      throw FormatError(path.string() + ": malformed row '" + line + "'");
    }
    rows.push_back(r);
  }
  return rows;
}

fs::path checkpoint_dir(const RunConfig& config) { return resolve_output_path(config.output_dir) / "checkpoints"; }
fs::path latest_checkpoint(const RunConfig& config) { return checkpoint_dir(config) / "latest.socsckpt"; }

TrainResult train(const RunConfig& config, bool resume, std::ostream* progress) {
  const fs::path out = resolve_output_path(config.output_dir);
  fs::create_directories(checkpoint_dir(config));
  {
    std::ofstream cfg(out / "run_config.txt");
    cfg << to_key_values(config).to_text();
  }
  if (config.train_manifest.empty()) throw ConfigError("run.train_manifest is not set");
  BatchIterator batches(read_manifest(config.train_manifest), static_cast<std::size_t>(config.batch_size),
                        config.data_seed);

  SocsModel<float> model(config.model, config.init_seed);
  nn::Adam<float> adam(config.optimizer);
  long long start = 0;
  const fs::path log_path = out / kLogName;
  if (resume && fs::exists(latest_checkpoint(config))) {
    const Checkpoint ckpt = read_checkpoint(latest_checkpoint(config));
    restore_checkpoint(ckpt, model, &adam);
    start = ckpt.step;
    std::vector<LogRow> kept;
    if (fs::exists(log_path)) {
      for (const auto& r : read_training_log(log_path)) {
        if (r.step <= start) kept.push_back(r);
      }
    }
    std::ofstream log(log_path, std::ios::trunc);
    log << kLogHeader << "\n";
    for (const auto& r : kept) log << log_line(r) << "\n";
  } else {
    std::ofstream log(log_path, std::ios::trunc);
    log << kLogHeader << "\n";
  }
  batches.seek(static_cast<std::uint64_t>(start));

  std::ofstream log(log_path, std::ios::app);
  if (!log) throw IoError("cannot open training log '" + log_path.string() + "'");
  TrainResult result;
  result.last_step = start;
  const auto t0 = std::chrono::steady_clock::now();
  for (long long step = start + 1; step <= config.steps; ++step) {
    const auto records = batches.next();
    std::vector<const SequenceRecord*> ptrs;
    for (const auto& r : records) ptrs.push_back(r.get());
    model.parameters().zero_grad();
    const LossBreakdown loss =
        total_loss(model, std::span<const SequenceRecord* const>(ptrs), config.loss,
                   CounterRng(config.train_seed, static_cast<std::uint64_t>(step), "train_step"), true);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!std::isfinite(loss.total)) {
      log << log_line({step, loss, wall}) << "\n";
      throw Error("non-finite loss at step " + std::to_string(step) + " (recon " + g9(loss.recon) + ", kl " +
                  g9(loss.kl) + ", task " + g9(loss.task) + ")");
    }
    adam.step(model.parameters());
    result.last_step = step;
    if (step % config.log_every == 0 || step == config.steps) {
      const LogRow row{step, loss, wall};
      log << log_line(row) << "\n";
      log.flush();
      result.rows.push_back(row);
      if (progress != nullptr) *progress << log_line(row) << "\n";
    }
    if (step % config.checkpoint_every == 0 || step == config.steps) {
      const fs::path path = checkpoint_dir(config) / checkpoint_name(step);
      save_checkpoint(path, model, &adam, step);
      fs::copy_file(path, latest_checkpoint(config), fs::copy_options::overwrite_existing);
      result.final_checkpoint = path;
    }
  }
  if (result.final_checkpoint.empty()) {
    // Nothing left to train: make sure a checkpoint exists for the final state.
    const fs::path path = checkpoint_dir(config) / checkpoint_name(result.last_step);
    if (!fs::exists(path)) save_checkpoint(path, model, &adam, result.last_step);
    if (!fs::exists(latest_checkpoint(config))) fs::copy_file(path, latest_checkpoint(config));
    result.final_checkpoint = path;
  }
  return result;
}

EvaluationResult evaluate_checkpoints(const std::vector<fs::path>& checkpoints, const fs::path& manifest_path,
                                      const std::optional<ModelConfig>& expected, const ComOptions& options) {
  if (checkpoints.empty()) throw ConfigError("no checkpoints given");
  const DatasetManifest manifest = read_manifest(manifest_path);
  EvaluationResult result;
  for (const auto& path : checkpoints) {
    const Checkpoint ckpt = read_checkpoint(path);
    if (expected) {
      const auto diffs = config_differences(*expected, ckpt.config);
      if (!diffs.empty()) {
        std::string msg = path.string() + ": checkpoint does not match the evaluation config:";
        for (const auto& d : diffs) msg += "\n  " + d;
        throw ConfigError(msg);
      }
    }
    SocsModel<float> model(ckpt.config, 0);
    restore_checkpoint(ckpt, model, nullptr);
    result.runs.push_back(evaluate_model(model, manifest, options));
  }
  result.combined = combine_runs(result.runs);
  return result;
}

std::vector<fs::path> visualize(const SocsModel<float>& model, const SequenceRecord& record, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  const SegmentationResult seg = model.segment(record);
  const int V = record.num_views(), F = record.num_frames(), H = record.height(), W = record.width();
  const int K = model.config().num_slots;
  std::vector<fs::path> files;
  for (int v = 0; v < V; ++v) {
    for (int f = 0; f < F; ++f) {
      Image img(W, H);
      const std::size_t base = (static_cast<std::size_t>(v) * F + f) * static_cast<std::size_t>(H) * W;
      for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
          const std::size_t p = base + static_cast<std::size_t>(y) * W + x;
          const int k = seg.hard_labels.data[p];
          const double a = seg.soft_masks.data[p * static_cast<std::size_t>(K) + static_cast<std::size_t>(k)];
          const auto color = slot_color(k);
          std::array<double, 3> mixed{};
          for (int c = 0; c < 3; ++c) {
            mixed[static_cast<std::size_t>(c)] =
                (1.0 - a) * record.frames.data[3 * p + static_cast<std::size_t>(c)] + a * color[static_cast<std::size_t>(c)];
          }
          img.set(x, y, mixed);
        }
      }
      const fs::path path = out_dir / ("overlay_v" + std::to_string(v) + "_f" + std::to_string(f) + ".ppm");
      write_ppm(path, img);
      files.push_back(path);
    }
  }

  // Top-down plot in the ego frame: forward is up, left is left.
  const Tensor<double>& truth = record.waypoints;
  Tensor<double> predicted;
  if (model.config().use_waypoint_head) {
    nn::Graph<float> g(false);
    const ImageBatch<float> batch = model.prepare(record);
    const auto slots = model.infer_slots(g, model.embed_positions(g, model.encode_frames(g, batch.images), batch));
    predicted = g.value(model.predict_waypoints(g, slots.pooled)).cast<double>();
  }
  double extent = 5.0;
  for (const Tensor<double>* t : {&truth, static_cast<const Tensor<double>*>(&predicted)}) {
    for (double v : t->data) extent = std::max(extent, std::abs(v) * 1.1);
  }
  const int size = 256;
  Image plot(size, size);
  auto to_px = [&](double fwd, double left, double& px, double& py) {
    px = size / 2.0 - left / extent * (size / 2.0);
    py = size / 2.0 - fwd / extent * (size / 2.0);
  };
  plot.line(0, size / 2.0, size, size / 2.0, {0.85, 0.85, 0.85});
  plot.line(size / 2.0, 0, size / 2.0, size, {0.85, 0.85, 0.85});
  plot.disc(size / 2.0, size / 2.0, 4.0, {0.0, 0.0, 0.0});
  auto draw = [&](const Tensor<double>& pts, std::array<double, 3> color) {
    double lx = size / 2.0, ly = size / 2.0;
    for (int i = 0; i < pts.rows(); ++i) {
      double px, py;
      to_px(pts.data[2 * static_cast<std::size_t>(i)], pts.data[2 * static_cast<std::size_t>(i) + 1], px, py);
      plot.line(lx, ly, px, py, color);
      plot.disc(px, py, 2.5, color);
      lx = px;
      ly = py;
    }
  };
  draw(truth, {0.1, 0.3, 0.9});
  if (predicted.size() > 0) draw(predicted, {1.0, 0.55, 0.0});
  const fs::path path = out_dir / "waypoints.ppm";
  write_ppm(path, plot);
  files.push_back(path);
  return files;
}

}  // namespace socs
