#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "socs/config_file.hpp"
#include "socs/metrics.hpp"
#include "socs/model.hpp"
#include "socs/nn/optim.hpp"
#include "socs/objectives.hpp"

namespace socs {

/// Everything a training run needs. Config files use sections `[run]`,
/// `[model]`, `[loss]` and `[optim]`; see README for the key list.
struct RunConfig {
  std::string preset = "desk";
  std::filesystem::path train_manifest;
  std::filesystem::path val_manifest;
  ModelConfig model = desk_model_config();
  LossWeights loss;
  nn::AdamSettings optimizer;
  long long steps = 20000;
  int batch_size = 8;
  std::uint64_t data_seed = 0;   // batch shuffling
  std::uint64_t init_seed = 0;   // parameter initialization
  std::uint64_t train_seed = 0;  // latent noise and pixel sampling
  std::filesystem::path output_dir = "runs/desk";
  long long checkpoint_every = 1000;
  long long log_every = 1;
};

/// `desk` or `full`.
RunConfig run_config_preset(const std::string& name);

/// Comma list of `mixture` (H = 1), `viewpoint` (camera index instead of
/// pose) and `waypoint` (no waypoint head, beta = 4.5e-7). "none" is a no-op.
void apply_ablation(RunConfig& config, const std::string& ablations);

/// Starts from the preset named by `run.preset` (default desk), applies
/// every other key, then `run.ablation`. Relative manifest paths resolve against `base_dir`.
RunConfig run_config_from(const KeyValueConfig& kv, const std::filesystem::path& base_dir = {});
KeyValueConfig to_key_values(const RunConfig& config);

/// Prefixes relative paths with $SOCS_OUTPUT_ROOT when it is set.
std::filesystem::path resolve_output_path(const std::filesystem::path& path);

struct LogRow {
  long long step = 0;
  LossBreakdown loss;
  double wall_seconds = 0.0;
};

/// Tab-separated `step recon kl task total wall_seconds` rows.
std::vector<LogRow> read_training_log(const std::filesystem::path& path);

struct TrainResult {
  std::filesystem::path final_checkpoint;
  long long last_step = 0;
  std::vector<LogRow> rows;  // rows written by this invocation
};

/// Runs (or resumes, continuing the log at the next step) the training loop.
/// Throws Error on a non-finite loss, naming the step.
TrainResult train(const RunConfig& config, bool resume, std::ostream* progress = nullptr);

std::filesystem::path checkpoint_dir(const RunConfig& config);
std::filesystem::path latest_checkpoint(const RunConfig& config);

struct EvaluationResult {
  std::vector<MetricsReport> runs;  // one per checkpoint
  MetricsReport combined;           // mean and standard error across runs
};

/// Loads each checkpoint, evaluates on the manifest and combines. With
/// `expected`, every checkpoint's model config must match it exactly.
EvaluationResult evaluate_checkpoints(const std::vector<std::filesystem::path>& checkpoints,
                                      const std::filesystem::path& manifest,
                                      const std::optional<ModelConfig>& expected = std::nullopt,
                                      const ComOptions& options = {});

/// Writes V*F overlay images and one waypoint plot; returns the file paths.
std::vector<std::filesystem::path> visualize(const SocsModel<float>& model, const SequenceRecord& record,
                                             const std::filesystem::path& out_dir);

}  // namespace socs
