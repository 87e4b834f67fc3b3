// socs: generate-data, train, eval, visualize.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

#include "socs/error.hpp"
#include "socs/harness.hpp"
#include "socs/scene_synth.hpp"

namespace fs = std::filesystem;
using namespace socs;

namespace {

KeyValueConfig load_config(const std::string& path) {
  if (!fs::exists(path)) throw IoError("config file '" + path + "' does not exist");
  return KeyValueConfig::load(path);
}

// Scene keys may sit at top level or under [scene].
SceneConfig load_scene_config(const std::string& path) {
  if (path.empty()) return SceneConfig{};
  const KeyValueConfig kv = load_config(path);
  const KeyValueConfig scene = kv.section("scene");
  return scene_config_from(scene.keys().empty() ? kv : scene);
}

RunConfig load_run_config(const std::string& path) {
  if (path.empty()) return run_config_preset("desk");
  return run_config_from(load_config(path), fs::path(path).parent_path());
}

fs::path seed_dir(const RunConfig& c, std::uint64_t seed) { return c.output_dir / ("seed_" + std::to_string(seed)); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-supervised object-centric perception: data generation, training and evaluation"};
  app.require_subcommand(1);

  // generate-data
  auto* gen = app.add_subcommand("generate-data", "Render a synthetic dataset and its manifest");
  std::string gen_config, gen_out, gen_split = "train";
  std::size_t gen_n = 64;
  std::uint64_t gen_seed = 0;
  gen->add_option("--config", gen_config, "Scene config file (defaults used when omitted)");
  gen->add_option("--n", gen_n, "Number of sequences")->check(CLI::NonNegativeNumber);
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--seed", gen_seed, "Seed of the first sequence");
  gen->add_option("--split", gen_split, "Split name recorded in the manifest");

  // train
  auto* tr = app.add_subcommand("train", "Train a model");
  std::string tr_config, tr_out, tr_ablation;
  std::optional<std::uint64_t> tr_seed;
  std::optional<long long> tr_steps;
  bool tr_resume = false, tr_quiet = false;
  tr->add_option("--config", tr_config, "Run config file");
  tr->add_option("--seed", tr_seed, "Sets init, train and shuffle seeds; output goes to <out>/seed_<n>");
  tr->add_option("--out", tr_out, "Output directory (overrides run.output_dir)");
  tr->add_option("--steps", tr_steps, "Override run.steps");
  tr->add_option("--ablation", tr_ablation, "none, mixture, viewpoint or waypoint");
  tr->add_flag("--resume", tr_resume, "Continue from the latest checkpoint in the output directory");
  tr->add_flag("--quiet", tr_quiet, "Do not echo log rows");

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate checkpoints on a manifest");
  std::string ev_config, ev_out, ev_manifest;
  std::vector<std::string> ev_checkpoints;
  std::vector<std::uint64_t> ev_seeds;
  std::optional<std::uint64_t> ev_seed;
  bool ev_per_frame = false;
  ev->add_option("--config", ev_config, "Run config; checkpoints must match its model section");
  ev->add_option("--checkpoint", ev_checkpoints, "Checkpoint file (repeatable)");
  ev->add_option("--seeds", ev_seeds, "Evaluate <output_dir>/seed_<n> latest checkpoints")->delimiter(',');
  ev->add_option("--seed", ev_seed, "Single seed, as --seeds");
  ev->add_option("--manifest", ev_manifest, "Manifest to evaluate on (defaults to run.val_manifest)");
  ev->add_option("--out", ev_out, "Write the full report to this file");
  ev->add_flag("--per-frame-matching", ev_per_frame, "Hungarian matching per frame instead of per camera");

  // visualize
  auto* vis = app.add_subcommand("visualize", "Write mask overlays and a waypoint plot for one sequence");
  std::string vis_config, vis_checkpoint, vis_manifest, vis_record, vis_out;
  std::optional<std::uint64_t> vis_seed;
  vis->add_option("--config", vis_config, "Run config (locates the latest checkpoint and val manifest)");
  vis->add_option("--checkpoint", vis_checkpoint, "Checkpoint file");
  vis->add_option("--record", vis_record, "Sequence record file");
  vis->add_option("--manifest", vis_manifest, "Manifest to pick the sequence from");
  vis->add_option("--seed", vis_seed, "Pick the manifest entry with this sequence seed (default: first)");
  vis->add_option("--out", vis_out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      SceneConfig scene = load_scene_config(gen_config);
      const fs::path out = resolve_output_path(gen_out);
      const fs::path manifest = generate_dataset(scene, gen_n, out, gen_seed, gen_split);
      std::cout << "wrote " << gen_n << " sequences, manifest " << manifest.string() << "\n";
      return 0;
    }

    if (*tr) {
      RunConfig c = load_run_config(tr_config);
      if (!tr_ablation.empty()) apply_ablation(c, tr_ablation);
      if (!tr_out.empty()) c.output_dir = tr_out;
      if (tr_steps) c.steps = *tr_steps;
      if (tr_seed) {
        c.init_seed = c.train_seed = c.data_seed = *tr_seed;
        c.output_dir = seed_dir(c, *tr_seed);
      }
      const TrainResult r = train(c, tr_resume, tr_quiet ? nullptr : &std::cout);
      std::cout << "step " << r.last_step << ", checkpoint " << r.final_checkpoint.string() << "\n";
      return 0;
    }

    if (*ev) {
      std::optional<RunConfig> c;
      if (!ev_config.empty()) c = load_run_config(ev_config);
      if (ev_seed) ev_seeds.push_back(*ev_seed);
      std::vector<fs::path> ckpts(ev_checkpoints.begin(), ev_checkpoints.end());
      for (auto s : ev_seeds) {
        if (!c) throw ConfigError("--seeds needs --config to locate the run directories");
        RunConfig sc = *c;
        sc.output_dir = seed_dir(*c, s);
        ckpts.push_back(latest_checkpoint(sc));
      }
      fs::path manifest = ev_manifest;
      if (manifest.empty() && c) manifest = c->val_manifest;
      if (manifest.empty()) throw ConfigError("no manifest given (use --manifest or run.val_manifest)");
      ComOptions options;
      options.per_frame_matching = ev_per_frame;
      const EvaluationResult r =
          evaluate_checkpoints(ckpts, manifest, c ? std::optional<ModelConfig>(c->model) : std::nullopt, options);
      const MetricsReport& shown = r.runs.size() == 1 ? r.runs.front() : r.combined;
      if (!ev_out.empty()) {
        const fs::path out = resolve_output_path(ev_out);
        if (out.has_parent_path()) fs::create_directories(out.parent_path());
        std::ofstream f(out);
        f << shown.to_text();
        for (std::size_t i = 0; r.runs.size() > 1 && i < r.runs.size(); ++i) {
          f << "\n# checkpoint " << ckpts[i].string() << "\n" << r.runs[i].to_text();
        }
        if (!f) throw IoError("cannot write report '" + out.string() + "'");
      }
      std::cout << shown.summary_line() << "\n";
      return 0;
    }

    if (*vis) {
      std::optional<RunConfig> c;
      if (!vis_config.empty()) c = load_run_config(vis_config);
      fs::path ckpt = vis_checkpoint;
      if (ckpt.empty() && c) ckpt = latest_checkpoint(*c);
      if (ckpt.empty()) throw ConfigError("no checkpoint given (use --checkpoint or --config)");
      SequenceRecord rec;
      if (!vis_record.empty()) {
        rec = read_record(vis_record);
      } else {
        fs::path m = vis_manifest;
        if (m.empty() && c) m = c->val_manifest;
        if (m.empty()) throw ConfigError("no sequence given (use --record or --manifest)");
        const DatasetManifest manifest = read_manifest(m);
        std::size_t index = 0;
        if (vis_seed) {
          index = manifest.entries.size();
          for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
            if (manifest.entries[i].seed == static_cast<std::int64_t>(*vis_seed)) index = i;
          }
          if (index == manifest.entries.size()) {
            throw ConfigError("manifest has no sequence with seed " + std::to_string(*vis_seed));
          }
        }
        rec = read_record(manifest.resolve(index));
      }
      const Checkpoint ck = read_checkpoint(ckpt);
      SocsModel<float> model(ck.config, 0);
      restore_checkpoint(ck, model, nullptr);
      const auto files = visualize(model, rec, resolve_output_path(vis_out));
      std::cout << "wrote " << files.size() << " images to " << resolve_output_path(vis_out).string() << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
