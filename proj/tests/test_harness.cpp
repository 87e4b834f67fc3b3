#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>

#include "socs/error.hpp"
#include "socs/harness.hpp"
#include "socs/raster.hpp"
#include "socs/scene_synth.hpp"
#include "test_util.hpp"
#include "tiny.hpp"

using namespace socs;
namespace fs = std::filesystem;

namespace {

SceneConfig tiny_scene() {
  SceneConfig c;
  c.num_cameras = 1;
  c.camera_yaw_offsets = {0.0};
  c.image_height = 8;
  c.image_width = 8;
  c.frames = 2;
  c.waypoint_count = 3;
  return c;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p);
  out << s;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + SOCS_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

// Tiny dataset of `n` sequences under dir/data, plus a run config.
RunConfig tiny_run(const fs::path& dir, std::size_t n = 2) {
  const SceneConfig scene = tiny_scene();
  const fs::path data = dir / "data";
  generate_dataset(scene, n, data, 100);
  RunConfig rc = run_config_preset("desk");
  rc.train_manifest = data / "manifest.txt";
  rc.val_manifest = data / "manifest.txt";
  rc.model = test::tiny_config();
  rc.loss.pixels_per_sequence = 8;
  rc.steps = 10;
  rc.batch_size = 2;
  rc.checkpoint_every = 5;
  rc.output_dir = dir / "out";
  rc.init_seed = rc.train_seed = rc.data_seed = 3;
  return rc;
}

}  // namespace

TEST_CASE("presets and ablations") {
  const RunConfig desk = run_config_preset("desk");
  CHECK(desk.steps == 20000);
  CHECK(desk.batch_size == 8);
  CHECK(desk.optimizer.learning_rate == 1e-4);
  CHECK(desk.loss.beta == 5e-7);
  CHECK(desk.loss.omega_task == 1e-4);
  const RunConfig full = run_config_preset("full");
  CHECK(full.loss.pixels_per_sequence == 2016);
  CHECK(full.steps == 200000);
  CHECK(full.model.image_height == 96);
  CHECK(full.model.image_width == 224);
  CHECK_THROWS_AS(run_config_preset("huge"), ConfigError);

  RunConfig r = desk;
  apply_ablation(r, "mixture");
  CHECK(r.model.mixture_heads == 1);
  r = desk;
  apply_ablation(r, "viewpoint");
  CHECK_FALSE(r.model.use_viewpoint);
  r = desk;
  apply_ablation(r, "waypoint");
  CHECK_FALSE(r.model.use_waypoint_head);
  CHECK(r.loss.beta == 4.5e-7);
  r = desk;
  apply_ablation(r, "none");
  CHECK(config_differences(r.model, desk.model).empty());
  CHECK_THROWS_AS(apply_ablation(r, "dropout"), ConfigError);
  r = desk;
  apply_ablation(r, "mixture, waypoint");
  CHECK(r.model.mixture_heads == 1);
  CHECK_FALSE(r.model.use_waypoint_head);
}

TEST_CASE("run config files") {
  const KeyValueConfig kv = KeyValueConfig::parse(
      "[run]\npreset = full\nsteps = 7\nablation = mixture, viewpoint\ntrain_manifest = d/m.txt\n"
      "[loss]\nsigma_x = 0.1\n[optim]\nlearning_rate = 0.001\n");
  const RunConfig c = run_config_from(kv, "/base");
  CHECK(c.steps == 7);
  CHECK(c.loss.pixels_per_sequence == 2016);
  CHECK(c.model.mixture_heads == 1);
  CHECK_FALSE(c.model.use_viewpoint);
  CHECK(c.train_manifest == fs::path("/base/d/m.txt"));
  CHECK(c.loss.sigma_x == 0.1);
  CHECK(c.model.pixel_sigma == 0.1);
  CHECK(c.optimizer.learning_rate == 0.001);

  const RunConfig back = run_config_from(to_key_values(c));
  CHECK(config_differences(back.model, c.model).empty());
  CHECK(back.steps == 7);

  const RunConfig w = run_config_from(KeyValueConfig::parse("[run]\nablation = waypoint\n[loss]\nbeta = 5e-7\n"));
  CHECK(w.loss.beta == 4.5e-7);
  CHECK_THROWS_AS(run_config_from(KeyValueConfig::parse("[scene]\nframes = 2\n")), ConfigError);
  CHECK_THROWS_AS(run_config_from(KeyValueConfig::parse("[run]\nbatch_size = 0\n")), ConfigError);
}

TEST_CASE("output root prefixes relative paths") {
  ::setenv("SOCS_OUTPUT_ROOT", "/scratch", 1);
  CHECK(resolve_output_path("runs/a") == fs::path("/scratch/runs/a"));
  CHECK(resolve_output_path("/abs") == fs::path("/abs"));
  ::unsetenv("SOCS_OUTPUT_ROOT");
  CHECK(resolve_output_path("runs/a") == fs::path("runs/a"));
}

TEST_CASE("training, checkpoints and resume") {
  test::TempDir d("train");
  RunConfig rc = tiny_run(d.path);

  const TrainResult first = train(rc, false);
  CHECK(first.last_step == 10);
  CHECK(first.rows.size() == 10);
  CHECK(fs::exists(checkpoint_dir(rc) / "step_00000005.socsckpt"));
  CHECK(fs::exists(checkpoint_dir(rc) / "step_00000010.socsckpt"));
  CHECK(slurp(latest_checkpoint(rc)) == slurp(first.final_checkpoint));
  const Checkpoint ck = read_checkpoint(first.final_checkpoint);
  CHECK(ck.step == 10);
  CHECK(config_differences(ck.config, rc.model).empty());
  for (const auto& row : first.rows) {
    CHECK(std::isfinite(row.loss.total));
    CHECK(row.loss.total ==
          doctest::Approx(row.loss.recon + rc.loss.omega_task * row.loss.task + rc.loss.beta * row.loss.kl).epsilon(1e-6));
  }
  const std::string header = slurp(rc.output_dir / "train_log.tsv").substr(0, 40);
  CHECK(header.rfind("step\trecon\tkl\ttask\ttotal\twall_seconds\n", 0) == 0);

  // Resume to 15 steps and compare with an uninterrupted 15-step run.
  rc.steps = 15;
  const TrainResult resumed = train(rc, true);
  REQUIRE(resumed.rows.size() == 5);
  CHECK(resumed.rows.front().step == 11);
  const auto log = read_training_log(rc.output_dir / "train_log.tsv");
  REQUIRE(log.size() == 15);
  for (std::size_t i = 0; i < log.size(); ++i) CHECK(log[i].step == static_cast<long long>(i + 1));

  RunConfig straight = rc;
  straight.output_dir = d.path / "straight";
  const TrainResult whole = train(straight, false);
  REQUIRE(whole.rows.size() == 15);
  const auto whole_log = read_training_log(straight.output_dir / "train_log.tsv");
  REQUIRE(whole_log.size() == 15);
  for (std::size_t i = 0; i < 15; ++i) {
    CHECK(whole_log[i].loss.total == log[i].loss.total);
    CHECK(whole_log[i].loss.kl == log[i].loss.kl);
  }

  // A second fresh run reproduces the losses exactly.
  RunConfig again = rc;
  again.output_dir = d.path / "again";
  again.steps = 10;
  const TrainResult repeat = train(again, false);
  for (std::size_t i = 0; i < 10; ++i) CHECK(repeat.rows[i].loss.total == first.rows[i].loss.total);
}

TEST_CASE("non-finite loss stops training with the step number") {
  test::TempDir d("nan");
  RunConfig rc = tiny_run(d.path);
  rc.loss.sigma_x = 1e-300;
  rc.model.pixel_sigma = 1e-300;
  try {
    train(rc, false);
    FAIL("expected a non-finite loss error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("non-finite loss at step 1") != std::string::npos);
  }
}

TEST_CASE("evaluation over checkpoints") {
  test::TempDir d("eval");
  RunConfig rc = tiny_run(d.path);
  rc.steps = 2;
  const fs::path ck = train(rc, false).final_checkpoint;

  const EvaluationResult one = evaluate_checkpoints({ck}, rc.val_manifest, rc.model);
  REQUIRE(one.runs.size() == 1);
  CHECK(one.runs[0].sequences.size() + one.runs[0].warnings.size() == 2);
  CHECK_FALSE(one.combined.ari_f.sem_defined);

  const EvaluationResult three = evaluate_checkpoints({ck, ck, ck}, rc.val_manifest, rc.model);
  CHECK(three.combined.ari_f.count == 3);
  CHECK(three.combined.ari_f.sem == 0.0);
  CHECK(three.combined.ari_f.mean == doctest::Approx(one.runs[0].ari_f.mean));

  ModelConfig other = rc.model;
  other.latent_dim = 6;
  try {
    evaluate_checkpoints({ck}, rc.val_manifest, other);
    FAIL("expected a config mismatch");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("latent_dim") != std::string::npos);
  }
}

TEST_CASE("visualization files") {
  test::TempDir d("vis");
  const SocsModel<float> model(test::tiny_config(), 1);
  const SequenceRecord rec = render_sequence(generate_scene(tiny_scene(), 4), tiny_scene());
  const auto files = visualize(model, rec, d.path);
  CHECK(files.size() == 1 * 2 + 1);
  for (const auto& f : files) CHECK(fs::exists(f));
  const Image overlay = read_ppm(d.path / "overlay_v0_f0.ppm");
  CHECK(overlay.width == 8);
  CHECK(overlay.height == 8);
  CHECK(fs::exists(d.path / "waypoints.ppm"));

  // Distinct slots get distinct colors.
  CHECK(slot_color(0) != slot_color(1));
  CHECK(slot_color(3) == slot_color(3));
}

TEST_CASE("command line") {
  test::TempDir d("cli");
  write_text(d.path / "scene.cfg", to_key_values(tiny_scene()).to_text());
  const std::string cfg = (d.path / "scene.cfg").string();

  REQUIRE(run_cli("generate-data --config " + cfg + " --n 2 --seed 5 --out " + (d.path / "a").string()) == 0);
  REQUIRE(run_cli("generate-data --config " + cfg + " --n 2 --seed 5 --out " + (d.path / "b").string()) == 0);
  for (const auto& e : fs::directory_iterator(d.path / "a")) {
    CHECK(slurp(e.path()) == slurp(d.path / "b" / e.path().filename()));
  }
  CHECK(run_cli("generate-data --config " + (d.path / "missing.cfg").string() + " --out " + (d.path / "c").string()) != 0);
  CHECK(run_cli("generate-data --n -1 --out " + (d.path / "c").string()) != 0);
  CHECK(run_cli("frobnicate") != 0);

  RunConfig rc = tiny_run(d.path / "run");
  rc.steps = 2;
  rc.output_dir = d.path / "out";
  write_text(d.path / "run.cfg", to_key_values(rc).to_text());
  const std::string run_cfg = (d.path / "run.cfg").string();
  REQUIRE(run_cli("train --quiet --config " + run_cfg + " --seed 4") == 0);
  CHECK(fs::exists(d.path / "out" / "seed_4" / "checkpoints" / "latest.socsckpt"));
  CHECK(run_cli("eval --config " + run_cfg + " --seeds 4 --out " + (d.path / "report.txt").string()) == 0);
  CHECK(slurp(d.path / "report.txt").find("ARI-F") != std::string::npos);
  CHECK(run_cli("visualize --config " + run_cfg + " --checkpoint " +
                (d.path / "out" / "seed_4" / "checkpoints" / "latest.socsckpt").string() + " --out " +
                (d.path / "vis").string()) == 0);
  CHECK(fs::exists(d.path / "vis" / "waypoints.ppm"));
  CHECK(run_cli("eval --config " + run_cfg + " --seeds 9") != 0);
}
