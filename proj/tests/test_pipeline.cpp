#include "audit/pipeline.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

using namespace audit;
namespace fs = std::filesystem;

namespace {

std::uint64_t file_digest(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  return fnv1a(bytes.data(), bytes.size());
}

// one small end-to-end workspace shared by the pipeline tests
struct Workspace {
  fs::path root;
  RunConfig cfg;

  Workspace() {
    root = fs::temp_directory_path() / "audit_test_pipeline";
    fs::remove_all(root);
    fs::create_directories(root);
    auto corpus = make_synthetic_corpus((root / "corpus").string(), 6, 31);
    cfg.corpus_manifest = (root / "corpus" / "corpus.tsv").string();
    cfg.dataset_dir = (root / "dataset").string();
    cfg.checkpoint_path = (root / "checkpoint.bin").string();
    cfg.loss_curve_path = (root / "loss_curve.tsv").string();
    cfg.report_path = (root / "report.tsv").string();
    cfg.mix = TaskMix{2, 1, 1, 1, 1};
    cfg.schedule_steps = 10;
    cfg.denoiser_buckets = 5;
    cfg.optimizer.steps = 30;
    cfg.optimizer.epoch_size = 10;
    cfg.griffin_lim_iters = 8;
    cfg.guidance.scale = 1.0;
    cfg.seed = 77;
  }
};

Workspace& ws() {
  static Workspace w;
  return w;
}

}  // namespace

TEST_CASE("config files parse sections, comments and blank lines") {
  fs::path p = ws().root / "test.cfg";
  {
    std::ofstream out(p);
    out << "# comment line\n"
        << "\n"
        << "mel.hop = 128   # trailing comment\n"
        << "seed=9\n"
        << "paths.dataset = /tmp/x\n";
  }
  KeyValueConfig kv = KeyValueConfig::from_file(p.string());
  CHECK(kv.get("mel.hop", 0) == 128);
  CHECK(kv.get_u64("seed", 0) == 9);
  CHECK(kv.get("paths.dataset", std::string()) == "/tmp/x");
  CHECK(!kv.has("mel.window"));
}

TEST_CASE("config rejects lines without an equals sign") {
  fs::path p = ws().root / "bad.cfg";
  {
    std::ofstream out(p);
    out << "mel.hop 128\n";
  }
  CHECK_THROWS(KeyValueConfig::from_file(p.string()));
}

TEST_CASE("cli overrides beat file values and env beats both") {
  fs::path p = ws().root / "layered.cfg";
  {
    std::ofstream out(p);
    out << "mel.hop = 128\nmel.window = 512\n";
  }
  KeyValueConfig kv = KeyValueConfig::from_file(p.string());
  kv.apply_overrides({{"mel.hop", "256"}});
  CHECK(kv.get("mel.hop", 0) == 256);
  CHECK(kv.get("mel.window", 0) == 512);

  setenv("AUDIT_MEL_HOP", "64", 1);
  kv.apply_environment();
  unsetenv("AUDIT_MEL_HOP");
  CHECK(kv.get("mel.hop", 0) == 64);
}

TEST_CASE("run_config_from maps dotted keys onto the run config") {
  KeyValueConfig kv;
  kv.set("mel.hop", "128");
  kv.set("codec.downsample", "4");
  kv.set("schedule.steps", "25");
  kv.set("guidance.scale", "2.5");
  kv.set("mix.add", "7");
  kv.set("seed", "4242");
  RunConfig c = run_config_from(kv);
  CHECK(c.mel.hop == 128);
  CHECK(c.codec.downsample == 4);
  CHECK(c.schedule_steps == 25);
  CHECK(c.guidance.scale == 2.5);
  CHECK(c.mix.add == 7);
  CHECK(c.seed == 4242);
  // untouched keys keep their defaults
  CHECK(c.mel.n_mels == 80);
  CHECK(c.mix.drop == 5);
}

TEST_CASE("build-dataset reports the mix and writes the manifest") {
  DatasetSummary s = cmd_build_dataset(ws().cfg);
  CHECK(s.total == ws().cfg.mix.total());
  CHECK(s.per_task.at("add") == 2);
  CHECK(s.per_task.at("drop") == 1);
  CHECK(s.per_task.at("replace") == 1);
  CHECK(s.per_task.at("inpaint") == 1);
  CHECK(s.per_task.at("super-resolution") == 1);
  CHECK(s.total_duration_s == doctest::Approx(2.0 * 10.0 * s.total));
  CHECK(fs::exists(fs::path(ws().cfg.dataset_dir) / "dataset.jsonl"));
}

TEST_CASE("build-dataset with a missing corpus fails without partial output") {
  RunConfig cfg = ws().cfg;
  cfg.corpus_manifest = (ws().root / "no_such.tsv").string();
  cfg.dataset_dir = (ws().root / "dataset_missing").string();
  CHECK_THROWS(cmd_build_dataset(cfg));
  CHECK(!fs::exists(fs::path(cfg.dataset_dir) / "dataset.jsonl"));
}

TEST_CASE("training writes a checkpoint and a monotone-ish loss curve") {
  TrainSummary s = cmd_train(ws().cfg);
  CHECK(fs::exists(ws().cfg.checkpoint_path));
  CHECK(fs::exists(ws().cfg.loss_curve_path));
  CHECK(s.epoch_losses.size() == 3);  // 30 steps / epoch_size 10
  CHECK(s.final_loss > 0.0);
  CHECK(s.constant_zero_loss > 0.0);
  CHECK(s.final_loss < s.constant_zero_loss);
  CHECK(load_loss_curve(ws().cfg.loss_curve_path).size() == 30);
}

TEST_CASE("training is reproducible from the run seed") {
  RunConfig cfg = ws().cfg;
  cfg.checkpoint_path = (ws().root / "ckpt_rep.bin").string();
  cfg.loss_curve_path = (ws().root / "curve_rep.tsv").string();
  cmd_train(cfg);
  std::uint64_t d1 = file_digest(cfg.checkpoint_path);
  std::uint64_t c1 = file_digest(cfg.loss_curve_path);
  cmd_train(cfg);
  CHECK(file_digest(cfg.checkpoint_path) == d1);
  CHECK(file_digest(cfg.loss_curve_path) == c1);
}

TEST_CASE("resume extends the loss curve and reuses the checkpoint") {
  RunConfig cfg = ws().cfg;
  cfg.checkpoint_path = (ws().root / "ckpt_resume.bin").string();
  cfg.loss_curve_path = (ws().root / "curve_resume.tsv").string();
  cmd_train(cfg);
  cmd_train(cfg, /*resume=*/true);
  CHECK(load_loss_curve(cfg.loss_curve_path).size() == 60);
  Checkpoint ck = load_checkpoint(cfg.checkpoint_path);
  CHECK(ck.sched.steps() == cfg.schedule_steps);
}

TEST_CASE("resume without a checkpoint fails cleanly") {
  RunConfig cfg = ws().cfg;
  cfg.checkpoint_path = (ws().root / "ckpt_absent.bin").string();
  CHECK_THROWS(cmd_train(cfg, /*resume=*/true));
}

TEST_CASE("edit produces a deterministic full-length wav") {
  const RunConfig& cfg = ws().cfg;
  REQUIRE(fs::exists(cfg.checkpoint_path));  // from the training test
  std::string input =
      (fs::path(cfg.dataset_dir) / "add_0000_in.wav").string();
  std::string out1 = (ws().root / "edit1.wav").string();
  std::string out2 = (ws().root / "edit2.wav").string();
  cmd_edit(cfg, input, "Add a burst of white noise in the background", out1);
  cmd_edit(cfg, input, "Add a burst of white noise in the background", out2);
  CHECK(file_digest(out1) == file_digest(out2));
  Waveform w = load_wav(out1, cfg.mel.sample_rate);
  CHECK(w.samples.size() == 160000);
  CHECK(peak(w) <= 1.0);
}

TEST_CASE("edit supports sdedit and dumps intermediates on request") {
  const RunConfig& cfg = ws().cfg;
  std::string input =
      (fs::path(cfg.dataset_dir) / "add_0000_in.wav").string();
  std::string out = (ws().root / "edit_sdedit.wav").string();
  EditOptions opts;
  opts.variant = SamplerVariant::Sdedit;
  opts.sdedit_steps = 4;
  opts.dump_dir = (ws().root / "dump").string();
  cmd_edit(cfg, input, "Drop a burst of white noise", out, opts);
  CHECK(fs::exists(out));
  for (const char* f : {"mel_in.grid", "z_in.grid", "z_out.grid", "mel_out.grid"})
    CHECK(fs::exists(fs::path(opts.dump_dir) / f));
}

TEST_CASE("an all-observable inpaint edit round-trips the input codec path") {
  const RunConfig& cfg = ws().cfg;
  std::string input =
      (fs::path(cfg.dataset_dir) / "add_0000_in.wav").string();

  // latent-shaped all-ones mask
  int rows = cfg.mel.n_mels / cfg.codec.downsample;
  int cols = cfg.mel.target_frames / cfg.codec.downsample;
  Array2d ones = Array2d::Ones(cfg.codec.channels * rows, cols);
  std::string mask_path = (ws().root / "mask_all.grid").string();
  save_grid(mask_path, ones, cfg.codec.channels);

  EditOptions opts;
  opts.variant = SamplerVariant::InpaintPrecise;
  opts.mask_path = mask_path;
  opts.dump_dir = (ws().root / "dump_inpaint").string();
  std::string out = (ws().root / "edit_inpaint.wav").string();
  cmd_edit(cfg, input, "Inpaint", out, opts);

  // z_out must equal z_in exactly when everything is observable
  CodecParams probe = cfg.codec;
  Latent z_in = load_latent((fs::path(opts.dump_dir) / "z_in.grid").string(), probe);
  Latent z_out = load_latent((fs::path(opts.dump_dir) / "z_out.grid").string(), probe);
  CHECK((z_in.data - z_out.data).abs().maxCoeff() < 1e-12);
}

TEST_CASE("inpaint variants require a mask file") {
  const RunConfig& cfg = ws().cfg;
  std::string input =
      (fs::path(cfg.dataset_dir) / "add_0000_in.wav").string();
  EditOptions opts;
  opts.variant = SamplerVariant::InpaintPrecise;
  CHECK_THROWS_AS(cmd_edit(cfg, input, "Inpaint",
                           (ws().root / "never.wav").string(), opts),
                  std::invalid_argument);
}

TEST_CASE("an empty instruction is rejected outside the text-free variant") {
  const RunConfig& cfg = ws().cfg;
  std::string input =
      (fs::path(cfg.dataset_dir) / "add_0000_in.wav").string();
  CHECK_THROWS_AS(
      cmd_edit(cfg, input, "", (ws().root / "never2.wav").string()),
      std::invalid_argument);
}

TEST_CASE("self-evaluation reports the metric identities") {
  RunConfig cfg = ws().cfg;
  fs::path dir = ws().root / "eval_self";
  fs::create_directories(dir);
  fs::copy_file(fs::path(cfg.dataset_dir) / "add_0000_in.wav", dir / "a.wav",
                fs::copy_options::overwrite_existing);
  fs::copy_file(fs::path(cfg.dataset_dir) / "add_0001_in.wav", dir / "b.wav",
                fs::copy_options::overwrite_existing);
  fs::copy_file(fs::path(cfg.dataset_dir) / "drop_0000_in.wav", dir / "c.wav",
                fs::copy_options::overwrite_existing);

  cfg.report_path = (ws().root / "report_self.tsv").string();
  EvalReport r = cmd_eval(cfg, dir.string(), dir.string());
  CHECK(r.lsd == doctest::Approx(0.0));
  CHECK(r.fd < 1e-6);
  CHECK(r.kl == doctest::Approx(0.0));
  CHECK(r.is >= 1.0 - 1e-9);
  CHECK(fs::exists(cfg.report_path));
}

TEST_CASE("eval skips unpaired files and fails when nothing pairs") {
  RunConfig cfg = ws().cfg;
  fs::path a = ws().root / "eval_a";
  fs::path b = ws().root / "eval_b";
  fs::create_directories(a);
  fs::create_directories(b);
  CHECK_THROWS(cmd_eval(cfg, a.string(), b.string()));
}

TEST_CASE("sampler names map onto variants") {
  CHECK(sampler_variant_from("ddpm") == SamplerVariant::Ddpm);
  CHECK(sampler_variant_from("sdedit") == SamplerVariant::Sdedit);
  CHECK(sampler_variant_from("inpaint") == SamplerVariant::InpaintPrecise);
  CHECK(sampler_variant_from("inpaint-rough") == SamplerVariant::InpaintRough);
  CHECK(sampler_variant_from("inpaint-wo-text") == SamplerVariant::InpaintWoText);
  CHECK_THROWS_AS(sampler_variant_from("magic"), std::invalid_argument);
}

TEST_CASE("inspect describes every artifact kind") {
  const RunConfig& cfg = ws().cfg;
  CHECK(cmd_inspect(cfg.checkpoint_path).find("checkpoint") != std::string::npos);
  CHECK(cmd_inspect((fs::path(cfg.dataset_dir) / "dataset.jsonl").string())
            .find("dataset manifest") != std::string::npos);
  CHECK(cmd_inspect(cfg.corpus_manifest).find("corpus manifest") !=
        std::string::npos);
  CHECK(cmd_inspect((fs::path(cfg.dataset_dir) / "add_0000_in.wav").string())
            .find("wav") != std::string::npos);
  CHECK(cmd_inspect((ws().root / "mask_all.grid").string()).find("grid") !=
        std::string::npos);
  CHECK_THROWS(cmd_inspect((ws().root / "nothing.bin").string()));
}
