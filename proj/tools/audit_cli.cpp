#include "audit/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace audit;

namespace {

RunConfig make_config(const std::string& config_path,
                      const std::map<std::string, std::string>& overrides) {
  KeyValueConfig kv;
  if (!config_path.empty()) kv = KeyValueConfig::from_file(config_path);
  kv.apply_environment();
  kv.apply_overrides(overrides);
  return run_config_from(kv);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Instruction-guided audio editing: triplet data forging, latent "
               "diffusion training and sampling, and objective evaluation"};
  app.require_subcommand(1);

  std::string config_path;
  std::map<std::string, std::string> overrides;
  std::vector<std::string> set_pairs;
  app.add_option("--config", config_path, "Key-value config file");
  app.add_option("--set", set_pairs,
                 "Override a config entry, e.g. --set mel.hop=256");
  std::string seed_str;
  app.add_option("--seed", seed_str, "Root seed (overrides config)");

  auto parse_overrides = [&]() {
    for (const auto& kv : set_pairs) {
      auto eq = kv.find('=');
      if (eq == std::string::npos)
        throw CLI::ValidationError("--set expects key=value, got " + kv);
      overrides[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    if (!seed_str.empty()) overrides["seed"] = seed_str;
  };

  // make-corpus
  auto* mc = app.add_subcommand("make-corpus",
                                "Write the synthetic captioned corpus");
  std::string mc_dir = "corpus";
  int mc_items = 25;
  mc->add_option("--out", mc_dir, "Output directory");
  mc->add_option("--items", mc_items, "Number of clips");

  // build-dataset
  auto* bd = app.add_subcommand("build-dataset",
                                "Forge (instruction, input, output) triplets");

  // train
  auto* tr = app.add_subcommand("train", "Train the toy latent denoiser");
  bool tr_resume = false;
  tr->add_flag("--resume", tr_resume, "Continue from the existing checkpoint");

  // edit
  auto* ed = app.add_subcommand("edit", "Run instruction-guided editing");
  std::string ed_in, ed_out = "edited.wav", ed_instruction, ed_variant = "ddpm";
  std::string ed_mask, ed_dump;
  int ed_steps = 0;
  ed->add_option("--input", ed_in, "Input WAV")->required();
  ed->add_option("--out", ed_out, "Output WAV");
  ed->add_option("--instruction", ed_instruction, "Editing instruction text");
  ed->add_option("--sampler", ed_variant,
                 "ddpm | sdedit | inpaint-precise | inpaint-rough | "
                 "inpaint-wo-text");
  ed->add_option("--sdedit-steps", ed_steps, "N for the sdedit sampler");
  ed->add_option("--mask", ed_mask, "Latent-shaped observability mask file");
  ed->add_option("--dump", ed_dump, "Directory for intermediate artifacts");

  // eval
  auto* ev = app.add_subcommand("eval", "Score outputs against references");
  std::string ev_out_dir, ev_ref_dir;
  ev->add_option("--outputs", ev_out_dir, "Directory of generated WAVs")
      ->required();
  ev->add_option("--references", ev_ref_dir, "Directory of reference WAVs")
      ->required();

  // inspect
  auto* in = app.add_subcommand("inspect", "Describe a manifest/checkpoint/grid");
  std::string in_path;
  in->add_option("path", in_path, "File to inspect")->required();

  // let --config/--set/--seed appear after the subcommand name
  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    parse_overrides();
    if (*mc) {
      RunConfig cfg = make_config(config_path, overrides);
      auto items = make_synthetic_corpus(mc_dir, mc_items, cfg.seed,
                                         cfg.mel.sample_rate);
      std::cout << "wrote " << items.size() << " clips to " << mc_dir << "\n";
    } else if (*bd) {
      RunConfig cfg = make_config(config_path, overrides);
      DatasetSummary s = cmd_build_dataset(cfg);
      std::cout << "dataset: " << s.total << " triplets, "
                << s.total_duration_s << "s of audio\n";
      for (const auto& [task, n] : s.per_task)
        std::cout << "  " << task << ": " << n << "\n";
    } else if (*tr) {
      RunConfig cfg = make_config(config_path, overrides);
      TrainSummary s = cmd_train(cfg, tr_resume);
      std::cout << "final eval loss: " << s.final_loss << "\n";
      if (!tr_resume)
        std::cout << "constant-zero baseline: " << s.constant_zero_loss << "\n";
    } else if (*ed) {
      RunConfig cfg = make_config(config_path, overrides);
      EditOptions opts;
      opts.variant = sampler_variant_from(ed_variant);
      opts.sdedit_steps = ed_steps;
      opts.mask_path = ed_mask;
      opts.dump_dir = ed_dump;
      cmd_edit(cfg, ed_in, ed_instruction, ed_out, opts);
      std::cout << "wrote " << ed_out << "\n";
    } else if (*ev) {
      RunConfig cfg = make_config(config_path, overrides);
      EvalReport r = cmd_eval(cfg, ev_out_dir, ev_ref_dir);
      std::cout << format_report(r);
    } else if (*in) {
      std::cout << cmd_inspect(in_path) << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
