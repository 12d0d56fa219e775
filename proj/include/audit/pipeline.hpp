#pragma once

#include "audit/codec.hpp"
#include "audit/diffusion.hpp"
#include "audit/mel.hpp"
#include "audit/metrics.hpp"
#include "audit/triplet.hpp"

#include <map>
#include <string>

namespace audit {

/// Flat key-value config with dotted sections ("mel.hop = 256"). CLI flags
/// override file values; environment variables with the AUDIT_ prefix
/// override both (AUDIT_MEL_HOP=256).
class KeyValueConfig {
public:
  static KeyValueConfig from_file(const std::string& path);
  void apply_overrides(const std::map<std::string, std::string>& overrides);
  void apply_environment(const char* prefix = "AUDIT_");

  bool has(const std::string& key) const;
  std::string get(const std::string& key, const std::string& fallback) const;
  double get(const std::string& key, double fallback) const;
  int get(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  void set(const std::string& key, const std::string& value);

  const std::map<std::string, std::string>& entries() const { return values_; }

private:
  std::map<std::string, std::string> values_;
};

struct RunConfig {
  std::string corpus_manifest;
  std::string dataset_dir = "dataset";
  std::string checkpoint_path = "checkpoint.bin";
  std::string loss_curve_path = "loss_curve.tsv";
  std::string report_path = "report.tsv";

  MelConfig mel;
  CodecParams codec;
  TripletConfig triplet;
  TaskMix mix{5, 5, 5, 5, 5};
  GuidanceConfig guidance;
  TextEncoderConfig text;
  OptimizerConfig optimizer;
  int schedule_steps = 50;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  int denoiser_buckets = 10;
  int griffin_lim_iters = 60;
  std::uint64_t seed = 0;

  NoiseSchedule schedule() const {
    return NoiseSchedule::linear(schedule_steps, beta_start, beta_end);
  }
};

RunConfig run_config_from(const KeyValueConfig& kv);

struct DatasetSummary {
  std::map<std::string, int> per_task;
  int total = 0;
  double total_duration_s = 0.0;
};

DatasetSummary cmd_build_dataset(const RunConfig& cfg);

struct TrainSummary {
  double final_loss = 0.0;
  double constant_zero_loss = 0.0;
  std::vector<double> epoch_losses;
};

TrainSummary cmd_train(const RunConfig& cfg, bool resume = false);

enum class SamplerVariant { Ddpm, Sdedit, InpaintRough, InpaintPrecise, InpaintWoText };
SamplerVariant sampler_variant_from(const std::string& name);

struct EditOptions {
  SamplerVariant variant = SamplerVariant::Ddpm;
  int sdedit_steps = 0;           // defaults to T/2 when variant is Sdedit
  std::string mask_path;          // latent-shaped grid file for inpaint variants
  std::string dump_dir;           // optional intermediate artifact dump
};

void cmd_edit(const RunConfig& cfg, const std::string& input_wav,
              const std::string& instruction, const std::string& output_wav,
              const EditOptions& opts = {});

EvalReport cmd_eval(const RunConfig& cfg, const std::string& output_dir,
                    const std::string& reference_dir);

/// Human-readable description of a manifest, checkpoint, or grid file.
std::string cmd_inspect(const std::string& path);

}  // namespace audit
