#include "audit/pipeline.hpp"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <set>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

extern char** environ;

namespace fs = std::filesystem;

namespace audit {

namespace {

std::string trim(const std::string& s) {
  auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  KeyValueConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config: missing '=' at " + path + ":" +
                               std::to_string(lineno));
    cfg.values_[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return cfg;
}

void KeyValueConfig::apply_overrides(
    const std::map<std::string, std::string>& overrides) {
  for (const auto& [k, v] : overrides) values_[k] = v;
}

void KeyValueConfig::apply_environment(const char* prefix) {
  size_t plen = std::strlen(prefix);
  for (char** env = environ; *env; ++env) {
    std::string entry = *env;
    auto eq = entry.find('=');
    if (eq == std::string::npos || entry.compare(0, plen, prefix) != 0) continue;
    std::string key = entry.substr(plen, eq - plen);
    std::transform(key.begin(), key.end(), key.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    auto us = key.find('_');
    if (us != std::string::npos) key[us] = '.';
    values_[key] = entry.substr(eq + 1);
  }
}

bool KeyValueConfig::has(const std::string& key) const {
  return values_.count(key) != 0;
}

std::string KeyValueConfig::get(const std::string& key,
                                const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double KeyValueConfig::get(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : std::stod(it->second);
}

int KeyValueConfig::get(const std::string& key, int fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : std::stoi(it->second);
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key,
                                      std::uint64_t fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : std::stoull(it->second);
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  values_[key] = value;
}

RunConfig run_config_from(const KeyValueConfig& kv) {
  RunConfig c;
  c.corpus_manifest = kv.get("paths.corpus", c.corpus_manifest);
  c.dataset_dir = kv.get("paths.dataset", c.dataset_dir);
  c.checkpoint_path = kv.get("paths.checkpoint", c.checkpoint_path);
  c.loss_curve_path = kv.get("paths.loss_curve", c.loss_curve_path);
  c.report_path = kv.get("paths.report", c.report_path);

  c.mel.sample_rate = kv.get("mel.sample_rate", c.mel.sample_rate);
  c.mel.hop = kv.get("mel.hop", c.mel.hop);
  c.mel.window = kv.get("mel.window", c.mel.window);
  c.mel.n_mels = kv.get("mel.n_mels", c.mel.n_mels);
  c.mel.fmin = kv.get("mel.fmin", c.mel.fmin);
  c.mel.fmax = kv.get("mel.fmax", c.mel.fmax);
  c.mel.target_frames = kv.get("mel.target_frames", c.mel.target_frames);

  c.codec.downsample = kv.get("codec.downsample", c.codec.downsample);
  c.codec.channels = kv.get("codec.channels", c.codec.channels);

  c.triplet.target_s = kv.get("triplet.target_s", c.triplet.target_s);
  c.triplet.sample_rate = c.mel.sample_rate;
  c.triplet.gain = kv.get("triplet.gain", c.triplet.gain);
  c.triplet.replace_jitter_s =
      kv.get("triplet.replace_jitter_s", c.triplet.replace_jitter_s);
  c.triplet.mask_frac_min = kv.get("triplet.mask_frac_min", c.triplet.mask_frac_min);
  c.triplet.mask_frac_max = kv.get("triplet.mask_frac_max", c.triplet.mask_frac_max);

  c.mix.add = kv.get("mix.add", c.mix.add);
  c.mix.drop = kv.get("mix.drop", c.mix.drop);
  c.mix.replace = kv.get("mix.replace", c.mix.replace);
  c.mix.inpaint = kv.get("mix.inpaint", c.mix.inpaint);
  c.mix.superres = kv.get("mix.superres", c.mix.superres);

  c.guidance.scale = kv.get("guidance.scale", c.guidance.scale);
  c.guidance.p_drop = kv.get("guidance.p_drop", c.guidance.p_drop);

  c.text.dim = kv.get("text.dim", c.text.dim);
  c.text.max_length = kv.get("text.max_length", c.text.max_length);

  c.optimizer.steps = kv.get("optimizer.steps", c.optimizer.steps);
  c.optimizer.batch_size = kv.get("optimizer.batch_size", c.optimizer.batch_size);
  c.optimizer.lr = kv.get("optimizer.lr", c.optimizer.lr);
  c.optimizer.epoch_size = kv.get("optimizer.epoch_size", c.optimizer.epoch_size);

  c.schedule_steps = kv.get("schedule.steps", c.schedule_steps);
  c.beta_start = kv.get("schedule.beta_start", c.beta_start);
  c.beta_end = kv.get("schedule.beta_end", c.beta_end);
  c.denoiser_buckets = kv.get("denoiser.buckets", c.denoiser_buckets);
  c.griffin_lim_iters = kv.get("vocoder.iterations", c.griffin_lim_iters);
  c.seed = kv.get_u64("seed", c.seed);
  return c;
}

DatasetSummary cmd_build_dataset(const RunConfig& cfg) {
  auto corpus = load_corpus_manifest(cfg.corpus_manifest);
  auto records =
      build_dataset(corpus, cfg.mix, cfg.dataset_dir, cfg.seed, cfg.triplet);
  DatasetSummary summary;
  for (const auto& r : records) {
    summary.per_task[task_name(r.task)]++;
    summary.total++;
    summary.total_duration_s += 2.0 * cfg.triplet.target_s;
  }
  return summary;
}

namespace {

constexpr double kLatentScale = 32.0;

std::vector<TrainingExample> load_training_examples(const RunConfig& cfg) {
  auto records = load_dataset_manifest(
      (fs::path(cfg.dataset_dir) / "dataset.jsonl").string());
  std::vector<TrainingExample> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    TrainingExample ex;
    Waveform in_wav =
        load_wav((fs::path(cfg.dataset_dir) / r.input_path).string(),
                 cfg.mel.sample_rate);
    Waveform out_wav =
        load_wav((fs::path(cfg.dataset_dir) / r.output_path).string(),
                 cfg.mel.sample_rate);
    ex.z_in = encode(waveform_to_mel(in_wav, cfg.mel), cfg.codec);
    ex.z_out = encode(waveform_to_mel(out_wav, cfg.mel), cfg.codec);
    // latents are DCT coefficients of log power; scale to unit-ish range so
    // the diffusion prior is a reasonable fit
    ex.z_in.data /= kLatentScale;
    ex.z_out.data /= kLatentScale;
    ex.text = encode_text(r.instruction, cfg.text);
    out.push_back(std::move(ex));
  }
  return out;
}

void write_atomic(const std::string& path,
                  const std::function<void(const std::string&)>& writer) {
  std::string tmp = path + ".tmp";
  writer(tmp);
  fs::rename(tmp, path);
}

}  // namespace

TrainSummary cmd_train(const RunConfig& cfg, bool resume) {
  auto examples = load_training_examples(cfg);
  NoiseSchedule sched = cfg.schedule();
  LinearDenoiser denoiser(cfg.denoiser_buckets, cfg.text.dim,
                          cfg.schedule_steps);

  std::vector<double> curve;
  std::uint64_t train_seed = derive_seed(cfg.seed, "train-run");
  if (resume) {
    Checkpoint ck = load_checkpoint(cfg.checkpoint_path);
    if (ck.denoiser->n_params() != denoiser.n_params())
      throw std::runtime_error("cmd_train: checkpoint arch mismatch");
    denoiser.params() = ck.denoiser->params();
    curve = load_loss_curve(cfg.loss_curve_path);
    train_seed = derive_seed(cfg.seed, "train-resume", curve.size());
  }

  TrainResult result =
      train(std::move(examples), denoiser, sched, cfg.guidance, cfg.optimizer,
            train_seed);

  curve.insert(curve.end(), result.step_losses.begin(),
               result.step_losses.end());
  write_atomic(cfg.loss_curve_path,
               [&](const std::string& p) { save_loss_curve(p, curve); });
  write_atomic(cfg.checkpoint_path, [&](const std::string& p) {
    save_checkpoint(p, denoiser, sched, cfg.seed);
  });

  TrainSummary summary;
  summary.final_loss =
      result.epoch_losses.empty() ? result.initial_loss : result.epoch_losses.back();
  summary.constant_zero_loss = resume ? 0.0 : result.initial_loss;
  summary.epoch_losses = result.epoch_losses;
  return summary;
}

SamplerVariant sampler_variant_from(const std::string& name) {
  if (name == "ddpm") return SamplerVariant::Ddpm;
  if (name.rfind("sdedit", 0) == 0) return SamplerVariant::Sdedit;
  if (name == "inpaint-rough") return SamplerVariant::InpaintRough;
  if (name == "inpaint-precise" || name == "inpaint")
    return SamplerVariant::InpaintPrecise;
  if (name == "inpaint-wo-text") return SamplerVariant::InpaintWoText;
  throw std::invalid_argument("unknown sampler variant: " + name);
}

void cmd_edit(const RunConfig& cfg, const std::string& input_wav,
              const std::string& instruction, const std::string& output_wav,
              const EditOptions& opts) {
  if (instruction.empty() && opts.variant != SamplerVariant::InpaintWoText)
    throw std::invalid_argument(
        "cmd_edit: empty instruction (use the inpaint-wo-text variant for "
        "text-free editing)");

  Checkpoint ck = load_checkpoint(cfg.checkpoint_path);
  Waveform w = load_wav(input_wav, cfg.mel.sample_rate);
  if (std::abs(w.duration_s() - cfg.triplet.target_s) > 1e-9)
    w = pad_or_truncate(w, cfg.triplet.target_s);

  MelSpectrogram mel = waveform_to_mel(w, cfg.mel);
  Latent z_in = encode(mel, cfg.codec);
  z_in.data /= kLatentScale;
  TextEmbedding text = encode_text(instruction, cfg.text);

  Latent z_out;
  switch (opts.variant) {
    case SamplerVariant::Ddpm:
      z_out = ddpm_sample(*ck.denoiser, z_in, text, ck.sched, cfg.guidance,
                          cfg.seed);
      break;
    case SamplerVariant::Sdedit: {
      int n = opts.sdedit_steps > 0 ? opts.sdedit_steps : ck.sched.steps() / 2;
      z_out = sdedit_sample(*ck.denoiser, z_in, text, ck.sched, n, cfg.guidance,
                            cfg.seed);
      break;
    }
    case SamplerVariant::InpaintRough:
    case SamplerVariant::InpaintPrecise:
    case SamplerVariant::InpaintWoText: {
      if (opts.mask_path.empty())
        throw std::invalid_argument("cmd_edit: inpaint variants need --mask");
      ObservabilityMask mask{load_grid(opts.mask_path), MaskGranularity::Precise};
      InpaintVariant variant =
          opts.variant == SamplerVariant::InpaintRough ? InpaintVariant::Rough
          : opts.variant == SamplerVariant::InpaintWoText
              ? InpaintVariant::WithoutText
              : InpaintVariant::Precise;
      z_out = inpaint_sample(*ck.denoiser, z_in, mask, text, ck.sched,
                             cfg.guidance, cfg.seed, variant);
      break;
    }
  }

  Latent scaled = z_out;
  scaled.data *= kLatentScale;
  MelSpectrogram mel_out = decode(scaled, cfg.codec, cfg.mel);
  Waveform out = mel_to_waveform(mel_out, cfg.griffin_lim_iters,
                                 derive_seed(cfg.seed, "vocoder"));

  if (!opts.dump_dir.empty()) {
    fs::create_directories(opts.dump_dir);
    save_grid((fs::path(opts.dump_dir) / "mel_in.grid").string(), mel.grid);
    save_latent((fs::path(opts.dump_dir) / "z_in.grid").string(), z_in);
    save_latent((fs::path(opts.dump_dir) / "z_out.grid").string(), z_out);
    save_grid((fs::path(opts.dump_dir) / "mel_out.grid").string(), mel_out.grid);
  }
  save_wav(output_wav, out);
}

EvalReport cmd_eval(const RunConfig& cfg, const std::string& output_dir,
                    const std::string& reference_dir) {
  auto list_wavs = [](const std::string& dir) {
    std::vector<std::string> names;
    if (!fs::is_directory(dir))
      throw std::runtime_error("cmd_eval: not a directory: " + dir);
    for (const auto& e : fs::directory_iterator(dir))
      if (e.path().extension() == ".wav")
        names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
    return names;
  };
  auto out_names = list_wavs(output_dir);
  auto ref_names = list_wavs(reference_dir);

  std::vector<std::string> paired;
  std::set_intersection(out_names.begin(), out_names.end(), ref_names.begin(),
                        ref_names.end(), std::back_inserter(paired));
  for (const auto& n : out_names)
    if (!std::binary_search(ref_names.begin(), ref_names.end(), n))
      std::cerr << "warning: unpaired output " << n << " skipped\n";
  for (const auto& n : ref_names)
    if (!std::binary_search(out_names.begin(), out_names.end(), n))
      std::cerr << "warning: unpaired reference " << n << " skipped\n";
  if (paired.empty()) throw std::runtime_error("cmd_eval: no paired files");

  double lsd_acc = 0.0;
  std::vector<MelStatsEmbedding> out_emb, ref_emb;
  for (const auto& name : paired) {
    Waveform wo = pad_or_truncate(
        load_wav((fs::path(output_dir) / name).string(), cfg.mel.sample_rate),
        cfg.triplet.target_s);
    Waveform wr = pad_or_truncate(
        load_wav((fs::path(reference_dir) / name).string(), cfg.mel.sample_rate),
        cfg.triplet.target_s);
    MelSpectrogram mo = waveform_to_mel(wo, cfg.mel);
    MelSpectrogram mr = waveform_to_mel(wr, cfg.mel);
    lsd_acc += lsd(mo.grid, mr.grid);
    out_emb.push_back(mel_stats_embedder(mo));
    ref_emb.push_back(mel_stats_embedder(mr));
  }

  EvalReport report;
  report.lsd = lsd_acc / double(paired.size());
  EmbeddingSet out_set = make_embedding_set(out_emb);
  EmbeddingSet ref_set = make_embedding_set(ref_emb);
  report.fd = frechet_distance(out_set, ref_set);
  report.kl = kl_metric(ref_set, out_set);
  report.is = inception_score(out_set);
  write_atomic(cfg.report_path,
               [&](const std::string& p) { save_report(p, report); });
  return report;
}

std::string cmd_inspect(const std::string& path) {
  std::ostringstream ss;
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw std::runtime_error("inspect: cannot open " + path);
  char magic[4] = {0};
  probe.read(magic, 4);
  probe.close();

  if (std::strncmp(magic, "ACKP", 4) == 0) {
    Checkpoint ck = load_checkpoint(path);
    ss << "checkpoint: buckets=" << ck.denoiser->n_buckets()
       << " text_dim=" << ck.denoiser->text_dim()
       << " T=" << ck.sched.steps() << " seed=" << ck.seed
       << " params=" << ck.denoiser->n_params();
  } else if (std::strncmp(magic, "AGRD", 4) == 0) {
    int ch = 1;
    Array2d g = load_grid(path, &ch);
    ss << "grid: " << g.rows() << "x" << g.cols() << " channels=" << ch
       << " min=" << g.minCoeff() << " max=" << g.maxCoeff();
  } else if (std::strncmp(magic, "RIFF", 4) == 0) {
    Waveform w = load_wav(path);
    ss << "wav: " << w.duration_s() << "s @" << w.sample_rate
       << "Hz peak=" << peak(w) << " rms=" << rms(w);
  } else if (fs::path(path).extension() == ".jsonl") {
    auto records = load_dataset_manifest(path);
    std::map<std::string, int> counts;
    for (const auto& r : records) counts[task_name(r.task)]++;
    ss << "dataset manifest: " << records.size() << " records";
    for (const auto& [task, n] : counts) ss << " " << task << "=" << n;
  } else if (fs::path(path).extension() == ".tsv") {
    auto items = load_corpus_manifest(path);
    ss << "corpus manifest: " << items.size() << " items";
  } else {
    ss << "unrecognized file type";
  }
  return ss.str();
}

}  // namespace audit
