#include "audit/triplet.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace audit {

std::vector<CorpusItem> load_corpus_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_corpus_manifest: cannot open " + path);
  fs::path base = fs::path(path).parent_path();
  std::vector<CorpusItem> items;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto t1 = line.find('\t');
    auto t2 = line.find('\t', t1 == std::string::npos ? t1 : t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos)
      throw std::runtime_error("load_corpus_manifest: malformed line: " + line);
    CorpusItem item;
    item.id = line.substr(0, t1);
    item.path = line.substr(t1 + 1, t2 - t1 - 1);
    item.text = line.substr(t2 + 1);
    if (item.text.empty())
      throw std::runtime_error("load_corpus_manifest: empty text for " + item.id);
    if (fs::path(item.path).is_relative())
      item.path = (base / item.path).string();
    items.push_back(std::move(item));
  }
  return items;
}

void save_corpus_manifest(const std::string& path,
                          const std::vector<CorpusItem>& items) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_corpus_manifest: cannot open " + path);
  for (const auto& it : items)
    out << it.id << "\t" << fs::path(it.path).filename().string() << "\t"
        << it.text << "\n";
}

namespace {

enum class PositionClass { Beginning, End, Middle, Background };

Waveform load_source(const CorpusItem& item, const TripletConfig& cfg) {
  Waveform w = load_wav(item.path, cfg.sample_rate);
  double p = peak(w);
  if (p > cfg.source_peak && p > 0.0) w.samples *= cfg.source_peak / p;
  return w;
}

struct AddComposition {
  Waveform base;    // A padded to target
  Waveform mixed;   // A with B overlaid
  TimeRegion region;
  PositionClass pos;
};

/// Shared by gen_add and gen_drop so the two are exact mirrors under a seed.
AddComposition compose_add(const CorpusItem& a, const CorpusItem& b, Rng& rng,
                           const TripletConfig& cfg) {
  Waveform base = pad_or_truncate(load_source(a, cfg), cfg.target_s);
  Waveform event = load_source(b, cfg);
  if (event.duration_s() > cfg.target_s)
    event = pad_or_truncate(event, cfg.target_s);

  auto pos = PositionClass(rng.uniform_int(4));
  double offset = 0.0;
  if (pos == PositionClass::Background) {
    event = pad_or_truncate(event, cfg.target_s);
  } else if (pos == PositionClass::End) {
    offset = cfg.target_s - event.duration_s();
  } else if (pos == PositionClass::Middle) {
    offset = 0.5 * (cfg.target_s - event.duration_s());
  }
  auto [mixed, region] = mix_overlay(base, event, offset, cfg.gain);
  return {std::move(base), std::move(mixed), region, pos};
}

InstructionTemplate pick_add_template(PositionClass pos, Rng& rng) {
  auto adds = templates_for(EditTask::Add);
  switch (pos) {
    case PositionClass::Beginning:
      return rng.uniform() < 0.5 ? adds[0] : adds[1];  // in/at the beginning
    case PositionClass::End: return adds[2];
    case PositionClass::Middle: return adds[3];
    case PositionClass::Background: return adds[4];
  }
  throw std::logic_error("pick_add_template");
}

InstructionTemplate pick(const std::vector<InstructionTemplate>& ts, Rng& rng) {
  return ts[rng.uniform_int(ts.size())];
}

}  // namespace

TripletExample gen_add(const CorpusItem& a, const CorpusItem& b,
                       std::uint64_t seed, const TripletConfig& cfg) {
  Rng rng(derive_seed(seed, "gen-add"));
  auto comp = compose_add(a, b, rng, cfg);
  TripletExample ex;
  ex.task = EditTask::Add;
  ex.input_audio = std::move(comp.base);
  ex.output_audio = std::move(comp.mixed);
  ex.edit_regions = {comp.region};
  ex.instruction = fill_template(pick_add_template(comp.pos, rng),
                                 {shorten_caption(b.text)});
  ex.source_ids = {a.id, b.id};
  ex.seed = seed;
  return ex;
}

TripletExample gen_drop(const CorpusItem& a, const CorpusItem& b,
                        std::uint64_t seed, const TripletConfig& cfg) {
  Rng rng(derive_seed(seed, "gen-add"));  // same stream: mirror of gen_add
  auto comp = compose_add(a, b, rng, cfg);
  TripletExample ex;
  ex.task = EditTask::Drop;
  ex.input_audio = std::move(comp.mixed);
  ex.output_audio = std::move(comp.base);
  ex.edit_regions = {comp.region};
  ex.instruction = fill_template(pick(templates_for(EditTask::Drop), rng),
                                 {shorten_caption(b.text)});
  ex.source_ids = {a.id, b.id};
  ex.seed = seed;
  return ex;
}

TripletExample gen_replace(const CorpusItem& a, const CorpusItem& b,
                           const CorpusItem& c, std::uint64_t seed,
                           const TripletConfig& cfg) {
  Rng rng(derive_seed(seed, "gen-replace"));
  Waveform base = pad_or_truncate(load_source(a, cfg), cfg.target_s);
  Waveform eb = load_source(b, cfg);
  Waveform ec = load_source(c, cfg);
  double half = 0.5 * cfg.target_s;
  if (eb.duration_s() > half) eb = pad_or_truncate(eb, half);
  if (ec.duration_s() > half) ec = pad_or_truncate(ec, half);

  double max_b = cfg.target_s - eb.duration_s();
  double t0 = rng.uniform(0.0, max_b);
  double jitter = rng.uniform(-cfg.replace_jitter_s, cfg.replace_jitter_s);
  double max_c = cfg.target_s - ec.duration_s();
  double t0p = std::clamp(t0 + jitter, 0.0, max_c);

  auto [in_wav, r_in] = insert_at(base, eb, t0, cfg.gain);
  auto [out_wav, r_out] = insert_at(base, ec, t0p, cfg.gain);

  TripletExample ex;
  ex.task = EditTask::Replace;
  ex.input_audio = std::move(in_wav);
  ex.output_audio = std::move(out_wav);
  ex.edit_regions = {r_in, r_out};
  ex.instruction = fill_template(pick(templates_for(EditTask::Replace), rng),
                                 {shorten_caption(b.text), shorten_caption(c.text)});
  ex.source_ids = {a.id, b.id, c.id};
  ex.seed = seed;
  return ex;
}

TripletExample gen_inpaint(const CorpusItem& a, std::uint64_t seed,
                           const TripletConfig& cfg) {
  Rng rng(derive_seed(seed, "gen-inpaint"));
  Waveform src = load_source(a, cfg);
  // keep masks inside the audible extent, not the zero padding
  double extent =
      std::min(cfg.target_s, double(src.samples.size()) / cfg.sample_rate);
  Waveform out_wav = pad_or_truncate(src, cfg.target_s);

  int n_regions = cfg.mask_regions_min +
                  int(rng.uniform_int(cfg.mask_regions_max - cfg.mask_regions_min + 1));
  // the fraction bound applies to the total masked time
  double total_len =
      cfg.target_s * rng.uniform(cfg.mask_frac_min, cfg.mask_frac_max);
  std::vector<TimeRegion> regions;
  for (int layout = 0; layout < 64 && regions.empty(); ++layout) {
    std::vector<double> lens;
    if (n_regions == 1) {
      lens = {total_len};
    } else {
      double w = rng.uniform(0.3, 0.7);
      lens = {w * total_len, (1.0 - w) * total_len};
    }
    std::vector<TimeRegion> attempt_regions;
    for (double len : lens) {
      len = std::min(len, extent);
      bool placed = false;
      for (int attempt = 0; attempt < 64 && !placed; ++attempt) {
        double start = rng.uniform(0.0, extent - len);
        // snap to the sample grid so region bounds match masked samples
        auto lo = (long long)std::floor(start * cfg.sample_rate);
        auto n = (long long)std::floor(len * cfg.sample_rate);
        TimeRegion r(double(lo) / cfg.sample_rate,
                     double(lo + n) / cfg.sample_rate);
        bool overlaps =
            std::any_of(attempt_regions.begin(), attempt_regions.end(),
                        [&](auto& q) {
                          return r.start_s < q.end_s && q.start_s < r.end_s;
                        });
        if (!overlaps) {
          attempt_regions.push_back(r);
          placed = true;
        }
      }
      if (!placed) {
        attempt_regions.clear();
        break;
      }
    }
    regions = std::move(attempt_regions);
  }
  if (regions.empty()) {
    // degenerate fallback: one region of the full budget from the start
    double len = std::min(total_len, extent);
    auto n = (long long)std::floor(len * cfg.sample_rate);
    regions.emplace_back(0.0, double(n) / cfg.sample_rate);
  }

  Waveform in_wav = out_wav;
  for (const auto& r : regions) in_wav = mask_region(in_wav, r);

  TripletExample ex;
  ex.task = EditTask::Inpaint;
  ex.input_audio = std::move(in_wav);
  ex.output_audio = std::move(out_wav);
  ex.edit_regions = regions;
  auto tmpl = pick(templates_for(EditTask::Inpaint), rng);
  ex.instruction = tmpl.slot_count()
                       ? fill_template(tmpl, {shorten_caption(a.text)})
                       : fill_template(tmpl, {});
  ex.source_ids = {a.id};
  ex.seed = seed;
  return ex;
}

TripletExample gen_superres(const CorpusItem& a, std::uint64_t seed,
                            const TripletConfig& cfg) {
  Rng rng(derive_seed(seed, "gen-superres"));
  Waveform out_wav = pad_or_truncate(load_source(a, cfg), cfg.target_s);
  double cutoff = cfg.cutoffs_hz[rng.uniform_int(cfg.cutoffs_hz.size())];

  TripletExample ex;
  ex.task = EditTask::SuperResolution;
  ex.input_audio = degrade_bandwidth(out_wav, cutoff);
  ex.output_audio = std::move(out_wav);
  ex.cutoff_hz = cutoff;
  auto tmpl = pick(templates_for(EditTask::SuperResolution), rng);
  ex.instruction = tmpl.slot_count()
                       ? fill_template(tmpl, {shorten_caption(a.text)})
                       : fill_template(tmpl, {});
  ex.source_ids = {a.id};
  ex.seed = seed;
  return ex;
}

namespace {

json record_to_json(const DatasetRecord& r) {
  json j;
  j["task"] = task_name(r.task);
  j["instruction"] = r.instruction;
  j["input"] = r.input_path;
  j["output"] = r.output_path;
  json regions = json::array();
  for (const auto& reg : r.edit_regions)
    regions.push_back({reg.start_s, reg.end_s});
  j["edit_regions"] = regions;
  if (r.cutoff_hz) j["cutoff_hz"] = *r.cutoff_hz;
  j["sources"] = r.source_ids;
  j["seed"] = r.seed;
  return j;
}

DatasetRecord record_from_json(const json& j) {
  DatasetRecord r;
  r.task = task_from_name(j.at("task").get<std::string>());
  r.instruction = j.at("instruction").get<std::string>();
  r.input_path = j.at("input").get<std::string>();
  r.output_path = j.at("output").get<std::string>();
  for (const auto& reg : j.at("edit_regions"))
    r.edit_regions.emplace_back(reg[0].get<double>(), reg[1].get<double>());
  if (j.contains("cutoff_hz")) r.cutoff_hz = j["cutoff_hz"].get<double>();
  r.source_ids = j.at("sources").get<std::vector<std::string>>();
  r.seed = j.at("seed").get<std::uint64_t>();
  return r;
}

}  // namespace

void save_dataset_manifest(const std::string& path,
                           const std::vector<DatasetRecord>& records) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("save_dataset_manifest: cannot open " + tmp);
    for (const auto& r : records) out << record_to_json(r).dump() << "\n";
    if (!out) throw std::runtime_error("save_dataset_manifest: write failed");
  }
  fs::rename(tmp, path);
}

std::vector<DatasetRecord> load_dataset_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_dataset_manifest: cannot open " + path);
  std::vector<DatasetRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(record_from_json(json::parse(line)));
  }
  return out;
}

namespace {

/// Draw `count` index tuples of arity `arity`, distinct within a tuple,
/// cycling through a seeded shuffle so sources repeat as little as possible.
std::vector<std::vector<size_t>> sample_tuples(size_t n_items, int count,
                                               int arity, Rng& rng) {
  if (n_items == 0) throw std::invalid_argument("build_dataset: empty corpus");
  if (size_t(arity) > n_items)
    throw std::invalid_argument("build_dataset: corpus smaller than task arity");
  std::vector<size_t> order(n_items);
  std::iota(order.begin(), order.end(), 0);
  size_t pos = n_items;  // force initial shuffle
  auto next = [&]() {
    if (pos >= order.size()) {
      for (size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rng.uniform_int(i)]);
      pos = 0;
    }
    return order[pos++];
  };
  std::vector<std::vector<size_t>> tuples;
  for (int i = 0; i < count; ++i) {
    std::vector<size_t> t;
    while (int(t.size()) < arity) {
      size_t idx = next();
      if (std::find(t.begin(), t.end(), idx) == t.end()) t.push_back(idx);
    }
    tuples.push_back(std::move(t));
  }
  return tuples;
}

}  // namespace

std::vector<DatasetRecord> build_dataset(const std::vector<CorpusItem>& corpus,
                                         const TaskMix& mix,
                                         const std::string& out_dir,
                                         std::uint64_t seed,
                                         const TripletConfig& cfg) {
  if (corpus.empty()) throw std::invalid_argument("build_dataset: empty corpus");
  fs::create_directories(out_dir);

  struct TaskPlan {
    EditTask task;
    int count;
    int arity;
  };
  const std::vector<TaskPlan> plans = {
      {EditTask::Add, mix.add, 2},
      {EditTask::Drop, mix.drop, 2},
      {EditTask::Replace, mix.replace, 3},
      {EditTask::Inpaint, mix.inpaint, 1},
      {EditTask::SuperResolution, mix.superres, 1},
  };

  std::vector<DatasetRecord> records;
  for (const auto& plan : plans) {
    if (plan.count <= 0) continue;
    Rng pick_rng(derive_seed(seed, "pick-" + task_name(plan.task)));
    auto tuples = sample_tuples(corpus.size(), plan.count, plan.arity, pick_rng);
    for (int i = 0; i < plan.count; ++i) {
      std::uint64_t ex_seed = derive_seed(seed, task_name(plan.task), i);
      const auto& t = tuples[i];
      TripletExample ex;
      switch (plan.task) {
        case EditTask::Add:
          ex = gen_add(corpus[t[0]], corpus[t[1]], ex_seed, cfg);
          break;
        case EditTask::Drop:
          ex = gen_drop(corpus[t[0]], corpus[t[1]], ex_seed, cfg);
          break;
        case EditTask::Replace:
          ex = gen_replace(corpus[t[0]], corpus[t[1]], corpus[t[2]], ex_seed, cfg);
          break;
        case EditTask::Inpaint:
          ex = gen_inpaint(corpus[t[0]], ex_seed, cfg);
          break;
        case EditTask::SuperResolution:
          ex = gen_superres(corpus[t[0]], ex_seed, cfg);
          break;
      }
      std::ostringstream stem;
      stem << task_name(plan.task) << "_" << std::setw(4) << std::setfill('0')
           << i;
      DatasetRecord rec;
      rec.task = ex.task;
      rec.instruction = ex.instruction;
      rec.input_path = stem.str() + "_in.wav";
      rec.output_path = stem.str() + "_out.wav";
      rec.edit_regions = ex.edit_regions;
      rec.cutoff_hz = ex.cutoff_hz;
      rec.source_ids = ex.source_ids;
      rec.seed = ex_seed;
      save_wav((fs::path(out_dir) / rec.input_path).string(), ex.input_audio);
      save_wav((fs::path(out_dir) / rec.output_path).string(), ex.output_audio);
      records.push_back(std::move(rec));
    }
  }
  save_dataset_manifest((fs::path(out_dir) / "dataset.jsonl").string(), records);
  return records;
}

std::vector<CorpusItem> make_synthetic_corpus(const std::string& dir,
                                              int n_items, std::uint64_t seed,
                                              int sample_rate) {
  fs::create_directories(dir);
  Rng rng(derive_seed(seed, "synthetic-corpus"));

  static const std::vector<std::pair<std::string, std::string>> kinds = {
      {"tone", "a steady {} tone"},
      {"chirp", "a rising chirp"},
      {"noise", "a burst of white noise"},
      {"drone", "a low harmonic drone"},
      {"beeps", "a series of short beeps"},
  };
  static const std::vector<std::pair<double, std::string>> pitches = {
      {220.0, "low"}, {440.0, "mid"}, {880.0, "high"}, {1760.0, "very high"},
  };

  std::vector<CorpusItem> items;
  for (int i = 0; i < n_items; ++i) {
    const auto& [kind, caption_tmpl] = kinds[i % kinds.size()];
    auto [freq, pitch_word] = pitches[rng.uniform_int(pitches.size())];
    double dur = rng.uniform(4.0, 10.0);
    Eigen::Index n = Eigen::Index(dur * sample_rate);
    Array1d s(n);
    double amp = 0.25;
    if (kind == "tone") {
      for (Eigen::Index k = 0; k < n; ++k)
        s(k) = amp * std::sin(2.0 * M_PI * freq * k / sample_rate);
    } else if (kind == "chirp") {
      double f1 = freq * 3.0;
      for (Eigen::Index k = 0; k < n; ++k) {
        double u = double(k) / n;
        s(k) = amp * std::sin(2.0 * M_PI * (freq + 0.5 * (f1 - freq) * u) * u * dur);
      }
    } else if (kind == "noise") {
      for (Eigen::Index k = 0; k < n; ++k) s(k) = amp * rng.normal() * 0.4;
    } else if (kind == "drone") {
      for (Eigen::Index k = 0; k < n; ++k) {
        double ph = 2.0 * M_PI * (freq / 2.0) * k / sample_rate;
        s(k) = amp * (0.6 * std::sin(ph) + 0.3 * std::sin(2 * ph) +
                      0.1 * std::sin(3 * ph));
      }
    } else {  // beeps
      for (Eigen::Index k = 0; k < n; ++k) {
        double tsec = double(k) / sample_rate;
        bool on = std::fmod(tsec, 0.5) < 0.2;
        s(k) = on ? amp * std::sin(2.0 * M_PI * freq * k / sample_rate) : 0.0;
      }
    }
    // fade edges to avoid clicks
    Eigen::Index fade = std::min<Eigen::Index>(sample_rate / 100, n / 2);
    for (Eigen::Index k = 0; k < fade; ++k) {
      double g = double(k) / fade;
      s(k) *= g;
      s(n - 1 - k) *= g;
    }

    CorpusItem item;
    item.id = "syn" + std::to_string(i);
    std::string caption = caption_tmpl;
    auto slot = caption.find("{}");
    if (slot != std::string::npos) caption.replace(slot, 2, pitch_word);
    item.text = caption;
    item.path = (fs::path(dir) / (item.id + ".wav")).string();
    item.duration_s = dur;
    Waveform w{std::move(s), sample_rate};
    save_wav(item.path, w);
    items.push_back(std::move(item));
  }
  save_corpus_manifest((fs::path(dir) / "corpus.tsv").string(), items);
  return items;
}

}  // namespace audit
