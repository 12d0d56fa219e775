#pragma once

#include "audit/audio.hpp"
#include "audit/text.hpp"
#include "audit/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace audit {

struct CorpusItem {
  std::string id;
  std::string path;
  std::string text;
  double duration_s = 0.0;
};

/// Line-delimited "id<TAB>path<TAB>text". Relative audio paths resolve
/// against the manifest's directory.
std::vector<CorpusItem> load_corpus_manifest(const std::string& path);
void save_corpus_manifest(const std::string& path,
                          const std::vector<CorpusItem>& items);

struct TripletConfig {
  double target_s = 10.0;
  int sample_rate = 16000;
  double gain = 1.0;
  /// Sources are scaled to this peak before mixing so that overlays can
  /// never clip; keeps input/output bit-identical outside the edit region.
  double source_peak = 0.3;
  double replace_jitter_s = 0.5;
  double mask_frac_min = 0.05;
  double mask_frac_max = 0.30;
  int mask_regions_min = 1;
  int mask_regions_max = 2;
  std::vector<double> cutoffs_hz = {2000.0, 4000.0};
};

struct TripletExample {
  EditTask task = EditTask::Add;
  std::string instruction;
  Waveform input_audio;
  Waveform output_audio;
  std::vector<TimeRegion> edit_regions;        // time-domain tasks
  std::optional<double> cutoff_hz;             // super-resolution marker
  std::vector<std::string> source_ids;
  std::uint64_t seed = 0;
};

TripletExample gen_add(const CorpusItem& a, const CorpusItem& b,
                       std::uint64_t seed, const TripletConfig& cfg = {});
TripletExample gen_drop(const CorpusItem& a, const CorpusItem& b,
                        std::uint64_t seed, const TripletConfig& cfg = {});
TripletExample gen_replace(const CorpusItem& a, const CorpusItem& b,
                           const CorpusItem& c, std::uint64_t seed,
                           const TripletConfig& cfg = {});
TripletExample gen_inpaint(const CorpusItem& a, std::uint64_t seed,
                           const TripletConfig& cfg = {});
TripletExample gen_superres(const CorpusItem& a, std::uint64_t seed,
                            const TripletConfig& cfg = {});

struct DatasetRecord {
  EditTask task = EditTask::Add;
  std::string instruction;
  std::string input_path;
  std::string output_path;
  std::vector<TimeRegion> edit_regions;
  std::optional<double> cutoff_hz;
  std::vector<std::string> source_ids;
  std::uint64_t seed = 0;
};

struct TaskMix {
  // examples requested per task; zero entries are skipped
  int add = 0, drop = 0, replace = 0, inpaint = 0, superres = 0;
  int total() const { return add + drop + replace + inpaint + superres; }
};

/// Generate triplets into out_dir (audio files + line-delimited JSON manifest
/// at out_dir/dataset.jsonl). Fully reproducible from (corpus, mix, seed);
/// source pairs are sampled without replacement where the corpus allows.
std::vector<DatasetRecord> build_dataset(const std::vector<CorpusItem>& corpus,
                                         const TaskMix& mix,
                                         const std::string& out_dir,
                                         std::uint64_t seed,
                                         const TripletConfig& cfg = {});

std::vector<DatasetRecord> load_dataset_manifest(const std::string& path);
void save_dataset_manifest(const std::string& path,
                           const std::vector<DatasetRecord>& records);

/// Desk-scale captioned corpus: tones, chirps, harmonic drones and noise
/// bursts with generated labels, written as WAVs plus corpus.tsv.
std::vector<CorpusItem> make_synthetic_corpus(const std::string& dir,
                                              int n_items, std::uint64_t seed,
                                              int sample_rate = 16000);

}  // namespace audit
