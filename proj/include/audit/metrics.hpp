#pragma once

#include "audit/mel.hpp"
#include "audit/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace audit {

/// n x d embedding matrix, optionally with n x k class posteriors whose rows
/// sum to 1.
struct EmbeddingSet {
  Matrix embeddings;                 // n x d
  std::optional<Matrix> posteriors;  // n x k, rows on the simplex

  Eigen::Index count() const { return embeddings.rows(); }
  void validate() const;
};

/// Mean over frames of the RMS difference of log spectra (columns = frames).
double lsd(const Array2d& out, const Array2d& target);

/// ||mu_a - mu_b||^2 + Tr(Sa + Sb - 2 (Sa Sb)^{1/2}) on Gaussian fits, with
/// symmetric-PSD square root and epsilon-regularized covariances.
double frechet_distance(const EmbeddingSet& a, const EmbeddingSet& b,
                        double regularizer = 1e-6);

/// Mean over paired samples of KL(p_target || p_output), probabilities
/// floored at eps.
double kl_metric(const EmbeddingSet& target, const EmbeddingSet& output,
                 double eps = 1e-10);

/// exp(mean_n KL(p_n || p_bar)) with p_bar the marginal posterior.
double inception_score(const EmbeddingSet& a, double eps = 1e-10);

struct EvalReport {
  double lsd = 0;  // lower is better
  double fd = 0;   // lower is better
  double kl = 0;   // lower is better
  double is = 1;   // higher is better
};

std::string format_report(const EvalReport& r);
void save_report(const std::string& path, const EvalReport& r);

struct EmbedderConfig {
  int n_bands = 8;       // band statistics per mel grid
  int n_classes = 10;    // random-linear-head posterior size
  std::uint64_t head_seed = 12345;
};

/// PANNs stand-in: per-band energy statistics (means, variances, deltas) plus
/// a softmax posterior from a fixed random linear head. Deterministic.
struct MelStatsEmbedding {
  Vector embedding;
  Vector posterior;
};
MelStatsEmbedding mel_stats_embedder(const MelSpectrogram& m,
                                     const EmbedderConfig& cfg = {});

/// Stack per-clip embeddings into a set.
EmbeddingSet make_embedding_set(const std::vector<MelStatsEmbedding>& items);

}  // namespace audit
