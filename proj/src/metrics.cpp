#include "audit/metrics.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <fstream>
#include <sstream>

namespace audit {

void EmbeddingSet::validate() const {
  if (!embeddings.allFinite())
    throw std::invalid_argument("EmbeddingSet: non-finite embeddings");
  if (posteriors) {
    if (posteriors->rows() != embeddings.rows())
      throw std::invalid_argument("EmbeddingSet: posterior count mismatch");
    for (Eigen::Index i = 0; i < posteriors->rows(); ++i)
      if (std::abs(posteriors->row(i).sum() - 1.0) > 1e-6)
        throw std::invalid_argument("EmbeddingSet: posterior row not normalized");
  }
}

double lsd(const Array2d& out, const Array2d& target) {
  if (out.rows() != target.rows() || out.cols() != target.cols())
    throw std::invalid_argument("lsd: shape mismatch");
  double acc = 0.0;
  for (Eigen::Index f = 0; f < out.cols(); ++f)
    acc += std::sqrt((out.col(f) - target.col(f)).square().mean());
  return acc / double(out.cols());
}

namespace {

/// Symmetric PSD square root by eigendecomposition, eigenvalues clamped at 0.
Matrix psd_sqrt(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()));
  Array1d ev = es.eigenvalues().array().max(0.0).sqrt();
  return es.eigenvectors() * ev.matrix().asDiagonal() *
         es.eigenvectors().transpose();
}

}  // namespace

double frechet_distance(const EmbeddingSet& a, const EmbeddingSet& b,
                        double regularizer) {
  a.validate();
  b.validate();
  if (a.embeddings.cols() != b.embeddings.cols())
    throw std::invalid_argument("frechet_distance: dim mismatch");
  if (a.count() < 2 || b.count() < 2)
    throw std::invalid_argument("frechet_distance: need at least 2 samples");

  auto fit = [&](const Matrix& x) {
    Vector mu = x.colwise().mean().transpose();
    Matrix centered = x.rowwise() - mu.transpose();
    Matrix cov = centered.transpose() * centered / double(x.rows() - 1);
    cov.diagonal().array() += regularizer;
    return std::make_pair(mu, cov);
  };
  auto [mu_a, cov_a] = fit(a.embeddings);
  auto [mu_b, cov_b] = fit(b.embeddings);

  // Tr((Sa Sb)^{1/2}) via the symmetric form sqrt(Sa)^T Sb sqrt(Sa)
  Matrix root_a = psd_sqrt(cov_a);
  Matrix cross = psd_sqrt(root_a * cov_b * root_a);

  double fd = (mu_a - mu_b).squaredNorm() + cov_a.trace() + cov_b.trace() -
              2.0 * cross.trace();
  return std::max(fd, 0.0);
}

double kl_metric(const EmbeddingSet& target, const EmbeddingSet& output,
                 double eps) {
  target.validate();
  output.validate();
  if (!target.posteriors || !output.posteriors)
    throw std::invalid_argument("kl_metric: posteriors required");
  if (target.count() != output.count())
    throw std::invalid_argument("kl_metric: unpaired sample counts");

  const Matrix& p = *target.posteriors;
  const Matrix& q = *output.posteriors;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    double kl = 0.0;
    for (Eigen::Index k = 0; k < p.cols(); ++k) {
      double pi = std::max(p(i, k), eps);
      double qi = std::max(q(i, k), eps);
      kl += pi * std::log(pi / qi);
    }
    acc += kl;
  }
  return acc / double(p.rows());
}

double inception_score(const EmbeddingSet& a, double eps) {
  a.validate();
  if (!a.posteriors)
    throw std::invalid_argument("inception_score: posteriors required");
  const Matrix& p = *a.posteriors;
  Vector marginal = p.colwise().mean().transpose();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    for (Eigen::Index k = 0; k < p.cols(); ++k) {
      double pi = std::max(p(i, k), eps);
      acc += pi * std::log(pi / std::max(marginal(k), eps));
    }
  return std::exp(acc / double(p.rows()));
}

std::string format_report(const EvalReport& r) {
  std::ostringstream ss;
  ss.precision(6);
  ss << "LSD(down)\t" << r.lsd << "\n"
     << "FD(down)\t" << r.fd << "\n"
     << "KL(down)\t" << r.kl << "\n"
     << "IS(up)\t" << r.is << "\n";
  return ss.str();
}

void save_report(const std::string& path, const EvalReport& r) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_report: cannot open " + path);
  out << format_report(r);
}

MelStatsEmbedding mel_stats_embedder(const MelSpectrogram& m,
                                     const EmbedderConfig& cfg) {
  const Array2d& g = m.grid;
  Eigen::Index rows_per_band = std::max<Eigen::Index>(1, g.rows() / cfg.n_bands);

  // per-band mean, variance, and mean absolute frame delta
  Vector emb(3 * cfg.n_bands);
  for (int b = 0; b < cfg.n_bands; ++b) {
    Eigen::Index r0 = b * rows_per_band;
    Eigen::Index nr = (b == cfg.n_bands - 1) ? g.rows() - r0 : rows_per_band;
    auto band = g.middleRows(r0, nr);
    double mean = band.mean();
    double var = (band - mean).square().mean();
    double delta = 0.0;
    if (band.cols() > 1)
      delta = (band.rightCols(band.cols() - 1) - band.leftCols(band.cols() - 1))
                  .abs()
                  .mean();
    emb(b) = mean;
    emb(cfg.n_bands + b) = var;
    emb(2 * cfg.n_bands + b) = delta;
  }

  // fixed random linear head -> softmax posterior
  Rng rng(derive_seed(cfg.head_seed, "embedder-head"));
  Matrix head(cfg.n_classes, emb.size());
  for (Eigen::Index i = 0; i < head.rows(); ++i)
    for (Eigen::Index j = 0; j < head.cols(); ++j) head(i, j) = rng.normal();
  head /= std::sqrt(double(emb.size()));

  Vector logits = head * emb;
  logits.array() -= logits.maxCoeff();
  Vector post = logits.array().exp();
  post /= post.sum();
  return {std::move(emb), std::move(post)};
}

EmbeddingSet make_embedding_set(const std::vector<MelStatsEmbedding>& items) {
  if (items.empty()) throw std::invalid_argument("make_embedding_set: empty");
  EmbeddingSet set;
  set.embeddings.resize(items.size(), items[0].embedding.size());
  Matrix post(items.size(), items[0].posterior.size());
  for (size_t i = 0; i < items.size(); ++i) {
    set.embeddings.row(i) = items[i].embedding.transpose();
    post.row(i) = items[i].posterior.transpose();
  }
  set.posteriors = std::move(post);
  return set;
}

}  // namespace audit
