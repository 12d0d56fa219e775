#include "audit/metrics.hpp"

#include <doctest.h>

#include <filesystem>

using namespace audit;

namespace {

Array2d random_grid(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Rng rng(seed);
  return rng.normal_array(rows, cols);
}

EmbeddingSet gaussian_set(Eigen::Index n, Eigen::Index d, double mu,
                          std::uint64_t seed) {
  Rng rng(seed);
  EmbeddingSet s;
  s.embeddings = (rng.normal_array(n, d) + mu).matrix();
  return s;
}

EmbeddingSet posterior_set(const Matrix& p) {
  EmbeddingSet s;
  s.embeddings = Matrix::Zero(p.rows(), 2);
  s.posteriors = p;
  return s;
}

MelSpectrogram mel_of(const Array2d& g) {
  MelSpectrogram m;
  m.grid = g;
  return m;
}

}  // namespace

TEST_CASE("lsd of a grid with itself is zero") {
  Array2d g = random_grid(80, 624, 1);
  CHECK(lsd(g, g) == 0.0);
}

TEST_CASE("lsd of a constant log offset is the offset magnitude") {
  Array2d g = random_grid(80, 100, 2);
  for (double c : {0.5, -1.25, 3.0})
    CHECK(lsd(g + c, g) == doctest::Approx(std::abs(c)));
}

TEST_CASE("lsd is symmetric and nonnegative") {
  Array2d a = random_grid(80, 50, 3), b = random_grid(80, 50, 4);
  double ab = lsd(a, b);
  CHECK(ab >= 0.0);
  CHECK(ab == doctest::Approx(lsd(b, a)));
}

TEST_CASE("lsd single-column matches a hand-computed RMS") {
  Array2d a(2, 1), b(2, 1);
  a << 3.0, 4.0;
  b << 0.0, 0.0;
  CHECK(lsd(a, b) == doctest::Approx(std::sqrt(12.5)));  // sqrt((9+16)/2)
}

TEST_CASE("lsd rejects mismatched shapes") {
  CHECK_THROWS_AS(lsd(Array2d::Zero(80, 100), Array2d::Zero(80, 99)),
                  std::invalid_argument);
}

TEST_CASE("frechet distance of a set with itself is below 1e-6") {
  EmbeddingSet s = gaussian_set(500, 8, 0.0, 10);
  CHECK(frechet_distance(s, s) < 1e-6);
}

TEST_CASE("frechet distance recovers the analytic mean-shift value") {
  // N(0, I) vs N(mu, I): FD = ||mu||^2
  const Eigen::Index n = 10000, d = 4;
  double shift = 0.7;
  EmbeddingSet a = gaussian_set(n, d, 0.0, 11);
  EmbeddingSet b = gaussian_set(n, d, shift, 12);
  double expected = d * shift * shift;
  CHECK(frechet_distance(a, b) == doctest::Approx(expected).epsilon(0.05));
}

TEST_CASE("frechet distance is symmetric and nonnegative") {
  EmbeddingSet a = gaussian_set(400, 6, 0.0, 13);
  EmbeddingSet b = gaussian_set(400, 6, 0.5, 14);
  double ab = frechet_distance(a, b);
  CHECK(ab >= 0.0);
  CHECK(ab == doctest::Approx(frechet_distance(b, a)).epsilon(1e-6));
}

TEST_CASE("frechet distance is invariant under a shared rotation") {
  EmbeddingSet a = gaussian_set(2000, 3, 0.0, 15);
  EmbeddingSet b = gaussian_set(2000, 3, 0.4, 16);
  double base = frechet_distance(a, b);

  // Householder rotation oracle
  Vector v(3);
  v << 1.0, 2.0, -0.5;
  Matrix q = Matrix::Identity(3, 3) - 2.0 * v * v.transpose() / v.squaredNorm();
  EmbeddingSet ar, br;
  ar.embeddings = a.embeddings * q.transpose();
  br.embeddings = b.embeddings * q.transpose();
  CHECK(frechet_distance(ar, br) == doctest::Approx(base).epsilon(1e-3));
}

TEST_CASE("frechet distance needs at least two samples per side") {
  EmbeddingSet tiny;
  tiny.embeddings = Matrix::Zero(1, 4);
  EmbeddingSet ok = gaussian_set(10, 4, 0.0, 17);
  CHECK_THROWS_AS(frechet_distance(tiny, ok), std::invalid_argument);
  CHECK_THROWS_AS(frechet_distance(ok, tiny), std::invalid_argument);
}

TEST_CASE("kl metric of identical posteriors is zero") {
  Matrix p(3, 2);
  p << 0.5, 0.5, 0.9, 0.1, 0.25, 0.75;
  CHECK(kl_metric(posterior_set(p), posterior_set(p)) == doctest::Approx(0.0));
}

TEST_CASE("two-class certain-vs-uniform KL is log 2") {
  Matrix target(1, 2), output(1, 2);
  target << 1.0, 0.0;
  output << 0.5, 0.5;
  CHECK(kl_metric(posterior_set(target), posterior_set(output)) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-6));
}

TEST_CASE("kl metric matches a hand-computed two-row mean") {
  Matrix target(2, 2), output(2, 2);
  target << 0.75, 0.25, 0.5, 0.5;
  output << 0.5, 0.5, 0.5, 0.5;
  double row0 = 0.75 * std::log(1.5) + 0.25 * std::log(0.5);
  CHECK(kl_metric(posterior_set(target), posterior_set(output)) ==
        doctest::Approx(row0 / 2.0));
}

TEST_CASE("kl metric is nonnegative and zero only at equality") {
  Rng rng(18);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix t(4, 3), o(4, 3);
    for (Eigen::Index i = 0; i < 4; ++i) {
      Array1d a(3), b(3);
      for (int j = 0; j < 3; ++j) {
        a(j) = rng.uniform(0.01, 1.0);
        b(j) = rng.uniform(0.01, 1.0);
      }
      t.row(i) = (a / a.sum()).matrix().transpose();
      o.row(i) = (b / b.sum()).matrix().transpose();
    }
    CHECK(kl_metric(posterior_set(t), posterior_set(o)) >= 0.0);
  }
}

TEST_CASE("kl metric requires paired sets of equal size") {
  Matrix a = Matrix::Constant(2, 2, 0.5), b = Matrix::Constant(3, 2, 0.5);
  CHECK_THROWS_AS(kl_metric(posterior_set(a), posterior_set(b)),
                  std::invalid_argument);
}

TEST_CASE("inception score of identical posteriors is exactly one") {
  Matrix p = Matrix::Constant(50, 4, 0.25);
  CHECK(inception_score(posterior_set(p)) == doctest::Approx(1.0));
}

TEST_CASE("inception score of distinct one-hot rows equals the class count") {
  const int n = 6;
  Matrix p = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) p(i, i) = 1.0;
  CHECK(inception_score(posterior_set(p)) == doctest::Approx(double(n)));
}

TEST_CASE("inception score stays within [1, k]") {
  Rng rng(19);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 16, k = 5;
    Matrix p(n, k);
    for (int i = 0; i < n; ++i) {
      Array1d row(k);
      for (int j = 0; j < k; ++j) row(j) = rng.uniform(0.001, 1.0);
      p.row(i) = (row / row.sum()).matrix().transpose();
    }
    double score = inception_score(posterior_set(p));
    CHECK(score >= 1.0 - 1e-9);
    CHECK(score <= double(k) + 1e-9);
  }
}

TEST_CASE("posterior validation rejects rows off the simplex") {
  EmbeddingSet s;
  s.embeddings = Matrix::Zero(2, 2);
  Matrix p(2, 2);
  p << 0.6, 0.6, 0.5, 0.5;
  s.posteriors = p;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  CHECK_THROWS_AS(inception_score(s), std::invalid_argument);
}

TEST_CASE("metrics needing posteriors reject sets without them") {
  EmbeddingSet s = gaussian_set(4, 3, 0.0, 20);
  CHECK_THROWS_AS(inception_score(s), std::invalid_argument);
  CHECK_THROWS_AS(kl_metric(s, s), std::invalid_argument);
}

TEST_CASE("mel stats embedder is deterministic with simplex posteriors") {
  MelSpectrogram m = mel_of(random_grid(80, 624, 21));
  MelStatsEmbedding a = mel_stats_embedder(m);
  MelStatsEmbedding b = mel_stats_embedder(m);
  CHECK(a.embedding == b.embedding);
  CHECK(a.posterior == b.posterior);
  CHECK(a.posterior.sum() == doctest::Approx(1.0));
  CHECK(a.posterior.minCoeff() >= 0.0);
  EmbedderConfig cfg;
  CHECK(a.posterior.size() == cfg.n_classes);
}

TEST_CASE("embedder separates spectrally different grids") {
  Array2d lowband = Array2d::Constant(80, 624, -10.0);
  lowband.topRows(10) = 2.0;
  Array2d highband = Array2d::Constant(80, 624, -10.0);
  highband.bottomRows(10) = 2.0;
  MelStatsEmbedding a = mel_stats_embedder(mel_of(lowband));
  MelStatsEmbedding b = mel_stats_embedder(mel_of(highband));
  CHECK((a.embedding - b.embedding).norm() > 1e-3);
}

TEST_CASE("embedding stats are invariant to frame permutations") {
  Array2d g = random_grid(80, 200, 22);
  Array2d shuffled(80, 200);
  Rng rng(23);
  std::vector<int> order(200);
  for (int i = 0; i < 200; ++i) order[i] = i;
  for (int i = 199; i > 0; --i)
    std::swap(order[i], order[int(rng.uniform_int(i + 1))]);
  for (int i = 0; i < 200; ++i) shuffled.col(i) = g.col(order[i]);

  MelStatsEmbedding a = mel_stats_embedder(mel_of(g));
  MelStatsEmbedding b = mel_stats_embedder(mel_of(shuffled));
  EmbedderConfig cfg;
  // band means and variances ignore frame order; only delta stats may differ
  for (int k = 0; k < 2 * cfg.n_bands; ++k)
    CHECK(a.embedding(k) == doctest::Approx(b.embedding(k)).epsilon(1e-9));
}

TEST_CASE("make_embedding_set stacks rows in order") {
  std::vector<MelStatsEmbedding> items;
  for (int i = 0; i < 3; ++i)
    items.push_back(mel_stats_embedder(mel_of(random_grid(80, 100, 30 + i))));
  EmbeddingSet s = make_embedding_set(items);
  CHECK(s.count() == 3);
  REQUIRE(s.posteriors.has_value());
  for (int i = 0; i < 3; ++i) {
    CHECK(s.embeddings.row(i).transpose() == items[i].embedding);
    CHECK(s.posteriors->row(i).transpose() == items[i].posterior);
  }
  s.validate();
}

TEST_CASE("reports format every metric and round-trip to disk") {
  namespace fs = std::filesystem;
  EvalReport r;
  r.lsd = 1.25;
  r.fd = 3.5;
  r.kl = 0.125;
  r.is = 2.0;
  std::string s = format_report(r);
  for (const char* key : {"LSD", "FD", "KL", "IS"})
    CHECK(s.find(key) != std::string::npos);
  std::string path = (fs::temp_directory_path() / "audit_report.txt").string();
  save_report(path, r);
  CHECK(fs::file_size(path) > 0);
  fs::remove(path);
}
