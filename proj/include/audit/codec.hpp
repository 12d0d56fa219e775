#pragma once

#include "audit/mel.hpp"
#include "audit/types.hpp"

#include <stdexcept>
#include <string>

namespace audit {

/// C x h x w latent grid, stored as channel-stacked rows: channel c occupies
/// rows [c*h, (c+1)*h) of `data`.
struct Latent {
  int channels = 0;
  int rows = 0;
  int cols = 0;
  Array2d data;  // (channels * rows) x cols

  Latent() = default;
  Latent(int c, int h, int w)
      : channels(c), rows(h), cols(w), data(Array2d::Zero(c * h, w)) {}

  auto channel(int c) { return data.middleRows(c * rows, rows); }
  auto channel(int c) const { return data.middleRows(c * rows, rows); }
  Eigen::Index size() const { return data.size(); }
  bool same_shape(const Latent& o) const {
    return channels == o.channels && rows == o.rows && cols == o.cols;
  }
};

enum class CodecMode { ReferenceOrthonormal, TrainableStub };

struct CodecParams {
  int downsample = 8;  // paper shapes use 8 (4x10x78) or 4 (4x20x156)
  int channels = 4;
  CodecMode mode = CodecMode::ReferenceOrthonormal;
};

struct VaeLossWeights {
  double l1 = 1.0;
  double l2 = 1.0;
  double kl = 1e-6;
  double gan = 0.5;

  void validate() const {
    if (l1 < 0 || l2 < 0 || kl < 0 || gan < 0)
      throw std::invalid_argument("VaeLossWeights: negative weight");
    if (kl > 0.01 * l1)
      throw std::invalid_argument("VaeLossWeights: kl must be small (<= 0.01*l1)");
  }
};

struct VaeLossBreakdown {
  double l1 = 0, l2 = 0, kl = 0, gan = 0, total = 0;
};

/// Mel (n_mels x frames) -> latent (C x n_mels/d x frames/d). The reference
/// mode projects each d x d patch onto the C lowest 2D-DCT basis vectors;
/// linear and norm-preserving up to the channel projection.
Latent encode(const MelSpectrogram& m, const CodecParams& p);
Latent encode_grid(const Array2d& grid, const CodecParams& p);

/// Inverse of `encode` on the retained subspace; exact round trip when
/// C >= d*d, otherwise reproduces the projection.
MelSpectrogram decode(const Latent& z, const CodecParams& p,
                      const MelConfig& cfg = {});
Array2d decode_grid(const Latent& z, const CodecParams& p);

/// lambda1*L1 + lambda2*L2 + lambdaKL*KL(N(mu,sigma^2)||N(0,I)) + lambdaGAN*gan.
/// Reconstruction terms are per-element means; KL is the per-element mean of
/// the diagonal-Gaussian closed form.
VaeLossBreakdown vae_loss(const Array2d& x, const Array2d& x_hat,
                          const Latent& mu, const Latent& log_var,
                          double gan_term, const VaeLossWeights& wts);

void save_latent(const std::string& path, const Latent& z);
Latent load_latent(const std::string& path, const CodecParams& p);

}  // namespace audit
