#include "audit/codec.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace audit {

namespace {

/// First `count` 2D-DCT basis patches of size d x d, lowest frequencies first.
std::vector<Matrix> dct_basis(int d, int count) {
  Matrix b1(d, d);  // b1(k, n): 1D orthonormal DCT-II row k
  for (int k = 0; k < d; ++k) {
    double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / d);
    for (int n = 0; n < d; ++n)
      b1(k, n) = scale * std::cos(3.14159265358979323846 * (n + 0.5) * k / d);
  }

  std::vector<std::pair<int, int>> order;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) order.emplace_back(i, j);
  std::stable_sort(order.begin(), order.end(), [](auto a, auto b) {
    return a.first + a.second < b.first + b.second;
  });

  std::vector<Matrix> basis;
  basis.reserve(count);
  for (int c = 0; c < count; ++c) {
    auto [i, j] = order[c];
    basis.push_back(b1.row(i).transpose() * b1.row(j));
  }
  return basis;
}

void check_params(const CodecParams& p) {
  if (p.downsample <= 0 || p.channels <= 0)
    throw std::invalid_argument("CodecParams: non-positive dimension");
  if (p.channels > p.downsample * p.downsample)
    throw std::invalid_argument("CodecParams: channels exceed patch capacity");
}

}  // namespace

Latent encode_grid(const Array2d& grid, const CodecParams& p) {
  check_params(p);
  int d = p.downsample;
  if (grid.rows() % d || grid.cols() % d)
    throw std::invalid_argument("encode: mel dims not divisible by downsample");

  int h = int(grid.rows()) / d, w = int(grid.cols()) / d;
  auto basis = dct_basis(d, p.channels);
  Latent z(p.channels, h, w);
  for (int c = 0; c < p.channels; ++c) {
    auto ch = z.channel(c);
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j)
        ch(i, j) =
            (grid.block(i * d, j * d, d, d) * basis[c].array()).sum();
  }
  return z;
}

Latent encode(const MelSpectrogram& m, const CodecParams& p) {
  return encode_grid(m.grid, p);
}

Array2d decode_grid(const Latent& z, const CodecParams& p) {
  check_params(p);
  if (z.channels != p.channels)
    throw std::invalid_argument("decode: latent/params channel mismatch");
  int d = p.downsample;
  auto basis = dct_basis(d, p.channels);
  Array2d grid = Array2d::Zero(z.rows * d, z.cols * d);
  for (int c = 0; c < p.channels; ++c) {
    auto ch = z.channel(c);
    for (int i = 0; i < z.rows; ++i)
      for (int j = 0; j < z.cols; ++j)
        grid.block(i * d, j * d, d, d) += ch(i, j) * basis[c].array();
  }
  return grid;
}

MelSpectrogram decode(const Latent& z, const CodecParams& p,
                      const MelConfig& cfg) {
  MelSpectrogram m;
  m.config = cfg;
  m.grid = decode_grid(z, p);
  return m;
}

VaeLossBreakdown vae_loss(const Array2d& x, const Array2d& x_hat,
                          const Latent& mu, const Latent& log_var,
                          double gan_term, const VaeLossWeights& wts) {
  wts.validate();
  if (x.rows() != x_hat.rows() || x.cols() != x_hat.cols())
    throw std::invalid_argument("vae_loss: reconstruction shape mismatch");
  if (!mu.same_shape(log_var))
    throw std::invalid_argument("vae_loss: mu/log_var shape mismatch");
  if (!x.allFinite() || !x_hat.allFinite() || !mu.data.allFinite() ||
      !log_var.data.allFinite() || !std::isfinite(gan_term))
    throw std::invalid_argument("vae_loss: non-finite input");

  VaeLossBreakdown out;
  out.l1 = (x - x_hat).abs().mean();
  out.l2 = (x - x_hat).square().mean();
  // KL(N(mu, sigma^2) || N(0, I)) per element
  out.kl = 0.5 * (mu.data.square() + log_var.data.exp() - log_var.data - 1.0)
               .mean();
  out.gan = gan_term;
  out.total = wts.l1 * out.l1 + wts.l2 * out.l2 + wts.kl * out.kl +
              wts.gan * out.gan;
  return out;
}

void save_latent(const std::string& path, const Latent& z) {
  save_grid(path, z.data, z.channels);
}

Latent load_latent(const std::string& path, const CodecParams& p) {
  int ch = 1;
  Array2d data = load_grid(path, &ch);
  if (ch != p.channels || data.rows() % ch)
    throw std::runtime_error("load_latent: channel mismatch in " + path);
  Latent z;
  z.channels = ch;
  z.rows = int(data.rows()) / ch;
  z.cols = int(data.cols());
  z.data = std::move(data);
  return z;
}

}  // namespace audit
