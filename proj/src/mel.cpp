#include "audit/mel.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace audit {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

void MelConfig::validate() const {
  if (sample_rate <= 0 || hop <= 0 || window <= 0 || n_mels <= 0)
    throw std::invalid_argument("MelConfig: non-positive parameter");
  if (hop > window) throw std::invalid_argument("MelConfig: hop > window");
  if (fmax > sample_rate / 2.0)
    throw std::invalid_argument("MelConfig: fmax above Nyquist");
  if (window & (window - 1))
    throw std::invalid_argument("MelConfig: window must be a power of two");
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

Matrix mel_filterbank(const MelConfig& cfg) {
  cfg.validate();
  int bins = cfg.fft_bins();
  Matrix fb = Matrix::Zero(cfg.n_mels, bins);

  double mel_lo = hz_to_mel(cfg.fmin);
  double mel_hi = hz_to_mel(cfg.fmax);
  // n_mels + 2 breakpoints: left edge, peak, right edge per filter
  std::vector<double> hz(cfg.n_mels + 2);
  for (int i = 0; i < cfg.n_mels + 2; ++i)
    hz[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (cfg.n_mels + 1));

  double bin_hz = double(cfg.sample_rate) / cfg.window;
  for (int m = 0; m < cfg.n_mels; ++m) {
    double left = hz[m], center = hz[m + 1], right = hz[m + 2];
    for (int k = 0; k < bins; ++k) {
      double f = k * bin_hz;
      if (f <= left || f >= right) continue;
      fb(m, k) = f <= center ? (f - left) / (center - left)
                             : (right - f) / (right - center);
    }
    // narrow low filters can miss every bin center; keep the nearest one
    if (fb.row(m).maxCoeff() <= 0.0) {
      int k = int(std::lround(center / bin_hz));
      fb(m, std::min(std::max(k, 0), bins - 1)) = 1.0;
    }
  }
  return fb;
}

Eigen::MatrixXcd stft(const Waveform& w, const MelConfig& cfg) {
  cfg.validate();
  if (w.sample_rate != cfg.sample_rate)
    throw std::invalid_argument("stft: sample-rate mismatch");

  const int win = cfg.window, hop = cfg.hop, pad = win / 2;
  Eigen::Index frames = cfg.frames_for(w.samples.size());

  Array1d window(win);
  for (int i = 0; i < win; ++i)
    window(i) = 0.5 - 0.5 * std::cos(2.0 * kPi * i / win);

  Array1d padded = Array1d::Zero(w.samples.size() + 2 * pad);
  padded.segment(pad, w.samples.size()) = w.samples;

  Eigen::FFT<double> fft;
  Eigen::MatrixXcd out(cfg.fft_bins(), frames);
  std::vector<double> frame(win);
  std::vector<std::complex<double>> spec;
  for (Eigen::Index f = 0; f < frames; ++f) {
    // frame f is centered at sample (f+1)*hop
    Eigen::Index start = (f + 1) * hop;  // position in padded signal
    for (int i = 0; i < win; ++i) frame[i] = padded(start + i) * window(i);
    fft.fwd(spec, frame);
    for (int k = 0; k < cfg.fft_bins(); ++k) out(k, f) = spec[k];
  }
  return out;
}

Waveform istft(const Eigen::MatrixXcd& spec, const MelConfig& cfg) {
  cfg.validate();
  const int win = cfg.window, hop = cfg.hop, pad = win / 2;
  Eigen::Index frames = spec.cols();
  Eigen::Index n_out = (frames + 1) * hop;

  Array1d window(win);
  for (int i = 0; i < win; ++i)
    window(i) = 0.5 - 0.5 * std::cos(2.0 * kPi * i / win);

  Array1d acc = Array1d::Zero(n_out + 2 * pad);
  Array1d norm = Array1d::Zero(n_out + 2 * pad);

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> full(win);
  std::vector<double> frame(win);
  for (Eigen::Index f = 0; f < frames; ++f) {
    for (int k = 0; k <= win / 2; ++k) full[k] = spec(k, f);
    for (int k = win / 2 + 1; k < win; ++k) full[k] = std::conj(spec(win - k, f));
    fft.inv(frame, full);
    Eigen::Index start = (f + 1) * hop;
    for (int i = 0; i < win; ++i) {
      acc(start + i) += frame[i] * window(i);
      norm(start + i) += window(i) * window(i);
    }
  }

  Waveform out;
  out.sample_rate = cfg.sample_rate;
  out.samples = acc.segment(pad, n_out) /
                norm.segment(pad, n_out).max(1e-8);
  return out;
}

MelSpectrogram waveform_to_mel(const Waveform& w, const MelConfig& cfg) {
  Eigen::MatrixXcd spec = stft(w, cfg);
  Matrix power = spec.cwiseAbs2();
  Matrix melp = mel_filterbank(cfg) * power;
  MelSpectrogram m;
  m.config = cfg;
  m.grid = (melp.array() + cfg.power_floor).log();
  return m;
}

namespace {

/// Mel power -> linear power by multiplicative-update nonnegative least squares.
Matrix mel_power_to_linear(const Matrix& melp, const Matrix& fb, int iters = 30) {
  Matrix fbt = fb.transpose();
  Matrix p = fbt * melp;  // warm start
  p = p.cwiseMax(0.0);
  for (int it = 0; it < iters; ++it) {
    Matrix denom = fbt * (fb * p);
    p = p.cwiseProduct((fbt * melp).cwiseQuotient(denom.cwiseMax(1e-12)));
  }
  return p;
}

}  // namespace

Waveform mel_to_waveform(const MelSpectrogram& m, int iterations,
                         std::uint64_t seed) {
  if (!m.grid.allFinite())
    throw std::invalid_argument("mel_to_waveform: non-finite grid");
  const MelConfig& cfg = m.config;

  Matrix melp = (m.grid.exp() - cfg.power_floor).cwiseMax(0.0).matrix();
  Matrix fb = mel_filterbank(cfg);
  Matrix mag = mel_power_to_linear(melp, fb).cwiseSqrt();

  Rng rng(derive_seed(seed, "griffin-lim-phase"));
  Eigen::MatrixXcd spec(mag.rows(), mag.cols());
  for (Eigen::Index j = 0; j < mag.cols(); ++j)
    for (Eigen::Index i = 0; i < mag.rows(); ++i) {
      double phi = rng.uniform(0.0, 2.0 * kPi);
      spec(i, j) = std::polar(mag(i, j), phi);
    }

  Waveform w;
  for (int it = 0; it < iterations; ++it) {
    w = istft(spec, cfg);
    Eigen::MatrixXcd est = stft(w, cfg);
    for (Eigen::Index j = 0; j < mag.cols(); ++j)
      for (Eigen::Index i = 0; i < mag.rows(); ++i) {
        double a = std::abs(est(i, j));
        spec(i, j) = a > 1e-12 ? est(i, j) / a * mag(i, j)
                               : std::complex<double>(mag(i, j), 0.0);
      }
  }
  w = istft(spec, cfg);
  double p = peak(w);
  if (p > 1.0) w.samples /= p;
  return w;
}

void save_grid(const std::string& path, const Array2d& grid, int channels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_grid: cannot open " + path);
  out.write("AGRD", 4);
  std::int32_t rows = std::int32_t(grid.rows());
  std::int32_t cols = std::int32_t(grid.cols());
  std::int32_t ch = channels;
  out.write(reinterpret_cast<const char*>(&rows), 4);
  out.write(reinterpret_cast<const char*>(&cols), 4);
  out.write(reinterpret_cast<const char*>(&ch), 4);
  for (Eigen::Index i = 0; i < grid.rows(); ++i)
    for (Eigen::Index j = 0; j < grid.cols(); ++j) {
      float v = float(grid(i, j));
      out.write(reinterpret_cast<const char*>(&v), 4);
    }
}

Array2d load_grid(const std::string& path, int* channels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_grid: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (std::strncmp(magic, "AGRD", 4) != 0)
    throw std::runtime_error("load_grid: bad magic in " + path);
  std::int32_t rows, cols, ch;
  in.read(reinterpret_cast<char*>(&rows), 4);
  in.read(reinterpret_cast<char*>(&cols), 4);
  in.read(reinterpret_cast<char*>(&ch), 4);
  if (rows <= 0 || cols <= 0)
    throw std::runtime_error("load_grid: bad dims in " + path);
  Array2d grid(rows, cols);
  for (std::int32_t i = 0; i < rows; ++i)
    for (std::int32_t j = 0; j < cols; ++j) {
      float v;
      in.read(reinterpret_cast<char*>(&v), 4);
      grid(i, j) = v;
    }
  if (!in) throw std::runtime_error("load_grid: truncated file " + path);
  if (channels) *channels = ch;
  return grid;
}

void dump_grid_text(const std::string& path, const Array2d& grid) {
  std::ofstream out(path);
  out << grid.rows() << " " << grid.cols() << "\n";
  for (Eigen::Index i = 0; i < grid.rows(); ++i) {
    for (Eigen::Index j = 0; j < grid.cols(); ++j)
      out << (j ? " " : "") << grid(i, j);
    out << "\n";
  }
}

}  // namespace audit
