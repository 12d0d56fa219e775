#pragma once

#include "audit/audio.hpp"
#include "audit/types.hpp"

#include <algorithm>
#include <complex>
#include <string>

namespace audit {

/// Mel extraction parameters. Defaults give an 80x624 grid for 10 s at 16 kHz.
struct MelConfig {
  int sample_rate = 16000;
  int hop = 256;
  int window = 1024;
  int n_mels = 80;
  double fmin = 0.0;
  double fmax = 8000.0;
  int target_frames = 624;  // for a 10 s clip
  double power_floor = 1e-5;

  void validate() const;
  int fft_bins() const { return window / 2 + 1; }
  /// Frame count for an n-sample clip: n/hop - 1 (160000 samples -> 624).
  Eigen::Index frames_for(Eigen::Index n_samples) const {
    return std::max<Eigen::Index>(1, n_samples / hop - 1);
  }
};

/// Log-power time-frequency grid, n_mels rows by frames columns.
struct MelSpectrogram {
  Array2d grid;
  MelConfig config;

  Eigen::Index n_mels() const { return grid.rows(); }
  Eigen::Index frames() const { return grid.cols(); }
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Triangular mel filterbank, n_mels x (window/2 + 1).
Matrix mel_filterbank(const MelConfig& cfg);

/// Centered STFT with a Hann window; returns (window/2+1) x frames complex
/// magnitudes-and-phases. Frame f is centered at sample (f+1)*hop.
Eigen::MatrixXcd stft(const Waveform& w, const MelConfig& cfg);

/// Overlap-add inverse of `stft`; output length (frames+1)*hop.
Waveform istft(const Eigen::MatrixXcd& spec, const MelConfig& cfg);

MelSpectrogram waveform_to_mel(const Waveform& w, const MelConfig& cfg);

/// Griffin-Lim phase reconstruction from a mel grid.
Waveform mel_to_waveform(const MelSpectrogram& m, int iterations = 60,
                         std::uint64_t seed = 0);

/// Flat binary record shared by mel grids and latents:
/// magic "AGRD", i32 rows, i32 cols, i32 channels, row-major f32 payload.
void save_grid(const std::string& path, const Array2d& grid, int channels = 1);
Array2d load_grid(const std::string& path, int* channels = nullptr);

/// Textual debug dump (rows x cols header then rows of values).
void dump_grid_text(const std::string& path, const Array2d& grid);

}  // namespace audit
