#include "audit/mel.hpp"

#include <doctest.h>

#include <filesystem>

using namespace audit;

namespace {

Waveform sine(double freq, double dur_s, double amp = 0.3, int rate = 16000) {
  Waveform w;
  w.sample_rate = rate;
  Eigen::Index n = Eigen::Index(dur_s * rate);
  w.samples.resize(n);
  for (Eigen::Index i = 0; i < n; ++i)
    w.samples(i) = amp * std::sin(2.0 * M_PI * freq * i / rate);
  return w;
}

}  // namespace

TEST_CASE("10 s at 16 kHz gives an 80x624 grid") {
  MelSpectrogram m = waveform_to_mel(sine(440.0, 10.0), MelConfig{});
  CHECK(m.grid.rows() == 80);
  CHECK(m.grid.cols() == 624);
}

TEST_CASE("frame count is a pure function of duration") {
  MelConfig cfg;
  CHECK(cfg.frames_for(160000) == 624);
  CHECK(cfg.frames_for(80000) == 311);  // 80000/256 - 1
  CHECK(cfg.frames_for(256) == 1);      // floor at one frame
}

TEST_CASE("all-zero waveform maps to the log floor everywhere") {
  MelConfig cfg;
  Waveform w;
  w.sample_rate = 16000;
  w.samples = Array1d::Zero(160000);
  MelSpectrogram m = waveform_to_mel(w, cfg);
  double floor_val = std::log(cfg.power_floor);
  CHECK((m.grid == floor_val).all());
}

TEST_CASE("no grid entry falls below the log floor") {
  MelConfig cfg;
  MelSpectrogram m = waveform_to_mel(sine(1000.0, 10.0), cfg);
  CHECK(m.grid.minCoeff() >= std::log(cfg.power_floor) - 1e-12);
  CHECK(m.grid.allFinite());
}

TEST_CASE("1 kHz sine peaks in the mel bin whose center is nearest 1 kHz") {
  MelConfig cfg;
  MelSpectrogram m = waveform_to_mel(sine(1000.0, 10.0), cfg);

  // filterbank-center oracle: expected bin from the mel-scale breakpoints
  double mel_hi = hz_to_mel(cfg.fmax);
  int expected = 0;
  double best = 1e18;
  for (int b = 0; b < cfg.n_mels; ++b) {
    double center = mel_to_hz(mel_hi * (b + 1) / (cfg.n_mels + 1));
    if (std::abs(center - 1000.0) < best) {
      best = std::abs(center - 1000.0);
      expected = b;
    }
  }
  for (Eigen::Index f = 10; f < m.frames() - 10; f += 50) {
    Eigen::Index argmax;
    m.grid.col(f).maxCoeff(&argmax);
    CHECK(std::abs(int(argmax) - expected) <= 1);
  }
}

TEST_CASE("waveform_to_mel is deterministic") {
  Waveform w = sine(523.25, 10.0);
  MelSpectrogram a = waveform_to_mel(w, MelConfig{});
  MelSpectrogram b = waveform_to_mel(w, MelConfig{});
  CHECK((a.grid == b.grid).all());
}

TEST_CASE("waveform_to_mel rejects a sample-rate mismatch") {
  Waveform w = sine(440.0, 1.0, 0.3, 8000);
  CHECK_THROWS_AS(waveform_to_mel(w, MelConfig{}), std::invalid_argument);
}

TEST_CASE("filterbank rows all have positive sums") {
  Matrix fb = mel_filterbank(MelConfig{});
  for (Eigen::Index m = 0; m < fb.rows(); ++m) CHECK(fb.row(m).sum() > 0.0);
}

TEST_CASE("filterbank peak frequencies strictly increase") {
  Matrix fb = mel_filterbank(MelConfig{});
  Eigen::Index prev = -1;
  for (Eigen::Index m = 0; m < fb.rows(); ++m) {
    Eigen::Index argmax;
    fb.row(m).maxCoeff(&argmax);
    CHECK(argmax > prev);
    prev = argmax;
  }
}

TEST_CASE("first filter peaks below 100 Hz") {
  MelConfig cfg;
  // mel-scale formula oracle: first breakpoint center
  double center = mel_to_hz(hz_to_mel(cfg.fmax) / (cfg.n_mels + 1));
  CHECK(center < 100.0);
  Matrix fb = mel_filterbank(cfg);
  Eigen::Index argmax;
  fb.row(0).maxCoeff(&argmax);
  double bin_hz = double(cfg.sample_rate) / cfg.window;
  CHECK(argmax * bin_hz < 100.0);
}

TEST_CASE("every FFT bin inside (fmin, fmax) is covered by some filter") {
  MelConfig cfg;
  Matrix fb = mel_filterbank(cfg);
  double bin_hz = double(cfg.sample_rate) / cfg.window;
  for (int k = 1; k * bin_hz < cfg.fmax; ++k)
    CHECK(fb.col(k).sum() > 0.0);
}

TEST_CASE("griffin-lim round trip preserves the dominant bin trajectory") {
  MelConfig cfg;
  MelSpectrogram m = waveform_to_mel(sine(880.0, 10.0), cfg);
  Waveform rec = mel_to_waveform(m, 40);
  MelSpectrogram m2 = waveform_to_mel(pad_or_truncate(rec, 10.0), cfg);
  int agree = 0, total = 0;
  for (Eigen::Index f = 5; f < 619; f += 10) {
    Eigen::Index a, b;
    m.grid.col(f).maxCoeff(&a);
    m2.grid.col(f).maxCoeff(&b);
    agree += std::abs(int(a) - int(b)) <= 1;
    ++total;
  }
  CHECK(agree > 0.9 * total);
}

TEST_CASE("zero grid inverts to near silence") {
  MelConfig cfg;
  MelSpectrogram m;
  m.config = cfg;
  m.grid = Array2d::Constant(80, 624, std::log(cfg.power_floor));
  Waveform w = mel_to_waveform(m, 10);
  CHECK(rms(w) < 1e-3);
}

TEST_CASE("more griffin-lim iterations never hurt the round trip") {
  MelConfig cfg;
  Waveform src = sine(440.0, 10.0);
  src.samples += 0.1 * sine(1320.0, 10.0).samples;
  MelSpectrogram m = waveform_to_mel(src, cfg);
  auto roundtrip_err = [&](int iters) {
    Waveform rec = mel_to_waveform(m, iters, 7);
    MelSpectrogram m2 = waveform_to_mel(pad_or_truncate(rec, 10.0), cfg);
    return (m2.grid - m.grid).abs().mean();
  };
  double e30 = roundtrip_err(30);
  double e100 = roundtrip_err(100);
  CHECK(e100 <= e30 + 1e-6);
  CHECK(e100 <= 1.0);  // mean absolute log error bound for natural signals
}

TEST_CASE("mel_to_waveform rejects non-finite grids") {
  MelSpectrogram m;
  m.grid = Array2d::Zero(80, 624);
  m.grid(3, 5) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(mel_to_waveform(m, 5), std::invalid_argument);
}

TEST_CASE("grid records survive a save/load round trip") {
  namespace fs = std::filesystem;
  Rng rng(42);
  Array2d g = rng.normal_array(8, 13);
  std::string path = (fs::temp_directory_path() / "audit_grid_rt.bin").string();
  save_grid(path, g, 2);
  int ch = 0;
  Array2d back = load_grid(path, &ch);
  CHECK(ch == 2);
  REQUIRE(back.rows() == 8);
  REQUIRE(back.cols() == 13);
  CHECK((back - g).abs().maxCoeff() < 1e-6);  // f32 storage
  fs::remove(path);
}
