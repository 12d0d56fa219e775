#include "audit/audio.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

namespace audit {

Waveform pad_or_truncate(const Waveform& w, double target_s) {
  if (!(target_s > 0.0))
    throw std::invalid_argument("pad_or_truncate: target_s must be positive");
  Eigen::Index n = Eigen::Index(std::llround(target_s * w.sample_rate));
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples = Array1d::Zero(n);
  Eigen::Index keep = std::min(n, w.samples.size());
  out.samples.head(keep) = w.samples.head(keep);
  return out;
}

std::pair<Waveform, TimeRegion> mix_overlay(const Waveform& base,
                                            const Waveform& event,
                                            double offset_s, double gain) {
  if (base.sample_rate != event.sample_rate)
    throw std::invalid_argument("mix_overlay: sample-rate mismatch");
  if (offset_s < 0.0) throw std::invalid_argument("mix_overlay: negative offset");

  Waveform out = base;
  Eigen::Index start = Eigen::Index(std::llround(offset_s * base.sample_rate));
  Eigen::Index len = std::min(event.samples.size(), base.samples.size() - start);
  if (len < 0) len = 0;
  if (len > 0)
    out.samples.segment(start, len) += gain * event.samples.head(len);

  double p = peak(out);
  if (p > 1.0) out.samples /= p;  // single shared rescale

  double sr = base.sample_rate;
  TimeRegion region(double(start) / sr,
                    double(start + std::max<Eigen::Index>(len, 1)) / sr);
  return {std::move(out), region};
}

std::pair<Waveform, TimeRegion> insert_at(const Waveform& base,
                                          const Waveform& event,
                                          double offset_s, double gain) {
  return mix_overlay(base, event, offset_s, gain);
}

Waveform mask_region(const Waveform& w, const TimeRegion& r) {
  Eigen::Index a = r.start_index(w.sample_rate);
  Eigen::Index b = r.end_index(w.sample_rate);
  if (a < 0 || b > w.samples.size() || a >= b)
    throw std::invalid_argument("mask_region: region out of bounds");
  Waveform out = w;
  out.samples.segment(a, b - a).setZero();
  return out;
}

Waveform degrade_bandwidth(const Waveform& w, double cutoff_hz) {
  double nyquist = 0.5 * w.sample_rate;
  if (!(cutoff_hz > 0.0) || !(cutoff_hz < nyquist))
    throw std::invalid_argument("degrade_bandwidth: cutoff out of (0, fs/2)");

  Eigen::Index n = w.samples.size();
  if (n == 0) return w;

  Eigen::FFT<double> fft;
  std::vector<double> time(w.samples.data(), w.samples.data() + n);
  std::vector<std::complex<double>> freq;
  fft.fwd(freq, time);

  // brickwall: exactly zero above the cutoff, untouched below (idempotent)
  double bin_hz = double(w.sample_rate) / double(n);
  Eigen::Index cutoff_bin = Eigen::Index(cutoff_hz / bin_hz);
  for (Eigen::Index k = 0; k < Eigen::Index(freq.size()); ++k) {
    Eigen::Index mirror = std::min(k, n - k);
    if (mirror > cutoff_bin) freq[k] = 0.0;
  }
  fft.inv(time, freq);

  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples = Eigen::Map<Array1d>(time.data(), n);
  double p = peak(out);
  if (p > 1.0) out.samples /= p;
  return out;
}

double peak(const Waveform& w) {
  return w.samples.size() ? w.samples.abs().maxCoeff() : 0.0;
}

double rms(const Waveform& w) {
  return w.samples.size() ? std::sqrt(w.samples.square().mean()) : 0.0;
}

namespace {

template <typename T>
T read_le(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

template <typename T>
void write_le(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

Array1d resample_linear(const Array1d& x, int from_rate, int to_rate) {
  if (from_rate == to_rate || x.size() == 0) return x;
  Eigen::Index n_out =
      Eigen::Index(std::llround(double(x.size()) * to_rate / from_rate));
  Array1d out(n_out);
  double step = double(from_rate) / double(to_rate);
  for (Eigen::Index i = 0; i < n_out; ++i) {
    double pos = i * step;
    Eigen::Index i0 = Eigen::Index(pos);
    Eigen::Index i1 = std::min(i0 + 1, x.size() - 1);
    double frac = pos - double(i0);
    out(i) = (1.0 - frac) * x(std::min(i0, x.size() - 1)) + frac * x(i1);
  }
  return out;
}

}  // namespace

Waveform load_wav(const std::string& path, int target_rate) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_wav: cannot open " + path);

  char tag[5] = {0};
  in.read(tag, 4);
  if (std::strncmp(tag, "RIFF", 4) != 0)
    throw std::runtime_error("load_wav: not a RIFF file: " + path);
  read_le<std::uint32_t>(in);  // riff size
  in.read(tag, 4);
  if (std::strncmp(tag, "WAVE", 4) != 0)
    throw std::runtime_error("load_wav: not a WAVE file: " + path);

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::vector<char> data;
  while (in.read(tag, 4)) {
    std::uint32_t size = read_le<std::uint32_t>(in);
    if (std::strncmp(tag, "fmt ", 4) == 0) {
      format = read_le<std::uint16_t>(in);
      channels = read_le<std::uint16_t>(in);
      rate = read_le<std::uint32_t>(in);
      read_le<std::uint32_t>(in);  // byte rate
      read_le<std::uint16_t>(in);  // block align
      bits = read_le<std::uint16_t>(in);
      if (size > 16) in.seekg(size - 16, std::ios::cur);
    } else if (std::strncmp(tag, "data", 4) == 0) {
      data.resize(size);
      in.read(data.data(), size);
    } else {
      in.seekg(size + (size & 1), std::ios::cur);
    }
  }
  if (format != 1 || bits != 16)
    throw std::runtime_error("load_wav: only 16-bit PCM supported: " + path);
  if (channels == 0 || rate == 0)
    throw std::runtime_error("load_wav: malformed fmt chunk: " + path);

  Eigen::Index frames = Eigen::Index(data.size() / (2 * channels));
  Array1d samples(frames);
  const std::int16_t* pcm = reinterpret_cast<const std::int16_t*>(data.data());
  for (Eigen::Index i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (int c = 0; c < channels; ++c) acc += pcm[i * channels + c];
    samples(i) = acc / (channels * 32768.0);
  }

  Waveform w;
  w.sample_rate = target_rate;
  w.samples = resample_linear(samples, int(rate), target_rate);
  return w;
}

void save_wav(const std::string& path, const Waveform& w) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_wav: cannot open " + path);

  std::uint32_t data_size = std::uint32_t(w.samples.size()) * 2;
  out.write("RIFF", 4);
  write_le<std::uint32_t>(out, 36 + data_size);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  write_le<std::uint32_t>(out, 16);
  write_le<std::uint16_t>(out, 1);  // PCM
  write_le<std::uint16_t>(out, 1);  // mono
  write_le<std::uint32_t>(out, std::uint32_t(w.sample_rate));
  write_le<std::uint32_t>(out, std::uint32_t(w.sample_rate) * 2);
  write_le<std::uint16_t>(out, 2);
  write_le<std::uint16_t>(out, 16);
  out.write("data", 4);
  write_le<std::uint32_t>(out, data_size);
  for (Eigen::Index i = 0; i < w.samples.size(); ++i) {
    double s = std::clamp(w.samples(i), -1.0, 1.0);
    write_le<std::int16_t>(out, std::int16_t(std::lround(s * 32767.0)));
  }
  if (!out) throw std::runtime_error("save_wav: write failed: " + path);
}

}  // namespace audit
