#pragma once

#include "audit/types.hpp"

#include <stdexcept>
#include <string>
#include <utility>

namespace audit {

/// Mono audio clip. Samples live in [-1, 1] after any normalizing op.
struct Waveform {
  Array1d samples;
  int sample_rate = 16000;

  double duration_s() const {
    return double(samples.size()) / double(sample_rate);
  }
  Eigen::Index size() const { return samples.size(); }
};

/// Half-open time interval [start_s, end_s) inside a host waveform.
struct TimeRegion {
  double start_s = 0.0;
  double end_s = 0.0;

  TimeRegion() = default;
  TimeRegion(double start, double end) : start_s(start), end_s(end) {
    if (!(end > start) || start < 0.0)
      throw std::invalid_argument("TimeRegion requires 0 <= start < end");
  }

  double length_s() const { return end_s - start_s; }
  Eigen::Index start_index(int sample_rate) const {
    return Eigen::Index(std::llround(start_s * sample_rate));
  }
  Eigen::Index end_index(int sample_rate) const {
    return Eigen::Index(std::llround(end_s * sample_rate));
  }
};

/// Pad with trailing zeros or truncate (keeping the prefix) to target_s seconds.
Waveform pad_or_truncate(const Waveform& w, double target_s);

/// Add `gain * event` into `base` starting at offset_s; events running past the
/// end of base are clipped. If the mix exceeds [-1, 1] the whole output is
/// rescaled by a single shared factor. Returns the covered region.
std::pair<Waveform, TimeRegion> mix_overlay(const Waveform& base,
                                            const Waveform& event,
                                            double offset_s, double gain = 1.0);

/// Alias of mix_overlay; named separately so replacement generators record
/// that both inserts target roughly the same area.
std::pair<Waveform, TimeRegion> insert_at(const Waveform& base,
                                          const Waveform& event,
                                          double offset_s, double gain = 1.0);

/// Zero out samples in `r`; everything else bit-identical.
Waveform mask_region(const Waveform& w, const TimeRegion& r);

/// Remove energy above cutoff_hz (brickwall in the DFT domain). Same length
/// and rate; above-cutoff bins are exactly zeroed.
Waveform degrade_bandwidth(const Waveform& w, double cutoff_hz);

/// Peak of |samples|.
double peak(const Waveform& w);
double rms(const Waveform& w);

/// 16-bit PCM mono WAV I/O. Multi-channel input is mixed down; sample rate is
/// converted to target_rate (linear interpolation) when it differs.
Waveform load_wav(const std::string& path, int target_rate = 16000);
void save_wav(const std::string& path, const Waveform& w);

}  // namespace audit
