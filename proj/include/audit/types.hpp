#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <string_view>

namespace audit {

using Matrix = Eigen::MatrixXd;
using Array2d = Eigen::ArrayXXd;
using Array1d = Eigen::ArrayXd;
using Vector = Eigen::VectorXd;

/// Deterministic counter-based RNG. All randomness in the project flows
/// from one root seed through named derivation, so reruns are bit-identical
/// regardless of platform or parallel schedule.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : state_(seed ^ 0x9e3779b97f4a7c15ull) {}

  std::uint64_t next_u64() {
    // splitmix64
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() {
    return double(next_u64() >> 11) * (1.0 / 9007199254740992.0);
  }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n) { return next_u64() % n; }

  /// Standard normal via Box-Muller (explicit so output is portable).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 1e-300) u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  Array2d normal_array(Eigen::Index rows, Eigen::Index cols) {
    Array2d out(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = normal();
    return out;
  }

private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

/// FNV-1a over bytes; used to hash strings into seeds.
inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

/// Named seed derivation: hash(root seed, purpose string).
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view purpose) {
  std::uint64_t h = fnv1a(purpose);
  h ^= root + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t root, std::string_view purpose,
                                 std::uint64_t index) {
  return derive_seed(root, purpose) ^ (0x9e3779b97f4a7c15ull * (index + 1));
}

}  // namespace audit
