#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>

#include "pbbench/csv.hpp"
#include "pbbench/sha256.hpp"

namespace pbbench {

// Name of the pinned generator stack, recorded in every DGM's meta.json.
// Changing any part of the sampling path (hash, generator, inverse CDF,
// draw order) requires bumping this string.
inline constexpr const char* kGeneratorName = "sha256-xoshiro256pp-as241/1";

struct SeedSpec {
  std::uint64_t root_seed = 0;
  std::string dgm_id;
  std::string condition_id;
  int repetition = 0;
};

using StreamKey = Sha256::Digest;

// 256-bit stream key as SHA-256 of `root_seed|dgm_id|condition_id|repetition`.
// A pure function of its inputs, identical on every platform.
inline StreamKey derive_seed(const SeedSpec& spec) {
  std::string canonical = csv::format_int(static_cast<long long>(spec.root_seed));
  canonical += '|';
  canonical += spec.dgm_id;
  canonical += '|';
  canonical += spec.condition_id;
  canonical += '|';
  canonical += csv::format_int(spec.repetition);
  return Sha256::hash(canonical);
}

namespace detail {

// Wichura's AS 241 (PPND16): inverse of the standard normal CDF, accurate to
// about 1e-16 relative. Used instead of a library sampler so that normal
// draws are bit-identical everywhere.
inline double inverse_normal_cdf(double p) {
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
               1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
             1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
           (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
               5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
             4.2313330701600911252e1) * r + 1.0);
  }
  double r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
              3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
            4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
          (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
              6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
            2.05319162663775882187e0) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
              2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
            5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
          (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
              1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
            5.99832206555887937690e-1) * r + 1.0);
  }
  return (q < 0.0) ? -val : val;
}

}  // namespace detail

// xoshiro256++ keyed directly by a 256-bit stream key. Distribution mapping
// (uniform doubles via the top 53 bits, normals via the AS 241 inverse CDF,
// bounded ints via 128-bit multiply-shift) is part of the pinned contract.
class Rng {
 public:
  explicit Rng(const StreamKey& key) {
    for (int i = 0; i < 4; ++i) {
      std::uint64_t w = 0;
      for (int b = 0; b < 8; ++b) w |= std::uint64_t(key[8 * i + b]) << (8 * b);
      s_[i] = w;
    }
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;  // all-zero state is invalid
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on the open interval (0, 1): (k + 0.5) / 2^53.
  double uniform_open01() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal(double mean, double sd) {
    return mean + sd * detail::inverse_normal_cdf(uniform_open01());
  }

  // Index in [0, n). Multiply-shift bound; bias is O(n / 2^64).
  std::size_t pick_index(std::size_t n) {
    return static_cast<std::size_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::array<std::uint64_t, 4> s_;
};

}  // namespace pbbench
