#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace decolab {

using cxd = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;
using Dims = std::vector<int>;

/// Numerical tolerances. Doubles with ambient dimension <= a few hundred
/// leave several digits of headroom above all of these.
namespace tol {
inline constexpr double rank = 1e-8;     // relative singular-value cutoff
inline constexpr double herm = 1e-8;     // Hermiticity residual
inline constexpr double unitary = 1e-8;  // unitarity residual
inline constexpr double orth = 1e-8;     // basis orthonormality
inline constexpr double recon = 1e-9;    // reconstruction residual
inline constexpr double alg = 1e-7;      // algebra-closure residuals
inline constexpr double gap = 1e-7;      // eigenvalue clustering gap
inline constexpr double phase = 1e-7;    // phase-equivalence of conditionals
inline constexpr double inf = 1e-8;      // influence threshold
inline constexpr double psd = 1e-9;      // state positivity slack
}  // namespace tol

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Shape or index mismatch in user-supplied data.
struct DimensionError : Error {
  using Error::Error;
};

/// Input violates a numerical precondition (non-Hermitian, non-unitary,
/// not a state, conditioning on a null event, ...).
struct NumericalError : Error {
  using Error::Error;
};

/// An internal consistency cross-check failed; signals a bug, not bad input.
struct InternalError : Error {
  using Error::Error;
};

inline int product(const Dims& d) {
  int p = 1;
  for (int x : d) p *= x;
  return p;
}

inline std::string dims_to_string(const Dims& d) {
  std::string s = "(";
  for (size_t i = 0; i < d.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(d[i]);
  }
  return s + ")";
}

/// Deterministic RNG used for generic-element sampling and test corpora.
/// Gaussians via Box-Muller so streams do not depend on the standard
/// library's normal_distribution implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform() {
    return std::uniform_real_distribution<double>(0.0, 1.0)(gen_);
  }

  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 1e-300) u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * M_PI * u2);
    have_spare_ = true;
    return r * std::cos(2.0 * M_PI * u2);
  }

  cxd gaussian_cxd() { return cxd(gaussian(), gaussian()); }

  std::uint64_t integer() { return gen_(); }

  int index(int n) {
    return static_cast<int>(std::uniform_int_distribution<int>(0, n - 1)(gen_));
  }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// Seed used by library internals when the caller does not provide one.
inline constexpr std::uint64_t kDefaultSeed = 0x5ec0de5eedULL;

inline std::uint64_t fnv1a64(const void* data, size_t n,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a64(const std::string& s) {
  return fnv1a64(s.data(), s.size());
}

}  // namespace decolab
