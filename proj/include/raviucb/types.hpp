#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>

namespace raviucb {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
/// Row-major layout for tables indexed by flattened (state, action) rows.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Deterministic stream of uniform variates backing every sampling step in
/// the library. All draws are derived from 53-bit uniforms so that a fixed
/// seed reproduces the exact same trajectory. A stream must never be shared
/// between threads.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  /// Uniform draw in [0, 1). Consumes exactly one engine word.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Inverse-CDF draw from a probability vector. Consumes one variate.
  /// Entries with zero probability are never returned.
  template <class Derived>
  int categorical(const Eigen::DenseBase<Derived>& probs) {
    const double u = uniform();
    double cum = 0.0;
    int last = -1;
    const int n = static_cast<int>(probs.size());
    for (int i = 0; i < n; ++i) {
      const double p = probs(i);
      if (p <= 0.0) continue;
      last = i;
      cum += p;
      if (u < cum) return i;
    }
    if (last < 0) throw std::invalid_argument("categorical: no positive probability mass");
    return last;  // u fell in the rounding tail of a validated row
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace raviucb
