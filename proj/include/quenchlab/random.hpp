#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>

namespace quenchlab {

/// Seeded source of test matrices. Distributions are built from raw 64-bit
/// draws here rather than std:: distributions, so a seed maps to the same
/// matrices on every standard library.
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed) : engine_(seed) {}

  double uniform();                   // [0, 1)
  double uniform(double lo, double hi);
  double normal();                    // standard normal, Box-Muller
  int integer(int lo, int hi);        // inclusive

  /// GUE-like Hermitian matrix with entries of unit scale.
  Eigen::MatrixXcd hermitian(Eigen::Index dim);
  /// Haar-distributed unitary from QR of a complex Ginibre matrix.
  Eigen::MatrixXcd unitary(Eigen::Index dim);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace quenchlab
