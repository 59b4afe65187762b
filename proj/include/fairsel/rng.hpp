#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace fairsel {

// Deterministic generator (xoshiro256++ seeded through splitmix64).
// Hand-rolled so that sampled CPTs, datasets and permutations are
// byte-stable across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  // Independent stream derived from (seed, salt). Streams with different
  // salts are decorrelated regardless of draw counts.
  static Rng stream(std::uint64_t seed, std::uint64_t salt);

  std::uint64_t next_u64();

  // Uniform in [0, 1) with 53 random bits.
  double uniform();

  // Uniform integer in [0, n). n >= 1. Rejection sampled, no modulo bias.
  std::uint64_t below(std::uint64_t n);

  // Standard normal via the polar method.
  double normal();

  // Gamma(shape, 1) by Marsaglia-Tsang, with the power boost for shape < 1.
  double gamma(double shape);

  // Symmetric Dirichlet(concentration) over k categories.
  Eigen::VectorXd dirichlet(double concentration, int k);

  // Fisher-Yates over 0..n-1.
  std::vector<int> permutation(int n);

 private:
  std::uint64_t s_[4];
  double cached_normal_ = 0.0;
  bool have_cached_normal_ = false;
};

}  // namespace fairsel
