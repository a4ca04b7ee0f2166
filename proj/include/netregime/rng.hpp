#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace netregime {

/// Seeded random source used by every stochastic routine in the library.
///
/// The generator is the standard 64-bit Mersenne Twister (mt19937_64), whose
/// output sequence is fixed by the C++ standard. All variate transforms below
/// are implemented here rather than via std::*_distribution, which is
/// implementation-defined; a seed therefore reproduces the same stream on any
/// conforming toolchain.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();

  /// Uniform on (0, 1], safe as a log() argument.
  double uniform_pos();

  /// N(mean, sd^2) via Box-Muller. Consumes exactly two uniforms per call;
  /// no spare is cached, so the draw count per call is fixed.
  double normal(double mean = 0.0, double sd = 1.0);

  /// Gamma(shape, scale) with mean shape*scale. Marsaglia-Tsang squeeze for
  /// shape >= 1, with the u^(1/shape) boost below 1.
  double gamma(double shape, double scale);

  /// Inverse-gamma with density proportional to x^-(shape+1) exp(-scale/x),
  /// mean scale/(shape-1).
  double inverse_gamma(double shape, double scale);

  /// Beta(a, b) via two gamma draws.
  double beta(double a, double b);

  /// Index in [0, weights.size()) with probability weights[i]/sum(weights).
  /// Weights must be non-negative with a positive sum.
  int categorical(const std::vector<double>& weights);

  /// counts[i] ~ number of the n trials landing in cell i.
  std::vector<long> multinomial(long n, const std::vector<double>& weights);

  /// Poisson(mean), mean >= 0. Multiplication method, splitting large means
  /// into additive chunks so the uniform product never underflows.
  long poisson(double mean);

  std::uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace netregime
