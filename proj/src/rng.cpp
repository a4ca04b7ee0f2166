#include "netregime/rng.hpp"

#include <cmath>

#include "netregime/errors.hpp"

namespace netregime {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
// 2^-53
constexpr double kInv53 = 1.0 / 9007199254740992.0;
}  // namespace

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * kInv53; }

double Rng::uniform_pos() {
  return (static_cast<double>(engine_() >> 11) + 1.0) * kInv53;
}

double Rng::normal(double mean, double sd) {
  const double u1 = uniform_pos();
  const double u2 = uniform();
  return mean + sd * std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

double Rng::gamma(double shape, double scale) {
  if (!(shape > 0.0) || !(scale > 0.0)) {
    throw NumericalError("gamma draw requires positive shape and scale");
  }
  if (shape < 1.0) {
    const double u = uniform_pos();
    return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = normal();
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    const double u = uniform_pos();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v * scale;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v * scale;
  }
}

double Rng::inverse_gamma(double shape, double scale) {
  return scale / gamma(shape, 1.0);
}

double Rng::beta(double a, double b) {
  const double x = gamma(a, 1.0);
  const double y = gamma(b, 1.0);
  return x / (x + y);
}

int Rng::categorical(const std::vector<double>& weights) {
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw NumericalError("categorical weight is negative");
    total += w;
  }
  if (!(total > 0.0)) throw NumericalError("categorical weights sum to zero");
  const double u = uniform() * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(weights.size()) - 1;
}

std::vector<long> Rng::multinomial(long n, const std::vector<double>& weights) {
  std::vector<long> counts(weights.size(), 0);
  for (long i = 0; i < n; ++i) counts[categorical(weights)] += 1;
  return counts;
}

long Rng::poisson(double mean) {
  if (mean < 0.0) throw NumericalError("poisson draw requires a non-negative mean");
  long total = 0;
  // Poisson(a + b) equals Poisson(a) + Poisson(b) drawn independently.
  while (mean > 25.0) {
    double chunk_total = 1.0;
    long k = -1;
    const double floor_p = std::exp(-25.0);
    do {
      chunk_total *= uniform_pos();
      ++k;
    } while (chunk_total > floor_p);
    total += k;
    mean -= 25.0;
  }
  const double floor_p = std::exp(-mean);
  double prod = 1.0;
  long k = -1;
  do {
    prod *= uniform_pos();
    ++k;
  } while (prod > floor_p);
  return total + k;
}

}  // namespace netregime
