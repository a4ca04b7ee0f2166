#include "netregime/synth.hpp"

#include <string>

#include "netregime/errors.hpp"
#include "netregime/rng.hpp"

namespace netregime {

SynthData generate_synthetic(const SynthSpec& spec) {
  const int N = spec.n_nodes;
  const int T = spec.n_weeks;
  const int G = spec.n_groups;
  if (N < 2 || T < 1) throw ValidationError("synthetic tensor needs nodes and weeks");
  if (G < 2 || G > N) throw ValidationError("group count must lie in [2, nodes]");
  if (!(spec.noise_sd >= 0.0)) throw ValidationError("noise level must be non-negative");
  int prev = 1;
  for (int w : spec.change_weeks) {
    if (w <= prev || w > T) {
      throw ValidationError("change weeks must be strictly increasing within (1, " +
                            std::to_string(T) + "]");
    }
    prev = w;
  }
  if (spec.integer_counts && (spec.within < 0.0 || spec.between < 0.0)) {
    throw ValidationError("count mode needs non-negative pair means");
  }

  const int M = static_cast<int>(spec.change_weeks.size()) + 1;
  SynthData out;
  out.regime_of_week.assign(T, 0);
  for (int t = 0; t < T; ++t) {
    int m = 0;
    for (int w : spec.change_weeks) {
      if (t + 1 >= w) ++m;
    }
    out.regime_of_week[t] = m;
  }

  // Regime m assigns contiguous groups over a node order rotated by half a
  // group width per regime, so each change moves real mass between blocks.
  const int shift = std::max(N / (2 * G), 1);
  std::vector<Eigen::MatrixXd> regime_mean;
  for (int m = 0; m < M; ++m) {
    std::vector<int> group(N);
    for (int i = 0; i < N; ++i) group[i] = ((i + m * shift) % N) * G / N;
    out.group_of_node.push_back(group);
    Eigen::MatrixXd mu(N, N);
    for (int i = 0; i < N; ++i) {
      for (int j = 0; j < N; ++j) {
        mu(i, j) = group[i] == group[j] ? spec.within : spec.between;
      }
    }
    regime_mean.push_back(std::move(mu));
  }

  Rng rng(spec.seed);
  for (int t = 0; t < T; ++t) {
    const Eigen::MatrixXd& mu = regime_mean[out.regime_of_week[t]];
    out.mean.push_back(mu);
    Eigen::MatrixXd slice(N, N);
    for (int i = 0; i < N; ++i) {
      for (int j = i; j < N; ++j) {
        double value;
        if (spec.integer_counts) {
          value = i == j ? 0.0 : static_cast<double>(rng.poisson(mu(i, j)));
        } else {
          value = mu(i, j) + rng.normal(0.0, spec.noise_sd);
        }
        slice(i, j) = value;
        slice(j, i) = value;
      }
    }
    out.B.push_back(std::move(slice));
  }
  return out;
}

}  // namespace netregime
