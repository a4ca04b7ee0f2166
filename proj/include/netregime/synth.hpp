#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace netregime {

// Weekly block-structured network tensors with known regime changes, for
// sampler validation.  Each regime partitions the nodes into contiguous
// groups; the partition rotates at every change point so consecutive regimes
// differ as matrices, not merely by group relabeling.
struct SynthSpec {
  int n_nodes = 20;
  int n_weeks = 24;
  int n_groups = 2;
  // First week (1-based) of each regime after the initial one; strictly
  // increasing, each in [2, n_weeks].
  std::vector<int> change_weeks;
  double within = 1.0;   // mean for same-group pairs
  double between = 0.2;  // mean for cross-group pairs
  double noise_sd = 0.25;       // Gaussian mode
  bool integer_counts = false;  // Poisson counts around the means instead
  std::uint64_t seed = 1;
};

struct SynthData {
  std::vector<Eigen::MatrixXd> B;     // noisy symmetric slices
  std::vector<Eigen::MatrixXd> mean;  // noiseless slice means
  std::vector<int> regime_of_week;    // 0-based, length n_weeks
  std::vector<std::vector<int>> group_of_node;  // per regime, length n_nodes
};

SynthData generate_synthetic(const SynthSpec& spec);

}  // namespace netregime
