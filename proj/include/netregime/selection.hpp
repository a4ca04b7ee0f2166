#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "netregime/hmtm.hpp"

namespace netregime {

struct ModelScore {
  int n_breaks = 0;
  double loglik = 0.0;       // at posterior means along the modal path
  double waic = 0.0;         // lower is better
  double log_marginal = 0.0; // higher is better
  double avg_loss = 0.0;     // mean squared reconstruction residual
};

struct BreakSelection {
  int selected_breaks = 0;            // arg-min of WAIC
  std::vector<int> kink_candidates;   // interior local maxima of log_marginal
  bool no_kink_warning = false;
};

// Data density at the posterior-mean parameters with each week assigned its
// modal regime.
double compute_loglik(const std::vector<Eigen::MatrixXd>& B, const FitResult& fit);

// Widely applicable information criterion, pointwise over matrix entries and
// weeks.  Needs at least two retained draws for the variance penalty.
double compute_waic(const std::vector<Eigen::MatrixXd>& B, const FitResult& fit);

// Mean over retained draws of the mean squared reconstruction residual.
double compute_avg_loss(const std::vector<Eigen::MatrixXd>& B, const FitResult& fit);

struct EvidenceOptions {
  int sweeps = 2000;   // retained sweeps per reduced run
  int burnin = 200;
  std::uint64_t seed = 7;
};

// Marginal likelihood of the data given the latent factors fixed at their
// sign-aligned posterior means, with the intercept, noise variances, the
// transition matrix and the hidden path integrated out.  Computed from the
// candidate-point identity
//
//   log m(B) = log p(B | theta*) + log pi(theta*) - log p(theta* | B),
//
// where the posterior ordinate factors into one term per block, each
// estimated by averaging its full-conditional density over a reduced Gibbs
// run that keeps the earlier blocks pinned at their starred values.
// Deterministic for a fixed options seed.
double compute_log_marginal(const std::vector<Eigen::MatrixXd>& B, const FitResult& fit,
                            const EvidenceOptions& opts = {});

ModelScore score_model(const std::vector<Eigen::MatrixXd>& B, const FitResult& fit,
                       const EvidenceOptions& opts = {});

// Picks the break count with the smallest WAIC (ties go to the smaller
// count) and lists interior break counts where the log marginal rises then
// falls.  With no such interior peak the best log-marginal count is reported
// with a warning flag.  Needs scores for at least three distinct counts.
BreakSelection detect_break_number(const std::vector<ModelScore>& scores);

}  // namespace netregime
