#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <vector>

#include "netregime/rng.hpp"

namespace netregime {

// Regime-switching bilinear factor model for a symmetric network tensor.
//
// Each week t carries an N x N real matrix B_t.  Weeks are partitioned into
// M ordered regimes by a monotone hidden path S with S_1 = 1 and S_T = M.
// Within regime m,
//
//   B_t = beta 11' + U_m diag(v_t) U_m' + E_t,   E_ijt iid N(0, sigma2_m),
//
// with N x R latent positions U_m (columns kept mutually orthogonal), weekly
// weights v_t, and conjugate priors on every block.  The hidden path follows
// a left-to-right Markov chain whose transition matrix is upper bidiagonal
// with an absorbing final state, so regimes can only advance.

struct ModelConfig {
  int n_regimes = 1;  // M, number of breaks plus one
  int rank = 2;       // R, latent dimension
  int iters = 2000;   // total Gibbs sweeps
  int burnin = 1000;  // sweeps discarded before retention
  int thin = 5;       // keep every thin-th post-burn-in sweep
  std::uint64_t seed = 20180101;
};

struct HyperParams {
  double u0 = 10.0;  // position column scales: psi_u ~ IG(u0/2, u1/2)
  double u1 = 1.0;
  double v0 = 10.0;  // weight column scales: psi_v ~ IG(v0/2, v1/2)
  double v1 = 1.0;
  double c0 = 2.0;   // noise variances: sigma2 ~ IG(c0/2, d0/2)
  double d0 = 2.0;
  double a0 = 9.0;   // diagonal persistence: p_kk ~ Beta(a0, b0)
  double b0 = 1.0;
  double beta_mean = 0.0;  // intercept prior N(beta_mean, beta_var)
  double beta_var = 1.0;
  double mu0 = 0.0;  // prior mean shared by all latent location means
  // Duration weights for the burn-in rebalancing move; empty means uniform.
  std::vector<double> w_perturb;
};

struct ChainState {
  std::vector<Eigen::MatrixXd> U;  // per regime, N x R latent positions
  Eigen::MatrixXd V;               // T x R weekly weights
  std::vector<Eigen::VectorXd> mu_u;   // per regime, length R
  std::vector<Eigen::VectorXd> psi_u;  // per regime, length R, variances
  std::vector<Eigen::VectorXd> mu_v;
  std::vector<Eigen::VectorXd> psi_v;
  double beta = 0.0;
  std::vector<double> sigma2;  // per regime
  std::vector<int> S;          // length T, regime labels 0..M-1
  Eigen::MatrixXd P;           // M x M transition matrix

  int n_regimes() const { return static_cast<int>(U.size()); }
  int rank() const { return U.empty() ? 0 : static_cast<int>(U.front().cols()); }
};

struct GibbsOptions {
  bool in_burnin = false;
  // Drop every data term so each full conditional collapses to its prior.
  bool prior_only = false;
};

struct SweepStats {
  double max_gram_offdiag = 0.0;
};

struct NormalParams {
  double mean = 0.0;
  double var = 1.0;
};

struct InverseGammaParams {
  double shape = 1.0;
  double scale = 1.0;
};

struct BetaParams {
  double a = 1.0;
  double b = 1.0;
};

struct ParamDraw {
  std::vector<Eigen::MatrixXd> U;
  Eigen::MatrixXd V;
  double beta = 0.0;
  std::vector<double> sigma2;
  std::vector<int> S;
  Eigen::MatrixXd P;
};

struct FitResult {
  ModelConfig config;
  HyperParams hyper;
  std::vector<ParamDraw> draws;
  Eigen::MatrixXd state_probs;       // T x M, share of post-burn-in sweeps
  std::vector<double> loglik_trace;  // one entry per sweep
  std::vector<int> modal_path;       // per-week argmax regime, 0-based
  double max_gram_offdiag = 0.0;     // across retained sweeps
};

// Posterior means with U columns sign-aligned to the first retained draw.
// Column sign flips of U leave the reconstruction unchanged, so without the
// alignment the averages could cancel across draws.
struct PosteriorMeanParams {
  std::vector<Eigen::MatrixXd> U;
  Eigen::MatrixXd V;
  double beta = 0.0;
  std::vector<double> sigma2;
  Eigen::MatrixXd P;
};

void validate_inputs(const std::vector<Eigen::MatrixXd>& B, const ModelConfig& config,
                     const HyperParams& hyper);

std::vector<int> weeks_in_regime(const std::vector<int>& S, int regime);

// Removes from each column its projection on the previous columns, leaving
// lengths untouched; column one is never modified.  Runs a second pass when
// the largest off-diagonal Gram magnitude stays above 1e-8 and throws
// NumericalError if it still does afterwards or any column vanishes, so a
// rank-deficient basis never survives the call.  Returns the final largest
// off-diagonal Gram magnitude.
double gram_schmidt(Eigen::MatrixXd& U);

ChainState init_chain(const std::vector<Eigen::MatrixXd>& B, const ModelConfig& config,
                      const HyperParams& hyper);

// One regime's latent position block: column scales, column means, then the
// N x R position matrix, orthogonalized in place.  Returns the Gram residual.
double sample_latent_positions(ChainState& state, const std::vector<Eigen::MatrixXd>& B,
                               const HyperParams& hyper, int regime, bool prior_only,
                               Rng& rng);

// One regime's weekly weight block: column scales, column means, then one
// R-vector per week assigned to the regime.
void sample_latent_weights(ChainState& state, const std::vector<Eigen::MatrixXd>& B,
                           const HyperParams& hyper, int regime, bool prior_only,
                           Rng& rng);

NormalParams intercept_conditional(const ChainState& state,
                                   const std::vector<Eigen::MatrixXd>& B,
                                   const HyperParams& hyper);
void sample_intercept(ChainState& state, const std::vector<Eigen::MatrixXd>& B,
                      const HyperParams& hyper, bool prior_only, Rng& rng);

InverseGammaParams noise_variance_conditional(const ChainState& state,
                                              const std::vector<Eigen::MatrixXd>& B,
                                              const HyperParams& hyper, int regime);
void sample_noise_variance(ChainState& state, const std::vector<Eigen::MatrixXd>& B,
                           const HyperParams& hyper, int regime, bool prior_only,
                           Rng& rng);

// Beta parameters of each diagonal entry p_kk, k = 0..M-2, given the path.
// Non-positive shapes are floored at 1e-3 with a warning.
std::vector<BetaParams> transition_conditionals(const std::vector<int>& S, int n_regimes,
                                                const HyperParams& hyper);
void sample_transition_matrix(ChainState& state, const HyperParams& hyper, Rng& rng);

double layer_loglik(const Eigen::MatrixXd& Bt, const Eigen::MatrixXd& Um,
                    const Eigen::VectorXd& vt, double beta, double sigma2);

// T x M table of per-week log densities under each regime's parameters.
Eigen::MatrixXd loglik_table(const std::vector<Eigen::MatrixXd>& B,
                             const ChainState& state);

// Log density of the current assignment: sum_t of row t at column S_t.
double chain_loglik(const std::vector<Eigen::MatrixXd>& B, const ChainState& state);

// Log of the data density with the hidden path summed out, starting from
// state one, via the scaled forward recursion.
double ffbs_log_marginal(const Eigen::MatrixXd& loglik, const Eigen::MatrixXd& P);

// Draws a path by forward filtering then backward sampling with the final
// week pinned to the last regime.  With an upper bidiagonal P the draw is
// monotone and, combined with the pinned endpoints, visits every regime.
std::vector<int> ffbs_sample_states(const Eigen::MatrixXd& loglik,
                                    const Eigen::MatrixXd& P, Rng& rng);

// When any regime holds exactly one week, redraws all regime durations as
// 1 + multinomial(T - M, w).  Burn-in only; returns whether it fired.
bool rebalance_singleton_regimes(ChainState& state, const HyperParams& hyper, Rng& rng);

SweepStats gibbs_sweep(ChainState& state, const std::vector<Eigen::MatrixXd>& B,
                       const HyperParams& hyper, const GibbsOptions& opts, Rng& rng);

FitResult run_chain(const std::vector<Eigen::MatrixXd>& B, const ModelConfig& config,
                    const HyperParams& hyper);

PosteriorMeanParams posterior_mean_params(const FitResult& fit);

// Writes draws.jsonl, stateprobs.csv, regime_summary.csv, loglik_trace.csv
// and summary.json into dir.  Regime labels are 1-based on disk.
void save_fit(const FitResult& fit, const std::filesystem::path& dir);
FitResult load_fit(const std::filesystem::path& dir);

}  // namespace netregime
