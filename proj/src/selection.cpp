#include "netregime/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "netregime/densities.hpp"
#include "netregime/errors.hpp"

namespace netregime {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Streaming log of the running mean of exp(x) over added values.
struct LogMeanExp {
  double mx = kNegInf;
  double sum = 0.0;
  long n = 0;

  void add(double x) {
    ++n;
    if (x == kNegInf) return;
    if (mx == kNegInf) {
      mx = x;
      sum = 1.0;
      return;
    }
    if (x > mx) {
      sum = sum * std::exp(mx - x) + 1.0;
      mx = x;
    } else {
      sum += std::exp(x - mx);
    }
  }

  double log_mean() const {
    if (n == 0 || mx == kNegInf) return kNegInf;
    return mx + std::log(sum) - std::log(static_cast<double>(n));
  }
};

}  // namespace

double compute_loglik(const std::vector<Eigen::MatrixXd>& B, const FitResult& fit) {
  const PosteriorMeanParams pm = posterior_mean_params(fit);
  double total = 0.0;
  for (int t = 0; t < static_cast<int>(B.size()); ++t) {
    const int m = fit.modal_path[t];
    total += layer_loglik(B[t], pm.U[m], pm.V.row(t).transpose(), pm.beta, pm.sigma2[m]);
  }
  return total;
}

double compute_waic(const std::vector<Eigen::MatrixXd>& B, const FitResult& fit) {
  const int G = static_cast<int>(fit.draws.size());
  if (G < 2) throw ValidationError("need at least two retained draws for the variance penalty");
  const int T = static_cast<int>(B.size());
  const int N = static_cast<int>(B.front().rows());
  const std::size_t n_entries = static_cast<std::size_t>(T) * N * N;

  std::vector<double> run_max(n_entries, kNegInf);
  std::vector<double> run_sum(n_entries, 0.0);
  std::vector<double> mean(n_entries, 0.0);
  std::vector<double> m2(n_entries, 0.0);

  int g = 0;
  for (const ParamDraw& d : fit.draws) {
    ++g;
    for (int t = 0; t < T; ++t) {
      const int m = d.S[t];
      const Eigen::MatrixXd recon =
          d.U[m] * d.V.row(t).asDiagonal() * d.U[m].transpose();
      const double ls = -0.5 * std::log(2.0 * std::numbers::pi * d.sigma2[m]);
      const double half_prec = 0.5 / d.sigma2[m];
      std::size_t idx = static_cast<std::size_t>(t) * N * N;
      for (int i = 0; i < N; ++i) {
        for (int j = 0; j < N; ++j, ++idx) {
          const double r = B[t](i, j) - d.beta - recon(i, j);
          const double ll = ls - r * r * half_prec;
          if (ll > run_max[idx]) {
            run_sum[idx] = run_sum[idx] * std::exp(run_max[idx] - ll) + 1.0;
            run_max[idx] = ll;
          } else {
            run_sum[idx] += std::exp(ll - run_max[idx]);
          }
          const double delta = ll - mean[idx];
          mean[idx] += delta / g;
          m2[idx] += delta * (ll - mean[idx]);
        }
      }
    }
  }

  double lppd = 0.0;
  double p_eff = 0.0;
  const double log_g = std::log(static_cast<double>(G));
  for (std::size_t idx = 0; idx < n_entries; ++idx) {
    lppd += run_max[idx] + std::log(run_sum[idx]) - log_g;
    p_eff += m2[idx] / (G - 1);
  }
  return -2.0 * (lppd - p_eff);
}

double compute_avg_loss(const std::vector<Eigen::MatrixXd>& B, const FitResult& fit) {
  if (fit.draws.empty()) throw ValidationError("fit holds no retained draws");
  const int T = static_cast<int>(B.size());
  const double n_entries = static_cast<double>(T) * B.front().size();
  double total = 0.0;
  for (const ParamDraw& d : fit.draws) {
    double rss = 0.0;
    for (int t = 0; t < T; ++t) {
      const int m = d.S[t];
      Eigen::MatrixXd resid =
          B[t] - d.U[m] * d.V.row(t).asDiagonal() * d.U[m].transpose();
      resid.array() -= d.beta;
      rss += resid.squaredNorm();
    }
    total += rss / n_entries;
  }
  return total / static_cast<double>(fit.draws.size());
}

double compute_log_marginal(const std::vector<Eigen::MatrixXd>& B, const FitResult& fit,
                            const EvidenceOptions& opts) {
  if (opts.sweeps < 1 || opts.burnin < 0) {
    throw ValidationError("reduced runs need a positive sweep count");
  }
  const PosteriorMeanParams pm = posterior_mean_params(fit);
  const HyperParams& hyper = fit.hyper;
  const int M = fit.config.n_regimes;
  const int R = fit.config.rank;

  std::vector<double> p_star(std::max(M - 1, 0));
  Eigen::MatrixXd P_star = Eigen::MatrixXd::Zero(M, M);
  P_star(M - 1, M - 1) = 1.0;
  for (int k = 0; k + 1 < M; ++k) {
    p_star[k] = std::clamp(pm.P(k, k), 1e-12, 1.0 - 1e-12);
    P_star(k, k) = p_star[k];
    P_star(k, k + 1) = 1.0 - p_star[k];
  }

  ChainState base;
  base.U = pm.U;
  base.V = pm.V;
  base.mu_u.assign(M, Eigen::VectorXd::Zero(R));
  base.psi_u.assign(M, Eigen::VectorXd::Ones(R));
  base.mu_v.assign(M, Eigen::VectorXd::Zero(R));
  base.psi_v.assign(M, Eigen::VectorXd::Ones(R));
  base.beta = pm.beta;
  base.sigma2 = pm.sigma2;
  base.S = fit.modal_path;
  base.P = P_star;

  // Density of the data at the starred point, hidden path summed out.
  const double log_lik = ffbs_log_marginal(loglik_table(B, base), base.P);

  double log_prior = log_normal_pdf(pm.beta, hyper.beta_mean, hyper.beta_var);
  for (int m = 0; m < M; ++m) {
    log_prior += log_inverse_gamma_pdf(pm.sigma2[m], hyper.c0 / 2.0, hyper.d0 / 2.0);
  }
  for (int k = 0; k + 1 < M; ++k) {
    log_prior += log_beta_pdf(p_star[k], hyper.a0, hyper.b0);
  }

  Rng rng(opts.seed);
  auto reduced_sweep = [&](ChainState& s, bool update_beta, bool update_sigma) {
    if (update_beta) sample_intercept(s, B, hyper, false, rng);
    if (update_sigma) {
      for (int m = 0; m < M; ++m) sample_noise_variance(s, B, hyper, m, false, rng);
    }
    s.S = ffbs_sample_states(loglik_table(B, s), s.P, rng);
    sample_transition_matrix(s, hyper, rng);
  };

  // Ordinate of the noise variances: all remaining blocks move.
  LogMeanExp ord_sigma;
  {
    ChainState s = base;
    for (int i = 1; i <= opts.burnin + opts.sweeps; ++i) {
      reduced_sweep(s, true, true);
      if (i <= opts.burnin) continue;
      double lp = 0.0;
      for (int m = 0; m < M; ++m) {
        const InverseGammaParams cp = noise_variance_conditional(s, B, hyper, m);
        lp += log_inverse_gamma_pdf(pm.sigma2[m], cp.shape, cp.scale);
      }
      ord_sigma.add(lp);
    }
  }

  // Ordinate of the intercept with the noise variances pinned.
  LogMeanExp ord_beta;
  {
    ChainState s = base;
    for (int i = 1; i <= opts.burnin + opts.sweeps; ++i) {
      reduced_sweep(s, true, false);
      if (i <= opts.burnin) continue;
      const NormalParams cp = intercept_conditional(s, B, hyper);
      ord_beta.add(log_normal_pdf(pm.beta, cp.mean, cp.var));
    }
  }

  // Ordinate of the transition matrix with variances and intercept pinned.
  double log_ord_p = 0.0;
  if (M > 1) {
    LogMeanExp ord_p;
    ChainState s = base;
    for (int i = 1; i <= opts.burnin + opts.sweeps; ++i) {
      reduced_sweep(s, false, false);
      if (i <= opts.burnin) continue;
      const std::vector<BetaParams> cps = transition_conditionals(s.S, M, hyper);
      double lp = 0.0;
      for (int k = 0; k + 1 < M; ++k) {
        lp += log_beta_pdf(p_star[k], cps[k].a, cps[k].b);
      }
      ord_p.add(lp);
    }
    log_ord_p = ord_p.log_mean();
  }

  const double log_ord = ord_sigma.log_mean() + ord_beta.log_mean() + log_ord_p;
  if (!std::isfinite(log_ord)) {
    throw NumericalError("posterior ordinate estimate underflowed");
  }
  return log_lik + log_prior - log_ord;
}

ModelScore score_model(const std::vector<Eigen::MatrixXd>& B, const FitResult& fit,
                       const EvidenceOptions& opts) {
  ModelScore score;
  score.n_breaks = fit.config.n_regimes - 1;
  score.loglik = compute_loglik(B, fit);
  score.waic = compute_waic(B, fit);
  score.log_marginal = compute_log_marginal(B, fit, opts);
  score.avg_loss = compute_avg_loss(B, fit);
  return score;
}

BreakSelection detect_break_number(const std::vector<ModelScore>& scores) {
  if (scores.size() < 3) {
    throw ValidationError("break selection needs scores for at least three counts");
  }
  std::vector<ModelScore> s = scores;
  std::sort(s.begin(), s.end(),
            [](const ModelScore& a, const ModelScore& b) { return a.n_breaks < b.n_breaks; });
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    if (s[i].n_breaks == s[i + 1].n_breaks) {
      throw ValidationError("duplicate break count " + std::to_string(s[i].n_breaks));
    }
  }

  BreakSelection out;
  std::size_t best = 0;
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (s[i].waic < s[best].waic) best = i;
  }
  out.selected_breaks = s[best].n_breaks;

  for (std::size_t i = 1; i + 1 < s.size(); ++i) {
    const double rise = s[i].log_marginal - s[i - 1].log_marginal;
    const double fall = s[i + 1].log_marginal - s[i].log_marginal;
    if (rise > 0.0 && fall < 0.0) out.kink_candidates.push_back(s[i].n_breaks);
  }
  if (out.kink_candidates.empty()) {
    out.no_kink_warning = true;
    std::size_t top = 0;
    for (std::size_t i = 1; i < s.size(); ++i) {
      if (s[i].log_marginal > s[top].log_marginal) top = i;
    }
    out.kink_candidates.push_back(s[top].n_breaks);
  }
  return out;
}

}  // namespace netregime
