#include "netregime/hmtm.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "netregime/errors.hpp"

namespace netregime {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kGramTol = 1e-8;

double log_sum_exp(const Eigen::VectorXd& v) {
  const double mx = v.maxCoeff();
  if (!std::isfinite(mx)) return mx;
  return mx + std::log((v.array() - mx).exp().sum());
}

double safe_log(double x) { return x > 0.0 ? std::log(x) : kNegInf; }

// Lower Cholesky factor; the matrices passed here are posterior covariances
// built as inverses of positive definite precisions.
Eigen::MatrixXd chol_lower(const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("covariance is not positive definite");
  }
  return llt.matrixL();
}

// Draw from a matrix normal with identity row covariance: X = M + Z L' where
// L is the lower Cholesky factor of the column covariance.  Z is filled
// row-major so the draw order is independent of storage layout.
Eigen::MatrixXd sample_matrix_normal(const Eigen::MatrixXd& mean,
                                     const Eigen::MatrixXd& col_cov, Rng& rng) {
  Eigen::MatrixXd Z(mean.rows(), mean.cols());
  for (Eigen::Index i = 0; i < Z.rows(); ++i) {
    for (Eigen::Index j = 0; j < Z.cols(); ++j) Z(i, j) = rng.normal(0.0, 1.0);
  }
  return mean + Z * chol_lower(col_cov).transpose();
}

// Forward pass in log space.  Row t holds log p(B_1..t, S_t = m) up to a
// shared constant; state one is the mandatory starting state.
Eigen::MatrixXd forward_log_table(const Eigen::MatrixXd& LL, const Eigen::MatrixXd& P) {
  const int T = static_cast<int>(LL.rows());
  const int M = static_cast<int>(LL.cols());
  Eigen::MatrixXd logP(M, M);
  for (int a = 0; a < M; ++a) {
    for (int b = 0; b < M; ++b) logP(a, b) = safe_log(P(a, b));
  }
  Eigen::MatrixXd la = Eigen::MatrixXd::Constant(T, M, kNegInf);
  la(0, 0) = LL(0, 0);
  Eigen::VectorXd terms(M);
  for (int t = 1; t < T; ++t) {
    for (int m = 0; m < M; ++m) {
      for (int k = 0; k < M; ++k) terms(k) = la(t - 1, k) + logP(k, m);
      const double lse = log_sum_exp(terms);
      la(t, m) = std::isfinite(lse) ? LL(t, m) + lse : kNegInf;
    }
  }
  return la;
}

int sample_from_log_weights(const Eigen::VectorXd& lw, Rng& rng) {
  const double mx = lw.maxCoeff();
  if (!std::isfinite(mx)) throw NumericalError("hidden path weights vanished");
  Eigen::VectorXd w = (lw.array() - mx).exp();
  const double u = rng.uniform() * w.sum();
  double acc = 0.0;
  for (int m = 0; m < w.size(); ++m) {
    acc += w(m);
    if (u <= acc) return m;
  }
  return static_cast<int>(w.size()) - 1;
}

void check_ffbs_shapes(const Eigen::MatrixXd& LL, const Eigen::MatrixXd& P) {
  if (LL.rows() < 1 || LL.cols() < 1) throw ValidationError("empty likelihood table");
  if (P.rows() != P.cols() || P.rows() != LL.cols()) {
    throw ValidationError("transition matrix does not match the likelihood table");
  }
  if (LL.cols() > LL.rows()) {
    throw ValidationError("more regimes than weeks; a monotone path cannot reach the end");
  }
}

}  // namespace

void validate_inputs(const std::vector<Eigen::MatrixXd>& B, const ModelConfig& config,
                     const HyperParams& hyper) {
  if (B.empty()) throw ValidationError("no weekly slices supplied");
  const Eigen::Index n = B.front().rows();
  for (std::size_t t = 0; t < B.size(); ++t) {
    if (B[t].rows() != n || B[t].cols() != n) {
      throw ValidationError("slice " + std::to_string(t + 1) + " is not " +
                            std::to_string(n) + "x" + std::to_string(n));
    }
    if (!B[t].allFinite()) {
      throw ValidationError("slice " + std::to_string(t + 1) + " has non-finite entries");
    }
  }
  const int T = static_cast<int>(B.size());
  if (config.n_regimes < 1) throw ValidationError("need at least one regime");
  if (config.n_regimes > T) throw ValidationError("more regimes than weeks");
  if (config.rank < 1) throw ValidationError("latent rank must be positive");
  if (config.rank > n) throw ValidationError("latent rank exceeds the node count");
  if (config.iters < 1) throw ValidationError("need at least one sweep");
  if (config.burnin < 0 || config.burnin >= config.iters) {
    throw ValidationError("burn-in must lie in [0, iters)");
  }
  if (config.thin < 1) throw ValidationError("thinning interval must be positive");
  for (double h : {hyper.u0, hyper.u1, hyper.v0, hyper.v1, hyper.c0, hyper.d0, hyper.a0,
                   hyper.b0, hyper.beta_var}) {
    if (!(h > 0.0)) throw ValidationError("hyper-parameters must be positive");
  }
  if (!hyper.w_perturb.empty()) {
    if (static_cast<int>(hyper.w_perturb.size()) != config.n_regimes) {
      throw ValidationError("w_perturb must have one weight per regime");
    }
    double total = 0.0;
    for (double w : hyper.w_perturb) {
      if (w < 0.0) throw ValidationError("w_perturb weights must be non-negative");
      total += w;
    }
    if (!(total > 0.0)) throw ValidationError("w_perturb weights must not all vanish");
  }
}

std::vector<int> weeks_in_regime(const std::vector<int>& S, int regime) {
  std::vector<int> weeks;
  for (int t = 0; t < static_cast<int>(S.size()); ++t) {
    if (S[t] == regime) weeks.push_back(t);
  }
  return weeks;
}

double gram_schmidt(Eigen::MatrixXd& U) {
  const int R = static_cast<int>(U.cols());
  if (R <= 1) return 0.0;
  auto pass = [&U, R]() {
    for (int j = 1; j < R; ++j) {
      for (int k = 0; k < j; ++k) {
        const double denom = U.col(k).squaredNorm();
        if (denom < 1e-200) {
          throw NumericalError("orthogonalization pivot column vanished");
        }
        U.col(j) -= (U.col(k).dot(U.col(j)) / denom) * U.col(k);
      }
    }
  };
  auto max_offdiag = [&U, R]() {
    double mx = 0.0;
    for (int a = 0; a < R; ++a) {
      for (int b = a + 1; b < R; ++b) mx = std::max(mx, std::abs(U.col(a).dot(U.col(b))));
    }
    return mx;
  };
  pass();
  double off = max_offdiag();
  if (off > kGramTol) {
    pass();
    off = max_offdiag();
  }
  if (!(off <= kGramTol)) {
    throw NumericalError("orthogonalization left Gram off-diagonal at " +
                         std::to_string(off));
  }
  for (int j = 0; j < R; ++j) {
    if (U.col(j).squaredNorm() < 1e-200) {
      throw NumericalError("orthogonalization collapsed column " + std::to_string(j + 1));
    }
  }
  return off;
}

ChainState init_chain(const std::vector<Eigen::MatrixXd>& B, const ModelConfig& config,
                      const HyperParams& hyper) {
  validate_inputs(B, config, hyper);
  const int T = static_cast<int>(B.size());
  const int M = config.n_regimes;
  const int R = config.rank;
  const int N = static_cast<int>(B.front().rows());

  ChainState st;
  // Contiguous equal split; earlier regimes absorb the remainder.
  st.S.assign(T, 0);
  {
    const int base = T / M;
    const int rem = T % M;
    int pos = 0;
    for (int m = 0; m < M; ++m) {
      const int len = base + (m < rem ? 1 : 0);
      for (int i = 0; i < len; ++i) st.S[pos++] = m;
    }
  }

  st.V = Eigen::MatrixXd::Zero(T, R);
  st.beta = 0.0;
  for (int m = 0; m < M; ++m) {
    const std::vector<int> weeks = weeks_in_regime(st.S, m);
    Eigen::MatrixXd mean_block = Eigen::MatrixXd::Zero(N, N);
    for (int t : weeks) mean_block += B[t];
    mean_block /= static_cast<double>(weeks.size());
    // Symmetrize against accumulated round-off before the eigensolve.
    mean_block = 0.5 * (mean_block + mean_block.transpose()).eval();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(mean_block);
    if (es.info() != Eigen::Success) {
      throw NumericalError("eigendecomposition failed during initialization");
    }
    std::vector<int> order(N);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&es](int a, int b) {
      return std::abs(es.eigenvalues()(a)) > std::abs(es.eigenvalues()(b));
    });

    Eigen::MatrixXd U(N, R);
    for (int r = 0; r < R; ++r) {
      const double lam = es.eigenvalues()(order[r]);
      Eigen::VectorXd vec = es.eigenvectors().col(order[r]);
      Eigen::Index imax;
      vec.cwiseAbs().maxCoeff(&imax);
      if (vec(imax) < 0.0) vec = -vec;
      U.col(r) = vec * std::sqrt(std::max(std::abs(lam), 1e-8));
      const double w = (lam >= 0.0 ? 1.0 : -1.0) * std::sqrt(std::abs(lam));
      for (int t : weeks) st.V(t, r) = w;
    }
    gram_schmidt(U);
    st.U.push_back(U);

    double rss = 0.0;
    for (int t : weeks) {
      rss += (B[t] - U * st.V.row(t).asDiagonal() * U.transpose()).squaredNorm();
    }
    const double denom = static_cast<double>(weeks.size()) * N * N;
    st.sigma2.push_back(std::max(rss / denom, 1e-6));

    st.mu_u.push_back(U.colwise().mean().transpose());
    st.psi_u.push_back(Eigen::VectorXd::Ones(R));
    Eigen::VectorXd mv = Eigen::VectorXd::Zero(R);
    for (int t : weeks) mv += st.V.row(t).transpose();
    st.mu_v.push_back(mv / static_cast<double>(weeks.size()));
    st.psi_v.push_back(Eigen::VectorXd::Ones(R));
  }

  st.P = Eigen::MatrixXd::Zero(M, M);
  const double p = hyper.a0 / (hyper.a0 + hyper.b0);
  for (int k = 0; k + 1 < M; ++k) {
    st.P(k, k) = p;
    st.P(k, k + 1) = 1.0 - p;
  }
  st.P(M - 1, M - 1) = 1.0;
  return st;
}

double sample_latent_positions(ChainState& state, const std::vector<Eigen::MatrixXd>& B,
                               const HyperParams& hyper, int regime, bool prior_only,
                               Rng& rng) {
  Eigen::MatrixXd& U = state.U[regime];
  const int N = static_cast<int>(U.rows());
  const int R = static_cast<int>(U.cols());
  const std::vector<int> weeks = weeks_in_regime(state.S, regime);

  for (int r = 0; r < R; ++r) {
    const double shape = prior_only ? hyper.u0 / 2.0 : (hyper.u0 + N) / 2.0;
    const double scale =
        prior_only ? hyper.u1 / 2.0 : (U.col(r).squaredNorm() + hyper.u1) / 2.0;
    state.psi_u[regime](r) = rng.inverse_gamma(shape, scale);
  }
  {
    const double denom = prior_only ? 1.0 : static_cast<double>(N) + 1.0;
    for (int r = 0; r < R; ++r) {
      const double mean = prior_only ? hyper.mu0 : (U.col(r).sum() + hyper.mu0) / denom;
      state.mu_u[regime](r) = rng.normal(mean, std::sqrt(state.psi_u[regime](r) / denom));
    }
  }

  const Eigen::VectorXd psi = state.psi_u[regime];
  const Eigen::VectorXd psi_inv = psi.cwiseInverse();
  Eigen::MatrixXd mean;
  Eigen::MatrixXd col_cov;
  if (prior_only) {
    mean = Eigen::VectorXd::Ones(N) * state.mu_u[regime].transpose();
    col_cov = psi.asDiagonal();
  } else {
    Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(R, R);  // sum of v_t v_t'
    Eigen::MatrixXd load = Eigen::MatrixXd::Zero(N, R);
    for (int t : weeks) {
      const Eigen::VectorXd v = state.V.row(t).transpose();
      cross += v * v.transpose();
      load += (B[t].array() - state.beta).matrix() * U * v.asDiagonal();
    }
    const Eigen::MatrixXd Q = (U.transpose() * U).cwiseProduct(cross);
    Eigen::MatrixXd prec = Q / state.sigma2[regime];
    prec += Eigen::MatrixXd(psi_inv.asDiagonal());
    col_cov = prec.llt().solve(Eigen::MatrixXd::Identity(R, R));
    mean = (load / state.sigma2[regime] +
            Eigen::VectorXd::Ones(N) * psi_inv.cwiseProduct(state.mu_u[regime]).transpose()) *
           col_cov;
  }
  U = sample_matrix_normal(mean, col_cov, rng);
  return prior_only ? 0.0 : gram_schmidt(U);
}

void sample_latent_weights(ChainState& state, const std::vector<Eigen::MatrixXd>& B,
                           const HyperParams& hyper, int regime, bool prior_only,
                           Rng& rng) {
  const Eigen::MatrixXd& U = state.U[regime];
  const int R = static_cast<int>(U.cols());
  const int T = static_cast<int>(state.S.size());
  const std::vector<int> weeks = weeks_in_regime(state.S, regime);
  const double Tm = static_cast<double>(weeks.size());

  for (int r = 0; r < R; ++r) {
    double ss = 0.0;
    for (int t : weeks) ss += state.V(t, r) * state.V(t, r);
    // The shape counts all T layers even though the sum spans one regime.
    const double shape = prior_only ? hyper.v0 / 2.0 : (hyper.v0 + T) / 2.0;
    const double scale = prior_only ? hyper.v1 / 2.0 : (ss + hyper.v1) / 2.0;
    state.psi_v[regime](r) = rng.inverse_gamma(shape, scale);
  }
  {
    const double denom = prior_only ? 1.0 : Tm + 1.0;
    for (int r = 0; r < R; ++r) {
      double colsum = 0.0;
      for (int t : weeks) colsum += state.V(t, r);
      const double mean = prior_only ? hyper.mu0 : (colsum + hyper.mu0) / denom;
      state.mu_v[regime](r) = rng.normal(mean, std::sqrt(state.psi_v[regime](r) / denom));
    }
  }

  const Eigen::VectorXd psi = state.psi_v[regime];
  const Eigen::VectorXd psi_inv = psi.cwiseInverse();
  if (prior_only) {
    for (int t : weeks) {
      for (int r = 0; r < R; ++r) {
        state.V(t, r) = rng.normal(state.mu_v[regime](r), std::sqrt(psi(r)));
      }
    }
    return;
  }

  const Eigen::MatrixXd G = U.transpose() * U;
  const Eigen::MatrixXd Q = G.cwiseProduct(G);
  Eigen::MatrixXd prec = Q / state.sigma2[regime];
  prec += Eigen::MatrixXd(psi_inv.asDiagonal());
  const Eigen::MatrixXd cov = prec.llt().solve(Eigen::MatrixXd::Identity(R, R));
  const Eigen::MatrixXd L = chol_lower(cov);
  const Eigen::VectorXd prior_part = psi_inv.cwiseProduct(state.mu_v[regime]);
  for (int t : weeks) {
    Eigen::VectorXd load(R);
    const Eigen::MatrixXd centered = (B[t].array() - state.beta).matrix();
    for (int r = 0; r < R; ++r) load(r) = U.col(r).dot(centered * U.col(r));
    const Eigen::VectorXd mean = cov * (load / state.sigma2[regime] + prior_part);
    Eigen::VectorXd z(R);
    for (int r = 0; r < R; ++r) z(r) = rng.normal(0.0, 1.0);
    state.V.row(t) = (mean + L * z).transpose();
  }
}

NormalParams intercept_conditional(const ChainState& state,
                                   const std::vector<Eigen::MatrixXd>& B,
                                   const HyperParams& hyper) {
  const int T = static_cast<int>(B.size());
  const double n2 = static_cast<double>(B.front().size());
  double prec = 1.0 / hyper.beta_var;
  double num = hyper.beta_mean / hyper.beta_var;
  for (int t = 0; t < T; ++t) {
    const int m = state.S[t];
    const Eigen::MatrixXd fit =
        state.U[m] * state.V.row(t).asDiagonal() * state.U[m].transpose();
    num += (B[t] - fit).sum() / state.sigma2[m];
    prec += n2 / state.sigma2[m];
  }
  NormalParams out;
  out.var = 1.0 / prec;
  out.mean = num * out.var;
  return out;
}

void sample_intercept(ChainState& state, const std::vector<Eigen::MatrixXd>& B,
                      const HyperParams& hyper, bool prior_only, Rng& rng) {
  NormalParams p;
  if (prior_only) {
    p.mean = hyper.beta_mean;
    p.var = hyper.beta_var;
  } else {
    p = intercept_conditional(state, B, hyper);
  }
  state.beta = rng.normal(p.mean, std::sqrt(p.var));
}

InverseGammaParams noise_variance_conditional(const ChainState& state,
                                              const std::vector<Eigen::MatrixXd>& B,
                                              const HyperParams& hyper, int regime) {
  const std::vector<int> weeks = weeks_in_regime(state.S, regime);
  const double n2 = static_cast<double>(B.front().size());
  double rss = 0.0;
  for (int t : weeks) {
    Eigen::MatrixXd resid =
        B[t] - state.U[regime] * state.V.row(t).asDiagonal() * state.U[regime].transpose();
    resid.array() -= state.beta;
    rss += resid.squaredNorm();
  }
  InverseGammaParams out;
  out.shape = (hyper.c0 + n2 * static_cast<double>(weeks.size())) / 2.0;
  out.scale = (hyper.d0 + rss) / 2.0;
  return out;
}

void sample_noise_variance(ChainState& state, const std::vector<Eigen::MatrixXd>& B,
                           const HyperParams& hyper, int regime, bool prior_only,
                           Rng& rng) {
  InverseGammaParams p;
  if (prior_only) {
    p.shape = hyper.c0 / 2.0;
    p.scale = hyper.d0 / 2.0;
  } else {
    p = noise_variance_conditional(state, B, hyper, regime);
  }
  state.sigma2[regime] = rng.inverse_gamma(p.shape, p.scale);
}

std::vector<BetaParams> transition_conditionals(const std::vector<int>& S, int n_regimes,
                                                const HyperParams& hyper) {
  std::vector<long> stay(n_regimes, 0);
  std::vector<long> advance(n_regimes, 0);
  for (std::size_t t = 0; t + 1 < S.size(); ++t) {
    if (S[t + 1] == S[t]) {
      ++stay[S[t]];
    } else if (S[t + 1] == S[t] + 1) {
      ++advance[S[t]];
    } else {
      throw ValidationError("hidden path is not monotone with unit steps");
    }
  }
  std::vector<BetaParams> out;
  for (int k = 0; k + 1 < n_regimes; ++k) {
    BetaParams bp;
    bp.a = hyper.a0 + static_cast<double>(stay[k]) - 1.0;
    bp.b = hyper.b0 + static_cast<double>(advance[k]);
    if (bp.a <= 0.0) {
      std::cerr << "[netregime] warning: persistence shape for regime " << k + 1
                << " fell to " << bp.a << "; flooring at 1e-3\n";
      bp.a = 1e-3;
    }
    if (bp.b <= 0.0) {
      std::cerr << "[netregime] warning: advance shape for regime " << k + 1
                << " fell to " << bp.b << "; flooring at 1e-3\n";
      bp.b = 1e-3;
    }
    out.push_back(bp);
  }
  return out;
}

void sample_transition_matrix(ChainState& state, const HyperParams& hyper, Rng& rng) {
  const int M = state.n_regimes();
  state.P = Eigen::MatrixXd::Zero(M, M);
  state.P(M - 1, M - 1) = 1.0;
  if (M == 1) return;
  const std::vector<BetaParams> cond = transition_conditionals(state.S, M, hyper);
  for (int k = 0; k + 1 < M; ++k) {
    double p = rng.beta(cond[k].a, cond[k].b);
    p = std::clamp(p, 1e-12, 1.0 - 1e-12);
    state.P(k, k) = p;
    state.P(k, k + 1) = 1.0 - p;
  }
}

double layer_loglik(const Eigen::MatrixXd& Bt, const Eigen::MatrixXd& Um,
                    const Eigen::VectorXd& vt, double beta, double sigma2) {
  const double n2 = static_cast<double>(Bt.size());
  Eigen::MatrixXd resid = Bt - Um * vt.asDiagonal() * Um.transpose();
  resid.array() -= beta;
  return -0.5 * n2 * std::log(2.0 * std::numbers::pi * sigma2) -
         0.5 * resid.squaredNorm() / sigma2;
}

Eigen::MatrixXd loglik_table(const std::vector<Eigen::MatrixXd>& B,
                             const ChainState& state) {
  const int T = static_cast<int>(B.size());
  const int M = state.n_regimes();
  Eigen::MatrixXd LL(T, M);
  for (int t = 0; t < T; ++t) {
    const Eigen::VectorXd vt = state.V.row(t).transpose();
    for (int m = 0; m < M; ++m) {
      LL(t, m) = layer_loglik(B[t], state.U[m], vt, state.beta, state.sigma2[m]);
    }
  }
  return LL;
}

double chain_loglik(const std::vector<Eigen::MatrixXd>& B, const ChainState& state) {
  double total = 0.0;
  for (int t = 0; t < static_cast<int>(B.size()); ++t) {
    total += layer_loglik(B[t], state.U[state.S[t]], state.V.row(t).transpose(),
                          state.beta, state.sigma2[state.S[t]]);
  }
  return total;
}

double ffbs_log_marginal(const Eigen::MatrixXd& loglik, const Eigen::MatrixXd& P) {
  check_ffbs_shapes(loglik, P);
  const Eigen::MatrixXd la = forward_log_table(loglik, P);
  const double lm = log_sum_exp(la.row(la.rows() - 1).transpose());
  if (!std::isfinite(lm)) throw NumericalError("path marginal underflowed");
  return lm;
}

std::vector<int> ffbs_sample_states(const Eigen::MatrixXd& loglik,
                                    const Eigen::MatrixXd& P, Rng& rng) {
  check_ffbs_shapes(loglik, P);
  const int T = static_cast<int>(loglik.rows());
  const int M = static_cast<int>(loglik.cols());
  const Eigen::MatrixXd la = forward_log_table(loglik, P);
  std::vector<int> S(T);
  S[T - 1] = M - 1;
  Eigen::VectorXd lw(M);
  for (int t = T - 2; t >= 0; --t) {
    const int next = S[t + 1];
    for (int m = 0; m < M; ++m) lw(m) = la(t, m) + safe_log(P(m, next));
    S[t] = sample_from_log_weights(lw, rng);
  }
  return S;
}

bool rebalance_singleton_regimes(ChainState& state, const HyperParams& hyper, Rng& rng) {
  const int M = state.n_regimes();
  const int T = static_cast<int>(state.S.size());
  std::vector<long> count(M, 0);
  for (int s : state.S) ++count[s];
  if (std::find(count.begin(), count.end(), 1L) == count.end()) return false;

  std::vector<double> w =
      hyper.w_perturb.empty() ? std::vector<double>(M, 1.0) : hyper.w_perturb;
  const std::vector<long> extra = rng.multinomial(T - M, w);
  int pos = 0;
  for (int m = 0; m < M; ++m) {
    const long len = 1 + extra[m];
    for (long i = 0; i < len; ++i) state.S[pos++] = m;
  }
  return true;
}

SweepStats gibbs_sweep(ChainState& state, const std::vector<Eigen::MatrixXd>& B,
                       const HyperParams& hyper, const GibbsOptions& opts, Rng& rng) {
  const int M = state.n_regimes();
  const int T = static_cast<int>(B.size());
  SweepStats stats;
  for (int m = 0; m < M; ++m) {
    stats.max_gram_offdiag =
        std::max(stats.max_gram_offdiag,
                 sample_latent_positions(state, B, hyper, m, opts.prior_only, rng));
  }
  for (int m = 0; m < M; ++m) {
    sample_latent_weights(state, B, hyper, m, opts.prior_only, rng);
  }
  sample_intercept(state, B, hyper, opts.prior_only, rng);
  for (int m = 0; m < M; ++m) {
    sample_noise_variance(state, B, hyper, m, opts.prior_only, rng);
  }
  const Eigen::MatrixXd LL =
      opts.prior_only ? Eigen::MatrixXd::Zero(T, M) : loglik_table(B, state);
  state.S = ffbs_sample_states(LL, state.P, rng);
  if (opts.in_burnin) rebalance_singleton_regimes(state, hyper, rng);
  sample_transition_matrix(state, hyper, rng);
  return stats;
}

namespace {

ParamDraw make_draw(const ChainState& state) {
  ParamDraw d;
  d.U = state.U;
  d.V = state.V;
  d.beta = state.beta;
  d.sigma2 = state.sigma2;
  d.S = state.S;
  d.P = state.P;
  return d;
}

std::vector<int> modal_path_from_probs(const Eigen::MatrixXd& probs) {
  std::vector<int> path(probs.rows());
  for (Eigen::Index t = 0; t < probs.rows(); ++t) {
    int best = 0;
    for (Eigen::Index m = 1; m < probs.cols(); ++m) {
      if (probs(t, m) > probs(t, best)) best = static_cast<int>(m);
    }
    path[t] = best;
  }
  return path;
}

}  // namespace

FitResult run_chain(const std::vector<Eigen::MatrixXd>& B, const ModelConfig& config,
                    const HyperParams& hyper) {
  validate_inputs(B, config, hyper);
  Rng rng(config.seed);
  ChainState state = init_chain(B, config, hyper);
  const int T = static_cast<int>(B.size());
  const int M = config.n_regimes;

  FitResult fit;
  fit.config = config;
  fit.hyper = hyper;
  fit.state_probs = Eigen::MatrixXd::Zero(T, M);
  fit.loglik_trace.reserve(config.iters);

  long post_sweeps = 0;
  for (int i = 1; i <= config.iters; ++i) {
    GibbsOptions opts;
    opts.in_burnin = i <= config.burnin;
    const SweepStats stats = gibbs_sweep(state, B, hyper, opts, rng);
    fit.loglik_trace.push_back(chain_loglik(B, state));
    if (i > config.burnin) {
      ++post_sweeps;
      for (int t = 0; t < T; ++t) fit.state_probs(t, state.S[t]) += 1.0;
      if ((i - config.burnin) % config.thin == 0) {
        fit.draws.push_back(make_draw(state));
        fit.max_gram_offdiag = std::max(fit.max_gram_offdiag, stats.max_gram_offdiag);
      }
    }
  }
  if (fit.draws.empty()) {
    throw ValidationError("no draws retained; reduce burn-in or thinning");
  }
  fit.state_probs /= static_cast<double>(post_sweeps);
  fit.modal_path = modal_path_from_probs(fit.state_probs);
  return fit;
}

PosteriorMeanParams posterior_mean_params(const FitResult& fit) {
  if (fit.draws.empty()) throw ValidationError("fit holds no retained draws");
  const ParamDraw& ref = fit.draws.front();
  const int M = static_cast<int>(ref.U.size());
  const int R = static_cast<int>(ref.U.front().cols());
  const double G = static_cast<double>(fit.draws.size());

  PosteriorMeanParams pm;
  pm.U.assign(M, Eigen::MatrixXd::Zero(ref.U.front().rows(), R));
  pm.V = Eigen::MatrixXd::Zero(ref.V.rows(), ref.V.cols());
  pm.sigma2.assign(M, 0.0);
  pm.P = Eigen::MatrixXd::Zero(ref.P.rows(), ref.P.cols());
  for (const ParamDraw& d : fit.draws) {
    for (int m = 0; m < M; ++m) {
      for (int r = 0; r < R; ++r) {
        const double sign = ref.U[m].col(r).dot(d.U[m].col(r)) < 0.0 ? -1.0 : 1.0;
        pm.U[m].col(r) += sign * d.U[m].col(r);
      }
      pm.sigma2[m] += d.sigma2[m];
    }
    pm.V += d.V;
    pm.beta += d.beta;
    pm.P += d.P;
  }
  for (int m = 0; m < M; ++m) {
    pm.U[m] /= G;
    pm.sigma2[m] /= G;
  }
  pm.V /= G;
  pm.beta /= G;
  pm.P /= G;
  return pm;
}

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& rows) {
  const Eigen::Index r = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index c = r > 0 ? static_cast<Eigen::Index>(rows.at(0).size()) : 0;
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rows.at(i).at(j).get<double>();
  }
  return m;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void save_fit(const FitResult& fit, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string());
  const int T = static_cast<int>(fit.state_probs.rows());
  const int M = static_cast<int>(fit.state_probs.cols());

  {
    std::ofstream out(dir / "draws.jsonl");
    if (!out) throw IoError("cannot write " + (dir / "draws.jsonl").string());
    for (const ParamDraw& d : fit.draws) {
      nlohmann::json j;
      nlohmann::json us = nlohmann::json::array();
      for (const auto& U : d.U) us.push_back(matrix_to_json(U));
      j["U"] = std::move(us);
      j["V"] = matrix_to_json(d.V);
      j["beta"] = d.beta;
      j["sigma2"] = d.sigma2;
      std::vector<int> s1(d.S.size());
      std::transform(d.S.begin(), d.S.end(), s1.begin(), [](int s) { return s + 1; });
      j["S"] = s1;
      j["P"] = matrix_to_json(d.P);
      out << j.dump() << '\n';
    }
  }
  {
    std::ofstream out(dir / "stateprobs.csv");
    if (!out) throw IoError("cannot write " + (dir / "stateprobs.csv").string());
    out << "week";
    for (int m = 1; m <= M; ++m) out << ",regime_" << m;
    out << '\n';
    for (int t = 0; t < T; ++t) {
      out << t + 1;
      for (int m = 0; m < M; ++m) out << ',' << fmt_double(fit.state_probs(t, m));
      out << '\n';
    }
  }
  {
    std::ofstream out(dir / "regime_summary.csv");
    if (!out) throw IoError("cannot write " + (dir / "regime_summary.csv").string());
    out << "week,modal_regime,modal_prob\n";
    for (int t = 0; t < T; ++t) {
      out << t + 1 << ',' << fit.modal_path[t] + 1 << ','
          << fmt_double(fit.state_probs(t, fit.modal_path[t])) << '\n';
    }
  }
  {
    std::ofstream out(dir / "loglik_trace.csv");
    if (!out) throw IoError("cannot write " + (dir / "loglik_trace.csv").string());
    out << "sweep,loglik\n";
    for (std::size_t i = 0; i < fit.loglik_trace.size(); ++i) {
      out << i + 1 << ',' << fmt_double(fit.loglik_trace[i]) << '\n';
    }
  }
  {
    const PosteriorMeanParams pm = posterior_mean_params(fit);
    nlohmann::json j;
    j["model"] = {{"n_regimes", fit.config.n_regimes}, {"rank", fit.config.rank},
                  {"iters", fit.config.iters},         {"burnin", fit.config.burnin},
                  {"thin", fit.config.thin},           {"seed", fit.config.seed}};
    j["hyper"] = {{"u0", fit.hyper.u0},
                  {"u1", fit.hyper.u1},
                  {"v0", fit.hyper.v0},
                  {"v1", fit.hyper.v1},
                  {"c0", fit.hyper.c0},
                  {"d0", fit.hyper.d0},
                  {"a0", fit.hyper.a0},
                  {"b0", fit.hyper.b0},
                  {"beta_mean", fit.hyper.beta_mean},
                  {"beta_var", fit.hyper.beta_var},
                  {"mu0", fit.hyper.mu0},
                  {"w_perturb", fit.hyper.w_perturb}};
    j["n_draws"] = fit.draws.size();
    j["max_gram_offdiag"] = fit.max_gram_offdiag;
    j["final_loglik"] = fit.loglik_trace.back();
    std::vector<int> path1(fit.modal_path.size());
    std::transform(fit.modal_path.begin(), fit.modal_path.end(), path1.begin(),
                   [](int s) { return s + 1; });
    j["posterior"] = {{"beta", pm.beta},
                      {"sigma2", pm.sigma2},
                      {"P", matrix_to_json(pm.P)},
                      {"modal_path", path1}};
    std::ofstream out(dir / "summary.json");
    if (!out) throw IoError("cannot write " + (dir / "summary.json").string());
    out << j.dump(2) << '\n';
  }
}

FitResult load_fit(const std::filesystem::path& dir) {
  nlohmann::json summary;
  {
    std::ifstream in(dir / "summary.json");
    if (!in) throw IoError("cannot read " + (dir / "summary.json").string());
    try {
      in >> summary;
    } catch (const nlohmann::json::exception& e) {
      throw IoError("bad summary.json in " + dir.string() + ": " + e.what());
    }
  }
  FitResult fit;
  try {
    const auto& model = summary.at("model");
    fit.config.n_regimes = model.at("n_regimes").get<int>();
    fit.config.rank = model.at("rank").get<int>();
    fit.config.iters = model.at("iters").get<int>();
    fit.config.burnin = model.at("burnin").get<int>();
    fit.config.thin = model.at("thin").get<int>();
    fit.config.seed = model.at("seed").get<std::uint64_t>();
    const auto& hy = summary.at("hyper");
    fit.hyper.u0 = hy.at("u0").get<double>();
    fit.hyper.u1 = hy.at("u1").get<double>();
    fit.hyper.v0 = hy.at("v0").get<double>();
    fit.hyper.v1 = hy.at("v1").get<double>();
    fit.hyper.c0 = hy.at("c0").get<double>();
    fit.hyper.d0 = hy.at("d0").get<double>();
    fit.hyper.a0 = hy.at("a0").get<double>();
    fit.hyper.b0 = hy.at("b0").get<double>();
    fit.hyper.beta_mean = hy.at("beta_mean").get<double>();
    fit.hyper.beta_var = hy.at("beta_var").get<double>();
    fit.hyper.mu0 = hy.at("mu0").get<double>();
    fit.hyper.w_perturb = hy.at("w_perturb").get<std::vector<double>>();
    fit.max_gram_offdiag = summary.at("max_gram_offdiag").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad summary.json in " + dir.string() + ": " + e.what());
  }

  {
    std::ifstream in(dir / "draws.jsonl");
    if (!in) throw IoError("cannot read " + (dir / "draws.jsonl").string());
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
        ParamDraw d;
        for (const auto& u : j.at("U")) d.U.push_back(matrix_from_json(u));
        d.V = matrix_from_json(j.at("V"));
        d.beta = j.at("beta").get<double>();
        d.sigma2 = j.at("sigma2").get<std::vector<double>>();
        for (int s : j.at("S").get<std::vector<int>>()) d.S.push_back(s - 1);
        d.P = matrix_from_json(j.at("P"));
        fit.draws.push_back(std::move(d));
      } catch (const nlohmann::json::exception& e) {
        throw IoError("bad draw record in " + dir.string() + ": " + e.what());
      }
    }
  }
  if (fit.draws.empty()) throw IoError("no draws found in " + dir.string());

  {
    std::ifstream in(dir / "stateprobs.csv");
    if (!in) throw IoError("cannot read " + (dir / "stateprobs.csv").string());
    std::string line;
    std::getline(in, line);  // header
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::stringstream ss(line);
      std::string cell;
      std::vector<double> row;
      std::getline(ss, cell, ',');  // week number
      while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
      rows.push_back(std::move(row));
    }
    if (rows.empty()) throw IoError("empty stateprobs.csv in " + dir.string());
    fit.state_probs.resize(rows.size(), rows.front().size());
    for (std::size_t t = 0; t < rows.size(); ++t) {
      if (rows[t].size() != rows.front().size()) {
        throw IoError("ragged stateprobs.csv in " + dir.string());
      }
      for (std::size_t m = 0; m < rows[t].size(); ++m) fit.state_probs(t, m) = rows[t][m];
    }
  }
  {
    std::ifstream in(dir / "loglik_trace.csv");
    if (!in) throw IoError("cannot read " + (dir / "loglik_trace.csv").string());
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto comma = line.find(',');
      if (comma == std::string::npos) throw IoError("bad loglik_trace.csv row");
      fit.loglik_trace.push_back(std::stod(line.substr(comma + 1)));
    }
  }
  fit.modal_path = modal_path_from_probs(fit.state_probs);
  return fit;
}

}  // namespace netregime
