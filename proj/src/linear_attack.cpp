#include "stealth/linear_attack.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "stealth/errors.hpp"
#include "stealth/rng.hpp"

namespace stealth {

namespace {

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& m) { return 0.5 * (m + m.transpose()); }

double min_eigenvalue(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(m));
  const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

constexpr double kPsdSlack = 1e-12;

}  // namespace

LinearSystem::LinearSystem(Eigen::MatrixXd a, Eigen::MatrixXd b, Eigen::MatrixXd k, Eigen::MatrixXd sigma)
    : a_(std::move(a)), b_(std::move(b)), k_(std::move(k)), sigma_(std::move(sigma)) {
  const Eigen::Index n = a_.rows();
  if (n == 0 || a_.cols() != n) throw InvalidInput("A must be square and nonempty");
  if (b_.rows() != n || b_.cols() == 0) throw InvalidInput("B must have n rows");
  const Eigen::Index m = b_.cols();
  if (k_.rows() != m || k_.cols() != n) throw InvalidInput("K must be m x n");
  if (sigma_.rows() != n || sigma_.cols() != n) throw InvalidInput("Sigma must be n x n");
  if (!a_.allFinite() || !b_.allFinite() || !k_.allFinite() || !sigma_.allFinite())
    throw InvalidInput("system matrices must be finite");
  if ((sigma_ - sigma_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + sigma_.cwiseAbs().maxCoeff()))
    throw InvalidInput("Sigma must be symmetric");
  sigma_ = symmetrize(sigma_);
  if (!(min_eigenvalue(sigma_) > 0.0)) throw InvalidInput("Sigma must be positive definite");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(b_);
  if (qr.rank() != m) throw InvalidInput("B must have full column rank");
  l_ = a_ + b_ * k_;
  if (!(spectral_radius(l_) < 1.0)) throw InvalidInput("closed loop A + B K is not Schur stable");
  b_pinv_ = (b_.transpose() * b_).ldlt().solve(b_.transpose());
  sigma_inv_ = symmetrize(sigma_.ldlt().solve(Eigen::MatrixXd::Identity(n, n)));
}

LinearSystem example_system() {
  Eigen::MatrixXd a(2, 2), b(2, 2), k(2, 2);
  a << 0.7, 0.9, 1.5, 2.0;
  b << 0.0, 1.0, 2.0, 1.0;
  b *= 2.0;
  k << 0.19, 0.26125, 0.3325, 0.4275;
  k *= -1.0;
  return LinearSystem(a, b, k, Eigen::MatrixXd::Identity(2, 2));
}

double spectral_radius(const Eigen::MatrixXd& m) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

Eigen::MatrixXd solve_discrete_lyapunov(const Eigen::MatrixXd& m, const Eigen::MatrixXd& q) {
  const Eigen::Index n = m.rows();
  if (m.cols() != n || q.rows() != n || q.cols() != n) throw InvalidInput("lyapunov: dimension mismatch");
  // column-major vec: vec(M X M^T) = (M kron M) vec(X)
  Eigen::MatrixXd kron(n * n, n * n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) kron.block(i * n, j * n, n, n) = m(i, j) * m;
  const Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(n * n, n * n) - kron;
  const Eigen::Map<const Eigen::VectorXd> vq(q.data(), n * n);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(lhs);
  if (!lu.isInvertible()) throw NumericalError("lyapunov operator is singular");
  const Eigen::VectorXd vx = lu.solve(vq);
  return symmetrize(Eigen::Map<const Eigen::MatrixXd>(vx.data(), n, n));
}

namespace {

struct StepResult {
  Eigen::MatrixXd p;
  Eigen::MatrixXd f;
};

// One backward step from P_{t+1}; empty optional signalled by throwing.
StepResult riccati_step(const LinearSystem& sys, double beta, const Eigen::MatrixXd& p_next, std::size_t t) {
  const Eigen::Index n = sys.dim();
  const Eigen::MatrixXd f = symmetrize(0.5 * sys.sigma_inv() - beta * p_next);
  if (!(min_eigenvalue(f) > 0.0))
    throw Infeasible("F_t is not positive definite at step " + std::to_string(t) + " (beta = " +
                     std::to_string(beta) + ")");
  const Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n) - 2.0 * beta * sys.sigma() * p_next;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
  const Eigen::MatrixXd p =
      Eigen::MatrixXd::Identity(n, n) + sys.closed_loop().transpose() * p_next * lu.solve(sys.closed_loop());
  if (!p.allFinite()) throw Infeasible("Riccati step is not finite at step " + std::to_string(t));
  return {symmetrize(p), f};
}

Eigen::MatrixXd attack_gain(const LinearSystem& sys, double beta, const Eigen::MatrixXd& f,
                            const Eigen::MatrixXd& p_next) {
  return beta * sys.b_pinv() * f.ldlt().solve(p_next * sys.closed_loop());
}

Eigen::MatrixXd attack_cov(const LinearSystem& sys, double beta, const Eigen::MatrixXd& f,
                           const Eigen::MatrixXd& p_next) {
  return symmetrize(beta * sys.b_pinv() * f.ldlt().solve(p_next * sys.sigma()) * sys.b_pinv().transpose());
}

}  // namespace

double trace_log_identity_plus(const Eigen::MatrixXd& sigma, const Eigen::MatrixXd& r) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(sigma));
  const Eigen::VectorXd inv_sqrt = es.eigenvalues().cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd w = es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> inner(symmetrize(w * r * w), Eigen::EigenvaluesOnly);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < inner.eigenvalues().size(); ++i) acc += std::log1p(inner.eigenvalues()(i));
  return acc;
}

RiccatiSolution riccati_backward(const LinearSystem& sys, double beta, std::size_t horizon) {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw InvalidInput("beta must be positive");
  if (horizon < 1) throw InvalidInput("horizon must be >= 1");
  const Eigen::Index n = sys.dim();
  RiccatiSolution sol;
  sol.beta = beta;
  sol.p_seq.assign(horizon + 1, Eigen::MatrixXd::Identity(n, n));
  sol.f_seq.assign(horizon, Eigen::MatrixXd());
  sol.offset_deterministic.assign(horizon + 1, 0.0);
  sol.offset_gaussian.assign(horizon + 1, 0.0);
  for (std::size_t t = horizon; t-- > 0;) {
    const Eigen::MatrixXd& p_next = sol.p_seq[t + 1];
    StepResult st = riccati_step(sys, beta, p_next, t);
    const Eigen::MatrixXd v = attack_cov(sys, beta, st.f, p_next);
    const Eigen::MatrixXd r = symmetrize(sys.b() * v * sys.b().transpose());
    sol.offset_deterministic[t] = sol.offset_deterministic[t + 1] + (sys.sigma() * p_next).trace();
    const double correction = (sys.sigma_inv() * r).trace() - trace_log_identity_plus(sys.sigma(), r);
    sol.offset_gaussian[t] =
        sol.offset_gaussian[t + 1] + ((sys.sigma() + r) * p_next).trace() - correction / (2.0 * beta);
    sol.p_seq[t] = std::move(st.p);
    sol.f_seq[t] = std::move(st.f);
    ++sol.iterations;
  }
  return sol;
}

RiccatiSolution stationary_riccati(const LinearSystem& sys, double beta, double tol) {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw InvalidInput("beta must be positive");
  if (!(tol > 0.0)) throw InvalidInput("tol must be positive");
  const Eigen::Index n = sys.dim();
  Eigen::MatrixXd p = Eigen::MatrixXd::Identity(n, n);
  constexpr std::size_t kMaxIter = 100000;
  for (std::size_t it = 1; it <= kMaxIter; ++it) {
    StepResult st = riccati_step(sys, beta, p, it);
    if (st.p.trace() > 1e8) throw Infeasible("Riccati iteration diverges at beta = " + std::to_string(beta));
    const double diff = (st.p - p).cwiseAbs().maxCoeff();
    p = std::move(st.p);
    if (diff <= tol) {
      const Eigen::MatrixXd f = symmetrize(0.5 * sys.sigma_inv() - beta * p);
      if (!(min_eigenvalue(f) > 0.0)) throw Infeasible("stationary F is not positive definite");
      RiccatiSolution sol;
      sol.beta = beta;
      sol.p_seq = {p};
      sol.f_seq = {f};
      sol.stationary = true;
      sol.iterations = it;
      return sol;
    }
  }
  throw Infeasible("Riccati iteration did not converge at beta = " + std::to_string(beta));
}

namespace {

bool stationary_feasible(const LinearSystem& sys, double beta) {
  try {
    stationary_riccati(sys, beta);
    return true;
  } catch (const Infeasible&) {
    return false;
  }
}

// (beta/2) Kbar^T B^T Sigma^{-1} B Kbar - I > 0 at the stationary solution
bool gain_condition(const LinearSystem& sys, double beta) {
  const RiccatiSolution sol = stationary_riccati(sys, beta);
  const Eigen::MatrixXd kbar = sys.b_pinv() * sol.f_seq[0].ldlt().solve(sol.p_seq[0] * sys.closed_loop());
  const Eigen::MatrixXd bk = sys.b() * kbar;
  const Eigen::MatrixXd m =
      0.5 * beta * bk.transpose() * sys.sigma_inv() * bk - Eigen::MatrixXd::Identity(sys.dim(), sys.dim());
  return min_eigenvalue(m) > 0.0;
}

}  // namespace

BetaFrontier beta_star(const LinearSystem& sys, double tol) {
  if (!(tol > 0.0)) throw InvalidInput("tol must be positive");
  double lo = 1e-4, hi = 10.0;
  std::string pattern;
  while (!stationary_feasible(sys, lo)) {
    pattern += " infeasible@" + std::to_string(lo);
    lo /= 10.0;
    if (lo < 1e-12) throw NumericalError("beta bracket failure:" + pattern);
  }
  while (stationary_feasible(sys, hi)) {
    pattern += " feasible@" + std::to_string(hi);
    hi *= 2.0;
    if (hi > 1e6) throw NumericalError("beta bracket failure:" + pattern);
  }
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (stationary_feasible(sys, mid) ? lo : hi) = mid;
  }
  BetaFrontier fr;
  fr.beta0 = 0.5 * (lo + hi);
  const double top = lo;

  // scan the feasible range for the first point where the gain condition holds
  fr.beta1 = std::numeric_limits<double>::infinity();
  constexpr int kGrid = 200;
  double prev = 0.0;
  for (int i = 1; i <= kGrid; ++i) {
    const double b = top * static_cast<double>(i) / kGrid;
    if (gain_condition(sys, b)) {
      double a = prev > 0.0 ? prev : b * 1e-6, c = b;
      while (c - a > tol) {
        const double mid = 0.5 * (a + c);
        (gain_condition(sys, mid) ? c : a) = mid;
      }
      fr.beta1 = 0.5 * (a + c);
      break;
    }
    prev = b;
  }
  fr.beta_star = std::min(fr.beta0, fr.beta1);
  return fr;
}

GaussianAttack synthesize_attack(const RiccatiSolution& riccati, const LinearSystem& sys, LinearAttackKind kind) {
  if (riccati.f_seq.empty()) throw InvalidInput("riccati solution has no steps");
  GaussianAttack atk;
  atk.kind = kind;
  const std::size_t steps = riccati.f_seq.size();
  for (std::size_t t = 0; t < steps; ++t) {
    const Eigen::MatrixXd& p_next = riccati.stationary ? riccati.p_seq[0] : riccati.p_seq[t + 1];
    atk.gains.push_back(attack_gain(sys, riccati.beta, riccati.f_seq[t], p_next));
    if (kind == LinearAttackKind::gaussian) {
      atk.covariances.push_back(attack_cov(sys, riccati.beta, riccati.f_seq[t], p_next));
    } else {
      atk.covariances.push_back(Eigen::MatrixXd::Zero(sys.b().cols(), sys.b().cols()));
    }
  }
  return atk;
}

GaussianAttack zero_attack(const LinearSystem& sys) {
  GaussianAttack atk;
  atk.kind = LinearAttackKind::deterministic;
  atk.gains = {Eigen::MatrixXd::Zero(sys.b().cols(), sys.dim())};
  atk.covariances = {Eigen::MatrixXd::Zero(sys.b().cols(), sys.b().cols())};
  return atk;
}

LinearSimulation simulate_linear(const LinearSystem& sys, const GaussianAttack& attack,
                                 const LinearSimOptions& options) {
  if (attack.gains.empty() || attack.gains.size() != attack.covariances.size())
    throw InvalidInput("attack has no gains");
  if (options.trials < 1 || options.horizon < 1) throw InvalidInput("trials and horizon must be >= 1");
  const Eigen::Index n = sys.dim();
  const std::size_t T = options.horizon, nu = options.change_time;

  // per attack index: noise factor, attacked covariance inverse and log-det
  struct Law {
    Eigen::MatrixXd gain, v_sqrt, s1_inv;
    double log_det_ratio;
  };
  std::vector<Law> laws;
  for (std::size_t i = 0; i < attack.gains.size(); ++i) {
    const Eigen::MatrixXd r = symmetrize(sys.b() * attack.covariances[i] * sys.b().transpose());
    const Eigen::MatrixXd s1 = sys.sigma() + r;
    laws.push_back({attack.gains[i], psd_sqrt(attack.covariances[i]),
                    symmetrize(s1.ldlt().solve(Eigen::MatrixXd::Identity(n, n))),
                    trace_log_identity_plus(sys.sigma(), r)});
  }
  const Eigen::MatrixXd w_sqrt = psd_sqrt(sys.sigma());
  const Eigen::MatrixXd x0_sqrt = psd_sqrt(solve_discrete_lyapunov(sys.closed_loop(), sys.sigma()));
  const auto m = sys.b().cols();

  std::vector<double> xsq(options.trials * T, std::nan("")), zs(options.trials * T, std::nan(""));
  std::vector<unsigned char> diverged(options.trials, 0);
  parallel_for(options.trials, options.threads, [&](std::size_t trial) {
    Rng rng(derive_seed(options.seed, trial));
    auto gauss = [&](Eigen::Index k) {
      Eigen::VectorXd g(k);
      for (Eigen::Index i = 0; i < k; ++i) g(i) = rng.normal();
      return g;
    };
    Eigen::VectorXd x = x0_sqrt * gauss(n);
    for (std::size_t t = 0; t < T; ++t) {
      const double sq = x.squaredNorm();
      if (!std::isfinite(sq) || sq > 1e12) {
        diverged[trial] = 1;
        return;
      }
      const Law& law = laws[std::min(t >= nu ? t - nu : 0, laws.size() - 1)];
      const Eigen::VectorXd nominal = sys.closed_loop() * x;
      const Eigen::VectorXd shift = sys.b() * (law.gain * x);
      Eigen::VectorXd next = nominal + w_sqrt * gauss(n);
      if (t >= nu) next += shift + sys.b() * (law.v_sqrt * gauss(m));
      const Eigen::VectorXd d0 = next - nominal;
      const Eigen::VectorXd d1 = d0 - shift;
      const double z = 0.5 * (d0.dot(sys.sigma_inv() * d0) - d1.dot(law.s1_inv * d1) - law.log_det_ratio);
      xsq[trial * T + t] = sq;
      zs[trial * T + t] = z;
      x = next;
    }
  });

  LinearSimulation out;
  for (unsigned char d : diverged) out.diverged += d;
  for (std::size_t t = 0; t < T; ++t) {
    double s = 0.0, s2 = 0.0, sz = 0.0;
    std::size_t k = 0;
    for (std::size_t i = 0; i < options.trials; ++i) {
      const double v = xsq[i * T + t];
      if (std::isnan(v)) continue;
      s += v;
      s2 += v * v;
      sz += zs[i * T + t];
      ++k;
    }
    LinearStepStats st{t, std::nan(""), std::nan(""), std::nan(""), std::nan(""), k};
    if (k > 0) {
      const double kk = static_cast<double>(k);
      st.mean_x_sq = s / kk;
      st.mean_z = sz / kk;
      const double var = k > 1 ? std::max(0.0, (s2 - kk * st.mean_x_sq * st.mean_x_sq) / (kk - 1.0)) : 0.0;
      const double half = 2.5758293035489004 * std::sqrt(var / kk);
      st.ci_low = st.mean_x_sq - half;
      st.ci_high = st.mean_x_sq + half;
    }
    out.steps.push_back(st);
  }
  return out;
}

LinearStationary stationary_linear_stats(const LinearSystem& sys, const GaussianAttack& attack) {
  if (attack.gains.empty()) throw InvalidInput("attack has no gains");
  const Eigen::MatrixXd& theta = attack.gain(0);
  const Eigen::MatrixXd r = symmetrize(sys.b() * attack.covariance(0) * sys.b().transpose());
  const Eigen::MatrixXd la = sys.closed_loop() + sys.b() * theta;
  LinearStationary out;
  out.spectral_radius = spectral_radius(la);
  if (!(out.spectral_radius < 1.0))
    throw DomainError("attacked closed loop is unstable (spectral radius " + std::to_string(out.spectral_radius) +
                      ")");
  out.covariance = solve_discrete_lyapunov(la, sys.sigma() + r);
  const Eigen::MatrixXd bt = sys.b() * theta;
  const double mean_term = (bt.transpose() * sys.sigma_inv() * bt * out.covariance).trace();
  out.info_rate =
      0.5 * ((sys.sigma_inv() * r).trace() + mean_term - trace_log_identity_plus(sys.sigma(), r));
  out.info_rate = std::max(0.0, out.info_rate);
  out.mean_x_sq = out.covariance.trace();
  return out;
}

double stationary_info_rate_linear(const LinearSystem& sys, const GaussianAttack& attack) {
  return stationary_linear_stats(sys, attack).info_rate;
}

ValueComparison compare_values(const LinearSystem& sys, double beta, std::size_t horizon) {
  const RiccatiSolution sol = riccati_backward(sys, beta, horizon);
  const double T = static_cast<double>(horizon);
  ValueComparison out;
  out.j_deterministic = -beta * sol.offset_deterministic[0] / T;
  out.j_gaussian = -beta * sol.offset_gaussian[0] / T;
  for (std::size_t t = 0; t < horizon; ++t) {
    const Eigen::MatrixXd& p_next = sol.p_seq[t + 1];
    const Eigen::MatrixXd v = attack_cov(sys, beta, sol.f_seq[t], p_next);
    const Eigen::MatrixXd r = symmetrize(sys.b() * v * sys.b().transpose());
    out.log_det_term += 0.5 * trace_log_identity_plus(sys.sigma(), r);
    out.trace_term += beta * (sys.sigma() * p_next).trace();
  }
  out.log_det_term /= T;
  out.trace_term /= T;
  return out;
}

}  // namespace stealth
