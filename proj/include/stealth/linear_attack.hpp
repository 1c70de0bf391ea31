#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace stealth {

/// x_{t+1} = A x_t + B u_t + w_t with u_t = K x_t and w_t ~ N(0, Sigma).
class LinearSystem {
 public:
  LinearSystem(Eigen::MatrixXd a, Eigen::MatrixXd b, Eigen::MatrixXd k, Eigen::MatrixXd sigma);

  const Eigen::MatrixXd& a() const { return a_; }
  const Eigen::MatrixXd& b() const { return b_; }
  const Eigen::MatrixXd& k() const { return k_; }
  const Eigen::MatrixXd& sigma() const { return sigma_; }
  const Eigen::MatrixXd& closed_loop() const { return l_; }
  const Eigen::MatrixXd& b_pinv() const { return b_pinv_; }
  const Eigen::MatrixXd& sigma_inv() const { return sigma_inv_; }
  Eigen::Index dim() const { return a_.rows(); }

 private:
  Eigen::MatrixXd a_, b_, k_, sigma_, l_, b_pinv_, sigma_inv_;
};

/// Two-dimensional example with Sigma = I.
LinearSystem example_system();

double spectral_radius(const Eigen::MatrixXd& m);

/// Solves X = M X M^T + Q by a vectorized linear solve.
Eigen::MatrixXd solve_discrete_lyapunov(const Eigen::MatrixXd& m, const Eigen::MatrixXd& q);

struct RiccatiSolution {
  double beta = 0.0;
  /// P_0..P_T for a finite horizon, or the single fixed point.
  std::vector<Eigen::MatrixXd> p_seq;
  /// F_t = Sigma^{-1}/2 - beta P_{t+1}, one per step (t = 0..T-1).
  std::vector<Eigen::MatrixXd> f_seq;
  /// Offsets p_0..p_T (finite horizon only).
  std::vector<double> offset_deterministic;
  std::vector<double> offset_gaussian;
  bool stationary = false;
  std::size_t iterations = 0;
};

/// Backward recursion from P_T = I. Throws Infeasible naming the step where
/// F_t stops being positive definite.
RiccatiSolution riccati_backward(const LinearSystem& sys, double beta, std::size_t horizon);

/// Fixed point of the recursion (cap 1e5 iterations, divergence once
/// trace P exceeds 1e8). Throws Infeasible on divergence or loss of F > 0.
RiccatiSolution stationary_riccati(const LinearSystem& sys, double beta, double tol = 1e-10);

struct BetaFrontier {
  double beta0 = 0.0;
  double beta1 = 0.0;  // +inf when the gain condition never triggers
  double beta_star = 0.0;
};

BetaFrontier beta_star(const LinearSystem& sys, double tol = 1e-6);

enum class LinearAttackKind { gaussian, deterministic };

struct GaussianAttack {
  LinearAttackKind kind = LinearAttackKind::gaussian;
  std::vector<Eigen::MatrixXd> gains;        // Theta_t
  std::vector<Eigen::MatrixXd> covariances;  // V_t
  /// Step t uses index min(t, size-1).
  const Eigen::MatrixXd& gain(std::size_t t) const { return gains[std::min(t, gains.size() - 1)]; }
  const Eigen::MatrixXd& covariance(std::size_t t) const {
    return covariances[std::min(t, covariances.size() - 1)];
  }
};

GaussianAttack synthesize_attack(const RiccatiSolution& riccati, const LinearSystem& sys, LinearAttackKind kind);

/// No manipulation: zero gain and covariance.
GaussianAttack zero_attack(const LinearSystem& sys);

struct LinearStepStats {
  std::size_t t;
  double mean_x_sq;
  double mean_z;
  double ci_low;  // 99% interval for mean_x_sq
  double ci_high;
  std::size_t live_trials;
};

struct LinearSimulation {
  std::vector<LinearStepStats> steps;
  std::size_t diverged = 0;
};

struct LinearSimOptions {
  std::size_t horizon = 100;
  std::size_t change_time = 25;
  std::size_t trials = 100;
  std::uint64_t seed = 0;
  unsigned threads = 0;
};

/// Trials start from the unattacked stationary law; the attack acts from
/// change_time on, indexed from that step. A trial whose |x|^2 passes 1e12
/// is counted as diverged and dropped from later averages.
LinearSimulation simulate_linear(const LinearSystem& sys, const GaussianAttack& attack,
                                 const LinearSimOptions& options);

struct LinearStationary {
  double info_rate = 0.0;
  double mean_x_sq = 0.0;  // trace of the attacked stationary covariance
  double spectral_radius = 0.0;
  Eigen::MatrixXd covariance;
};

/// Closed-form stationary KL rate of a stationary attack. Throws DomainError
/// when L + B Theta is not Schur.
LinearStationary stationary_linear_stats(const LinearSystem& sys, const GaussianAttack& attack);
double stationary_info_rate_linear(const LinearSystem& sys, const GaussianAttack& attack);

struct ValueComparison {
  double j_deterministic = 0.0;
  double j_gaussian = 0.0;
  /// (1/T) sum_t 1/2 tr ln(I + Sigma^{-1} R_t)
  double log_det_term = 0.0;
  /// (1/T) sum_t beta tr(Sigma P_{t+1})
  double trace_term = 0.0;
};

/// Average per-step objectives from x_0 = 0, J = -beta p_0 / T.
ValueComparison compare_values(const LinearSystem& sys, double beta, std::size_t horizon);

/// tr ln(I + Sigma^{-1} R) through the eigenvalues of Sigma^{-1/2} R Sigma^{-1/2}.
double trace_log_identity_plus(const Eigen::MatrixXd& sigma, const Eigen::MatrixXd& r);

}  // namespace stealth
