#pragma once

#include <cstddef>
#include <limits>
#include <span>

#include "stealth/attack.hpp"
#include "stealth/mdp.hpp"

namespace stealth {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// sum_i p_i ln(p_i / q_i), +inf when p is not absolutely continuous w.r.t. q.
double kl_divergence(std::span<const double> p, std::span<const double> q);

/// z[s][a][s'] = ln(P_phi(s'|s,a) / P(s'|s,a)). Zero where both kernels
/// vanish, -inf where only P_phi vanishes, +inf where only P vanishes.
class LlrTable {
 public:
  LlrTable(std::size_t n_states, std::size_t n_actions, Vector values)
      : n_states_(n_states), n_actions_(n_actions), values_(std::move(values)) {}

  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }
  double operator()(std::size_t s, std::size_t a, std::size_t next) const {
    return values_[(s * n_actions_ + a) * n_states_ + next];
  }
  std::span<const double> row(std::size_t s, std::size_t a) const {
    return {values_.data() + (s * n_actions_ + a) * n_states_, n_states_};
  }
  const Vector& values() const { return values_; }

 private:
  std::size_t n_states_;
  std::size_t n_actions_;
  Vector values_;
};

LlrTable log_likelihood_ratio(const TabularMdp& mdp, const AttackPolicy& phi);

/// E over the attacked stationary law of KL(P_phi(s,a), P(s,a)).
double information_rate(const TabularMdp& mdp, const Policy& pi, const AttackPolicy& phi);

/// E over the attacked stationary law of KL(P(s,b), P(s,a)).
double upper_information_rate(const TabularMdp& mdp, const Policy& pi, const AttackPolicy& phi);

struct DiscountedRate {
  double value = 0.0;  // alpha- and pi-weighted
  Vector per_pair;     // indexed s*A+a
};

DiscountedRate discounted_information_rate(const TabularMdp& mdp, const Policy& pi, const AttackPolicy& phi,
                                           double attack_discount, std::span<const double> alpha);

struct InfoRateReport {
  double rate = 0.0;
  double upper_rate = 0.0;
  double discounted_rate = 0.0;
  Vector per_pair;
};

InfoRateReport info_rate_report(const TabularMdp& mdp, const Policy& pi, const AttackPolicy& phi,
                                double attack_discount, std::span<const double> alpha);

/// Uniform ergodicity constants of a chain: sup_x TV(P^t(x,.), mu) <= L theta^t.
struct MixingBound {
  double l_const = 1.0;
  double theta = 0.5;
  double d_star = 0.0;
  double gamma0 = 0.0;
  /// 1 / (1 + (1 - theta) L)
  double gamma0_stated = 0.0;
  /// 1 / (1 + (1 - theta) / L), where the bound's denominator turns positive
  double gamma0_derived = 0.0;
};

MixingBound make_mixing_bound(double l_const, double theta, double d_star);

/// sup_x TV(P^t(x,.), mu) for t = 0..horizon.
Vector tv_decay(const Eigen::MatrixXd& chain, std::size_t horizon);

/// Geometric envelope L theta^t of the TV decay measured over t = 0..horizon
/// (points below 1e-12 ignored), with theta on a grid minimizing L / (1 - theta).
/// D* is the largest stage KL on the support of (pi, phi).
MixingBound fit_mixing_bound(const TabularMdp& mdp, const Policy& pi, const AttackPolicy& phi,
                             std::size_t horizon = 200);

/// (1-gamma) L D* / (gamma (1-theta) - (1-gamma) L); DomainError for gamma <= gamma0.
double info_rate_error_bound(const MixingBound& m, double gamma);

/// Largest pre-change drift E_P[z] and smallest post-change drift
/// E_{P_phi}[z] over all pairs.
struct DriftReport {
  double max_pre_change = 0.0;
  double min_post_change = 0.0;
};

DriftReport llr_drift(const TabularMdp& mdp, const AttackPolicy& phi);

}  // namespace stealth
