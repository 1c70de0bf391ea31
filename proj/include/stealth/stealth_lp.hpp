#pragma once

#include <cstddef>
#include <span>
#include <variant>

#include "stealth/attack.hpp"
#include "stealth/lp.hpp"
#include "stealth/mdp.hpp"

namespace stealth {

/// xi[s][a][b] = mu(s) pi(a|s) phi(b|s,a).
class OccupancyMeasure {
 public:
  OccupancyMeasure(std::size_t n_states, std::size_t n_actions, Vector xi);

  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }
  double operator()(std::size_t s, std::size_t a, std::size_t b) const {
    return xi_[(s * n_actions_ + a) * n_actions_ + b];
  }
  const Vector& values() const { return xi_; }
  double total_mass() const;
  /// Largest violation of the discounted flow equations with source
  /// (1-gamma) alpha(s) pi(a|s).
  double discounted_flow_residual(const TabularMdp& mdp, const Policy& pi, double gamma,
                                  std::span<const double> alpha) const;
  /// Largest violation of the stationary flow equations.
  double stationary_flow_residual(const TabularMdp& mdp, const Policy& pi) const;

 private:
  std::size_t n_states_;
  std::size_t n_actions_;
  Vector xi_;
};

/// Normalized rows; rows without mass map to the identity.
AttackPolicy policy_from_occupancy(const OccupancyMeasure& xi);

/// Discounted occupancy of (pi, phi) started from alpha.
OccupancyMeasure occupancy_of(const TabularMdp& mdp, const Policy& pi, const AttackPolicy& phi, double gamma,
                              std::span<const double> alpha);

/// Entries (s,a,b) allowed to carry mass: pi(a|s) > 0 and P(s,b) << P(s,a).
std::vector<unsigned char> admissible_mask(const TabularMdp& mdp, const Policy& pi);

struct StealthyAttack {
  AttackPolicy policy;
  OccupancyMeasure occupancy;
  double value = 0.0;  // adversary discounted value, alpha-weighted
  double kl_budget_used = 0.0;
  LpSolution lp;
};

/// Best randomized attack whose discounted upper information rate from
/// alpha stays within epsilon. The reward tensor is r_bar[s][a][b].
StealthyAttack optimal_stealthy_attack(const TabularMdp& mdp, const Policy& pi, double epsilon,
                                       double attack_discount, std::span<const double> alpha,
                                       std::span<const double> adversary_reward);

struct ErgodicMode {};
struct DiscountedMode {
  double gamma = 0.95;
  Vector alpha;  // empty means uniform
};
using RateMode = std::variant<ErgodicMode, DiscountedMode>;

struct MinRateResult {
  AttackPolicy policy;
  OccupancyMeasure occupancy;
  /// Optimal LP objective: the stationary (or discounted) upper information rate.
  double rate = 0.0;
  /// Per-step victim reward reached, sum xi r_v.
  double victim_reward = 0.0;
  LpSolution lp;
};

/// Least detectable attack holding the victim's per-step reward (ergodic,
/// or (1-gamma)-normalized discounted) at or below rho. Throws Infeasible
/// carrying the LP status when no attack reaches rho.
MinRateResult min_info_rate(const TabularMdp& mdp, const Policy& pi, double rho, const RateMode& mode,
                            RewardModel model = RewardModel::intended);

}  // namespace stealth
