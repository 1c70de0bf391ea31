#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "stealth/mdp.hpp"

namespace stealth {

/// Which action's reward the victim collects when its command a is
/// replaced by b: the commanded one, r(s,a), or the executed one, r(s,b).
enum class RewardModel { intended, executed };

/// Replacement law phi[s][a][b]: probability that command a issued in
/// state s reaches the plant as b.
class AttackPolicy {
 public:
  AttackPolicy(std::size_t n_states, std::size_t n_actions, Vector probs);

  static AttackPolicy identity(std::size_t n_states, std::size_t n_actions);
  /// replacement[s * A + a] is the executed action for command a in s.
  static AttackPolicy deterministic(std::size_t n_states, std::size_t n_actions,
                                    std::span<const std::size_t> replacement);

  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }
  double operator()(std::size_t s, std::size_t a, std::size_t b) const {
    return probs_[(s * n_actions_ + a) * n_actions_ + b];
  }
  std::span<const double> row(std::size_t s, std::size_t a) const {
    return {probs_.data() + (s * n_actions_ + a) * n_actions_, n_actions_};
  }
  const Vector& probs() const { return probs_; }

  bool is_deterministic() const;
  bool is_identity() const;
  std::size_t replacement(std::size_t s, std::size_t a) const;

  /// Overall executed-action policy (phi o pi)(b|s).
  Policy compose(const Policy& pi) const;

 private:
  std::size_t n_states_;
  std::size_t n_actions_;
  Vector probs_;
};

struct AttackProblem {
  Policy victim;
  /// r_bar[s][a][b]; empty means -r(s,a).
  Vector adversary_reward;
  double attack_discount = 0.95;
  double epsilon = std::numeric_limits<double>::infinity();
  /// d[a][b]; empty means |a - b|.
  Vector distance;
  double penalty = 0.0;
};

/// r_v[s][a][b] collected by the victim under the given reward model.
Vector victim_reward_tensor(const TabularMdp& mdp, RewardModel model);
/// Zero-sum adversary reward, the negated victim tensor.
Vector adversary_reward_tensor(const TabularMdp& mdp, RewardModel model);

Vector action_distance_abs(std::size_t n_actions);

/// support(p) is contained in support(q)
bool absolutely_continuous(std::span<const double> p, std::span<const double> q);

/// mask[s][a][b] = 1 when P(s,b) << P(s,a).
std::vector<unsigned char> continuity_mask(const TabularMdp& mdp);

/// Adversary MDP over pairs (s,a) indexed s*A+a, with kernel
/// pi(a'|s') P(s'|s,b) and reward r_bar. Dense, so size grows as (S*A)^2 * A.
TabularMdp build_attack_mdp(const TabularMdp& mdp, const AttackProblem& problem);

/// P_phi[s][a][s'] = sum_b phi(b|s,a) P(s'|s,b)
Vector perturbed_kernel(const TabularMdp& mdp, const AttackPolicy& phi);

/// Kernel of the attacked state chain, sum_a pi(a|s) P_phi(s'|s,a).
Eigen::MatrixXd attacked_chain(const TabularMdp& mdp, const Policy& pi, const AttackPolicy& phi);

struct AttackValue {
  Vector per_pair;   // V_bar(s,a)
  Vector per_state;  // sum_a pi(a|s) V_bar(s,a)
};

/// Exact discounted adversary value of phi for reward tensor r_bar.
AttackValue attack_value(const TabularMdp& mdp, const Policy& pi, const AttackPolicy& phi,
                         std::span<const double> adversary_reward, double attack_discount);

/// Discounted victim value V^{phi o pi}(s) under the reward model.
Vector victim_value(const TabularMdp& mdp, const Policy& pi, const AttackPolicy& phi, double gamma,
                    RewardModel model);

/// Deterministic optimum of the adversary MDP over actions within distance
/// epsilon that keep absolute continuity.
AttackPolicy solve_constrained_attack(const TabularMdp& mdp, const AttackProblem& problem);

/// Deterministic optimum for r_bar - penalty * (1 - gamma_bar) * KL(P(s,b), P(s,a)).
AttackPolicy solve_penalized_attack(const TabularMdp& mdp, const AttackProblem& problem);

// Resolved inputs (defaults filled in, shapes checked).
Vector resolved_adversary_reward(const TabularMdp& mdp, const AttackProblem& problem);
Vector resolved_distance(const TabularMdp& mdp, const AttackProblem& problem);

}  // namespace stealth
