#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <vector>

namespace stealth {

using Vector = std::vector<double>;

/// Finite controlled Markov chain with expected rewards. Transition is
/// stored row-major as P[s][a][s'], reward as r[s][a].
class TabularMdp {
 public:
  TabularMdp(std::size_t n_states, std::size_t n_actions, Vector transition, Vector reward,
             double reward_bound, Vector initial_dist, double discount);

  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }

  std::span<const double> row(std::size_t s, std::size_t a) const {
    return {transition_.data() + (s * n_actions_ + a) * n_states_, n_states_};
  }
  double prob(std::size_t s, std::size_t a, std::size_t next) const {
    return transition_[(s * n_actions_ + a) * n_states_ + next];
  }
  double reward(std::size_t s, std::size_t a) const { return reward_[s * n_actions_ + a]; }

  const Vector& transition() const { return transition_; }
  const Vector& rewards() const { return reward_; }
  double reward_bound() const { return reward_bound_; }
  const Vector& initial_dist() const { return initial_dist_; }
  double discount() const { return discount_; }

 private:
  std::size_t n_states_;
  std::size_t n_actions_;
  Vector transition_;
  Vector reward_;
  double reward_bound_;
  Vector initial_dist_;
  double discount_;
};

/// Stationary randomized policy pi[s][a].
class Policy {
 public:
  Policy(std::size_t n_states, std::size_t n_actions, Vector probs);

  static Policy deterministic(std::size_t n_actions, std::span<const std::size_t> actions);
  static Policy uniform(std::size_t n_states, std::size_t n_actions);

  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }
  double operator()(std::size_t s, std::size_t a) const { return probs_[s * n_actions_ + a]; }
  std::span<const double> row(std::size_t s) const { return {probs_.data() + s * n_actions_, n_actions_}; }
  const Vector& probs() const { return probs_; }

  bool is_deterministic() const;
  /// Most likely action in s (lowest index on ties).
  std::size_t action(std::size_t s) const;

 private:
  std::size_t n_states_;
  std::size_t n_actions_;
  Vector probs_;
};

struct PlanningResult {
  Vector values;
  Policy policy;
  std::size_t iterations = 0;
};

/// Optimal values with Bellman residual <= tol and the greedy policy.
PlanningResult value_iteration(const TabularMdp& mdp, double gamma, double tol);

Vector policy_evaluation(const TabularMdp& mdp, const Policy& pi, double gamma);

/// Stationary distribution of the chain induced by pi. Chains with a single
/// closed class are accepted; transient states get zero mass.
Vector stationary_distribution(const TabularMdp& mdp, const Policy& pi);

/// (1-gamma) sum_t gamma^t alpha^T P_pi^t
Vector discounted_state_distribution(const TabularMdp& mdp, const Policy& pi, double gamma,
                                     std::span<const double> alpha);

double ergodic_reward(const TabularMdp& mdp, const Policy& pi);

double tv_distance(std::span<const double> p, std::span<const double> q);

/// 2 gamma R* / (1-gamma)^2 times the largest TV distance between two
/// action rows of the same state.
double regret_bound(const TabularMdp& mdp, double gamma);

// Chain-level helpers shared by the other modules.

Eigen::MatrixXd induced_chain(const TabularMdp& mdp, const Policy& pi);
Vector induced_reward(const TabularMdp& mdp, const Policy& pi);

/// Strongly connected components of the support graph of P that have no
/// outgoing edges.
std::vector<std::vector<std::size_t>> closed_classes(const Eigen::MatrixXd& chain);

Vector chain_stationary(const Eigen::MatrixXd& chain);
Vector chain_discounted(const Eigen::MatrixXd& chain, double gamma, std::span<const double> alpha);
/// Solves V = r + gamma P V.
Vector chain_evaluate(const Eigen::MatrixXd& chain, std::span<const double> reward, double gamma);

void check_distribution(std::span<const double> p, std::size_t expected_size, const char* what);
void check_discount(double gamma, const char* what);

}  // namespace stealth
