#include "stealth/attack.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "stealth/errors.hpp"
#include "stealth/info_rate.hpp"
#include "stealth/kernels.hpp"

namespace stealth {

AttackPolicy::AttackPolicy(std::size_t n_states, std::size_t n_actions, Vector probs)
    : n_states_(n_states), n_actions_(n_actions), probs_(std::move(probs)) {
  if (n_states_ == 0 || n_actions_ == 0) throw InvalidInput("attack policy needs states and actions");
  if (probs_.size() != n_states_ * n_actions_ * n_actions_) throw InvalidInput("attack policy tensor has wrong size");
  for (std::size_t s = 0; s < n_states_; ++s)
    for (std::size_t a = 0; a < n_actions_; ++a) check_distribution(row(s, a), n_actions_, "attack policy row");
}

AttackPolicy AttackPolicy::identity(std::size_t n_states, std::size_t n_actions) {
  Vector p(n_states * n_actions * n_actions, 0.0);
  for (std::size_t s = 0; s < n_states; ++s)
    for (std::size_t a = 0; a < n_actions; ++a) p[(s * n_actions + a) * n_actions + a] = 1.0;
  return AttackPolicy(n_states, n_actions, std::move(p));
}

AttackPolicy AttackPolicy::deterministic(std::size_t n_states, std::size_t n_actions,
                                         std::span<const std::size_t> replacement) {
  if (replacement.size() != n_states * n_actions) throw InvalidInput("replacement table has wrong size");
  Vector p(n_states * n_actions * n_actions, 0.0);
  for (std::size_t i = 0; i < replacement.size(); ++i) {
    if (replacement[i] >= n_actions) throw InvalidInput("replacement action out of range");
    p[i * n_actions + replacement[i]] = 1.0;
  }
  return AttackPolicy(n_states, n_actions, std::move(p));
}

bool AttackPolicy::is_deterministic() const {
  return std::all_of(probs_.begin(), probs_.end(), [](double p) { return p == 0.0 || p == 1.0; });
}

bool AttackPolicy::is_identity() const {
  for (std::size_t s = 0; s < n_states_; ++s)
    for (std::size_t a = 0; a < n_actions_; ++a)
      if ((*this)(s, a, a) != 1.0) return false;
  return true;
}

std::size_t AttackPolicy::replacement(std::size_t s, std::size_t a) const {
  const auto r = row(s, a);
  return static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin());
}

Policy AttackPolicy::compose(const Policy& pi) const {
  if (pi.n_states() != n_states_ || pi.n_actions() != n_actions_)
    throw InvalidInput("policy shape does not match attack policy");
  Vector p(n_states_ * n_actions_, 0.0);
  for (std::size_t s = 0; s < n_states_; ++s)
    for (std::size_t a = 0; a < n_actions_; ++a) {
      const double w = pi(s, a);
      if (w == 0.0) continue;
      for (std::size_t b = 0; b < n_actions_; ++b) p[s * n_actions_ + b] += w * (*this)(s, a, b);
    }
  // absorb rounding so rows validate
  for (std::size_t s = 0; s < n_states_; ++s) {
    double total = 0.0;
    for (std::size_t b = 0; b < n_actions_; ++b) total += p[s * n_actions_ + b];
    for (std::size_t b = 0; b < n_actions_; ++b) p[s * n_actions_ + b] /= total;
  }
  return Policy(n_states_, n_actions_, std::move(p));
}

Vector victim_reward_tensor(const TabularMdp& mdp, RewardModel model) {
  const std::size_t S = mdp.n_states(), A = mdp.n_actions();
  Vector t(S * A * A);
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a)
      for (std::size_t b = 0; b < A; ++b)
        t[(s * A + a) * A + b] = model == RewardModel::intended ? mdp.reward(s, a) : mdp.reward(s, b);
  return t;
}

Vector adversary_reward_tensor(const TabularMdp& mdp, RewardModel model) {
  Vector t = victim_reward_tensor(mdp, model);
  for (double& x : t) x = -x;
  return t;
}

Vector action_distance_abs(std::size_t n_actions) {
  Vector d(n_actions * n_actions);
  for (std::size_t a = 0; a < n_actions; ++a)
    for (std::size_t b = 0; b < n_actions; ++b)
      d[a * n_actions + b] = std::fabs(static_cast<double>(a) - static_cast<double>(b));
  return d;
}

bool absolutely_continuous(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw InvalidInput("absolute continuity: dimension mismatch");
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0.0 && q[i] == 0.0) return false;
  return true;
}

std::vector<unsigned char> continuity_mask(const TabularMdp& mdp) {
  const std::size_t S = mdp.n_states(), A = mdp.n_actions();
  std::vector<unsigned char> m(S * A * A, 0);
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a)
      for (std::size_t b = 0; b < A; ++b)
        m[(s * A + a) * A + b] = absolutely_continuous(mdp.row(s, b), mdp.row(s, a)) ? 1 : 0;
  return m;
}

Vector resolved_adversary_reward(const TabularMdp& mdp, const AttackProblem& problem) {
  const std::size_t S = mdp.n_states(), A = mdp.n_actions();
  if (problem.adversary_reward.empty()) return adversary_reward_tensor(mdp, RewardModel::intended);
  if (problem.adversary_reward.size() != S * A * A) throw InvalidInput("adversary_reward tensor has wrong size");
  for (double x : problem.adversary_reward)
    if (!std::isfinite(x)) throw InvalidInput("adversary_reward must be finite");
  return problem.adversary_reward;
}

Vector resolved_distance(const TabularMdp& mdp, const AttackProblem& problem) {
  const std::size_t A = mdp.n_actions();
  if (problem.distance.empty()) return action_distance_abs(A);
  if (problem.distance.size() != A * A) throw InvalidInput("distance matrix has wrong size");
  for (std::size_t a = 0; a < A; ++a)
    for (std::size_t b = 0; b < A; ++b) {
      const double d = problem.distance[a * A + b];
      if (!(d >= 0.0) || (a == b && d != 0.0) || d != problem.distance[b * A + a])
        throw InvalidInput("distance must be symmetric, nonnegative, zero on the diagonal");
    }
  return problem.distance;
}

namespace {

void check_problem(const TabularMdp& mdp, const AttackProblem& problem) {
  if (problem.victim.n_states() != mdp.n_states() || problem.victim.n_actions() != mdp.n_actions())
    throw InvalidInput("victim policy shape does not match mdp");
  check_discount(problem.attack_discount, "attack_discount");
  if (!(problem.epsilon >= 0.0)) throw InvalidInput("epsilon must be >= 0");
  if (!(problem.penalty >= 0.0)) throw InvalidInput("penalty must be >= 0");
}

void check_attack(const TabularMdp& mdp, const Policy& pi, const AttackPolicy& phi) {
  if (pi.n_states() != mdp.n_states() || pi.n_actions() != mdp.n_actions())
    throw InvalidInput("policy shape does not match mdp");
  if (phi.n_states() != mdp.n_states() || phi.n_actions() != mdp.n_actions())
    throw InvalidInput("attack policy shape does not match mdp");
}

// Deterministic optimum of the adversary MDP with stage reward
// reward[(s*A+a)*A+b] over the actions allowed by feasible[]. Value
// iteration to a tight tolerance, then exact policy-iteration polish.
AttackPolicy solve_deterministic(const TabularMdp& mdp, const Policy& pi, const Vector& reward,
                                 const std::vector<unsigned char>& feasible, double gamma) {
  const std::size_t S = mdp.n_states(), A = mdp.n_actions();
  for (std::size_t sa = 0; sa < S * A; ++sa) {
    bool any = false;
    for (std::size_t b = 0; b < A; ++b) any = any || feasible[sa * A + b];
    if (!any) throw Infeasible("no admissible replacement for pair " + std::to_string(sa));
  }
  Vector v(S * A, 0.0), next(S * A, 0.0), w(S, 0.0), pw(S * A, 0.0);
  auto refresh = [&](const Vector& values) {
    for (std::size_t s = 0; s < S; ++s) w[s] = kernels::dot(pi.row(s), {values.data() + s * A, A});
    for (std::size_t s = 0; s < S; ++s)
      for (std::size_t b = 0; b < A; ++b) pw[s * A + b] = kernels::dot(mdp.row(s, b), w);
  };
  auto q = [&](std::size_t s, std::size_t a, std::size_t b) {
    return reward[(s * A + a) * A + b] + gamma * pw[s * A + b];
  };
  double scale = 1.0;
  for (std::size_t i = 0; i < reward.size(); ++i)
    if (feasible[i]) scale = std::max(scale, std::fabs(reward[i]));
  scale /= (1.0 - gamma);
  const double tol = 1e-11 * scale;
  const auto max_iter = static_cast<std::size_t>(20 + 2.0 * std::ceil(std::log(1e-11) / std::log(gamma)));
  for (std::size_t it = 0; it < max_iter; ++it) {
    refresh(v);
    for (std::size_t s = 0; s < S; ++s)
      for (std::size_t a = 0; a < A; ++a) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t b = 0; b < A; ++b)
          if (feasible[(s * A + a) * A + b]) best = std::max(best, q(s, a, b));
        next[s * A + a] = best;
      }
    const double diff = kernels::max_abs_diff(next, v);
    v.swap(next);
    if (diff <= tol) break;
  }

  // greedy choice prefers keeping the command, then the lowest index
  std::vector<std::size_t> choice(S * A, 0);
  auto greedy = [&](bool keep_current) {
    bool changed = false;
    refresh(v);
    for (std::size_t s = 0; s < S; ++s)
      for (std::size_t a = 0; a < A; ++a) {
        const std::size_t sa = s * A + a;
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t b = 0; b < A; ++b)
          if (feasible[sa * A + b]) best = std::max(best, q(s, a, b));
        const double slack = 1e-12 * std::max(1.0, std::fabs(best));
        std::size_t pick = A;
        if (keep_current && q(s, a, choice[sa]) >= best - slack) pick = choice[sa];
        if (pick == A && feasible[sa * A + a] && q(s, a, a) >= best - slack) pick = a;
        for (std::size_t b = 0; pick == A && b < A; ++b)
          if (feasible[sa * A + b] && q(s, a, b) >= best - slack) pick = b;
        if (!keep_current || pick != choice[sa]) changed = changed || pick != choice[sa];
        choice[sa] = pick;
      }
    return changed;
  };
  greedy(false);
  for (int round = 0; round < 100; ++round) {
    const AttackPolicy phi = AttackPolicy::deterministic(S, A, choice);
    v = attack_value(mdp, pi, phi, reward, gamma).per_pair;
    if (!greedy(true)) break;
  }
  return AttackPolicy::deterministic(S, A, choice);
}

}  // namespace

TabularMdp build_attack_mdp(const TabularMdp& mdp, const AttackProblem& problem) {
  check_problem(mdp, problem);
  const std::size_t S = mdp.n_states(), A = mdp.n_actions(), N = S * A;
  const Vector rbar = resolved_adversary_reward(mdp, problem);
  const Policy& pi = problem.victim;
  Vector transition(N * A * N, 0.0);
  double bound = 0.0;
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a)
      for (std::size_t b = 0; b < A; ++b) {
        double* row = transition.data() + ((s * A + a) * A + b) * N;
        const auto p = mdp.row(s, b);
        for (std::size_t s2 = 0; s2 < S; ++s2) {
          if (p[s2] == 0.0) continue;
          for (std::size_t a2 = 0; a2 < A; ++a2) row[s2 * A + a2] = pi(s2, a2) * p[s2];
        }
        bound = std::max(bound, std::fabs(rbar[(s * A + a) * A + b]));
      }
  Vector init(N, 0.0);
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a) init[s * A + a] = mdp.initial_dist()[s] * pi(s, a);
  return TabularMdp(N, A, std::move(transition), rbar, bound, std::move(init), problem.attack_discount);
}

Vector perturbed_kernel(const TabularMdp& mdp, const AttackPolicy& phi) {
  const std::size_t S = mdp.n_states(), A = mdp.n_actions();
  if (phi.n_states() != S || phi.n_actions() != A) throw InvalidInput("attack policy shape does not match mdp");
  Vector out(S * A * S, 0.0);
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a) {
      std::span<double> dst{out.data() + (s * A + a) * S, S};
      for (std::size_t b = 0; b < A; ++b) {
        const double w = phi(s, a, b);
        if (w == 0.0) continue;
        if (w == 1.0) {
          std::copy(mdp.row(s, b).begin(), mdp.row(s, b).end(), dst.begin());
        } else {
          kernels::axpy(w, mdp.row(s, b), dst);
        }
      }
    }
  return out;
}

Eigen::MatrixXd attacked_chain(const TabularMdp& mdp, const Policy& pi, const AttackPolicy& phi) {
  check_attack(mdp, pi, phi);
  const std::size_t S = mdp.n_states(), A = mdp.n_actions();
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(S), static_cast<Eigen::Index>(S));
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a) {
      const double wa = pi(s, a);
      if (wa == 0.0) continue;
      for (std::size_t b = 0; b < A; ++b) {
        const double w = wa * phi(s, a, b);
        if (w == 0.0) continue;
        const auto r = mdp.row(s, b);
        for (std::size_t j = 0; j < S; ++j) P(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j)) += w * r[j];
      }
    }
  return P;
}

AttackValue attack_value(const TabularMdp& mdp, const Policy& pi, const AttackPolicy& phi,
                         std::span<const double> adversary_reward, double attack_discount) {
  check_attack(mdp, pi, phi);
  check_discount(attack_discount, "attack_discount");
  const std::size_t S = mdp.n_states(), A = mdp.n_actions();
  if (adversary_reward.size() != S * A * A) throw InvalidInput("adversary reward tensor has wrong size");
  // expected one-step reward per pair and its pi-average per state
  Vector pair_reward(S * A, 0.0), state_reward(S, 0.0);
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a) {
      double r = 0.0;
      for (std::size_t b = 0; b < A; ++b) r += phi(s, a, b) * adversary_reward[(s * A + a) * A + b];
      pair_reward[s * A + a] = r;
      state_reward[s] += pi(s, a) * r;
    }
  const Eigen::MatrixXd chain = attacked_chain(mdp, pi, phi);
  Vector w = chain_evaluate(chain, state_reward, attack_discount);
  const Vector kernel = perturbed_kernel(mdp, phi);
  Vector v(S * A);
  for (std::size_t sa = 0; sa < S * A; ++sa)
    v[sa] = pair_reward[sa] + attack_discount * kernels::dot({kernel.data() + sa * S, S}, w);
  return {std::move(v), std::move(w)};
}

Vector victim_value(const TabularMdp& mdp, const Policy& pi, const AttackPolicy& phi, double gamma,
                    RewardModel model) {
  check_attack(mdp, pi, phi);
  const Vector rv = victim_reward_tensor(mdp, model);
  Vector neg = rv;
  for (double& x : neg) x = -x;
  AttackValue val = attack_value(mdp, pi, phi, neg, gamma);
  for (double& x : val.per_state) x = -x;
  return val.per_state;
}

AttackPolicy solve_constrained_attack(const TabularMdp& mdp, const AttackProblem& problem) {
  check_problem(mdp, problem);
  const std::size_t S = mdp.n_states(), A = mdp.n_actions();
  const Vector rbar = resolved_adversary_reward(mdp, problem);
  const Vector dist = resolved_distance(mdp, problem);
  std::vector<unsigned char> feasible = continuity_mask(mdp);
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a)
      for (std::size_t b = 0; b < A; ++b)
        if (dist[a * A + b] > problem.epsilon) feasible[(s * A + a) * A + b] = 0;
  return solve_deterministic(mdp, problem.victim, rbar, feasible, problem.attack_discount);
}

AttackPolicy solve_penalized_attack(const TabularMdp& mdp, const AttackProblem& problem) {
  check_problem(mdp, problem);
  const std::size_t S = mdp.n_states(), A = mdp.n_actions();
  Vector reward = resolved_adversary_reward(mdp, problem);
  std::vector<unsigned char> feasible = continuity_mask(mdp);
  const double weight = problem.penalty * (1.0 - problem.attack_discount);
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a)
      for (std::size_t b = 0; b < A; ++b) {
        const std::size_t i = (s * A + a) * A + b;
        if (!feasible[i]) continue;
        const double kl = kl_divergence(mdp.row(s, b), mdp.row(s, a));
        if (kl > 0.0) reward[i] -= weight * kl;
      }
  return solve_deterministic(mdp, problem.victim, reward, feasible, problem.attack_discount);
}

}  // namespace stealth
