#include "stealth/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "stealth/errors.hpp"
#include "stealth/kernels.hpp"

namespace stealth {

namespace {

constexpr double kRowTol = 1e-9;

bool finite(double x) { return std::isfinite(x); }

}  // namespace

void check_distribution(std::span<const double> p, std::size_t expected_size, const char* what) {
  if (p.size() != expected_size)
    throw InvalidInput(std::string(what) + ": expected " + std::to_string(expected_size) + " entries, got " +
                       std::to_string(p.size()));
  double total = 0.0;
  for (double x : p) {
    if (!finite(x) || x < 0.0) throw InvalidInput(std::string(what) + ": entries must be finite and nonnegative");
    total += x;
  }
  if (std::fabs(total - 1.0) > kRowTol) throw InvalidInput(std::string(what) + ": does not sum to 1");
}

void check_discount(double gamma, const char* what) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidInput(std::string(what) + " must lie in (0,1)");
}

TabularMdp::TabularMdp(std::size_t n_states, std::size_t n_actions, Vector transition, Vector reward,
                       double reward_bound, Vector initial_dist, double discount)
    : n_states_(n_states),
      n_actions_(n_actions),
      transition_(std::move(transition)),
      reward_(std::move(reward)),
      reward_bound_(reward_bound),
      initial_dist_(std::move(initial_dist)),
      discount_(discount) {
  if (n_states_ == 0 || n_actions_ == 0) throw InvalidInput("mdp needs at least one state and one action");
  if (transition_.size() != n_states_ * n_actions_ * n_states_)
    throw InvalidInput("transition tensor has wrong size");
  if (reward_.size() != n_states_ * n_actions_) throw InvalidInput("reward matrix has wrong size");
  if (!finite(reward_bound_) || reward_bound_ < 0.0) throw InvalidInput("reward_bound must be finite and >= 0");
  check_discount(discount_, "discount");
  for (std::size_t s = 0; s < n_states_; ++s) {
    for (std::size_t a = 0; a < n_actions_; ++a) {
      double total = 0.0;
      for (double p : row(s, a)) {
        if (!finite(p) || p < 0.0) throw InvalidInput("transition probabilities must be finite and >= 0");
        total += p;
      }
      if (std::fabs(total - 1.0) > kRowTol)
        throw InvalidInput("transition row (" + std::to_string(s) + "," + std::to_string(a) + ") does not sum to 1");
      const double r = this->reward(s, a);
      if (!finite(r)) throw InvalidInput("rewards must be finite");
      if (std::fabs(r) > reward_bound_ * (1.0 + 1e-12) + 1e-300)
        throw InvalidInput("reward exceeds reward_bound at (" + std::to_string(s) + "," + std::to_string(a) + ")");
    }
  }
  check_distribution(initial_dist_, n_states_, "initial_dist");
}

Policy::Policy(std::size_t n_states, std::size_t n_actions, Vector probs)
    : n_states_(n_states), n_actions_(n_actions), probs_(std::move(probs)) {
  if (n_states_ == 0 || n_actions_ == 0) throw InvalidInput("policy needs states and actions");
  if (probs_.size() != n_states_ * n_actions_) throw InvalidInput("policy matrix has wrong size");
  for (std::size_t s = 0; s < n_states_; ++s) check_distribution(row(s), n_actions_, "policy row");
}

Policy Policy::deterministic(std::size_t n_actions, std::span<const std::size_t> actions) {
  Vector probs(actions.size() * n_actions, 0.0);
  for (std::size_t s = 0; s < actions.size(); ++s) {
    if (actions[s] >= n_actions) throw InvalidInput("action index out of range");
    probs[s * n_actions + actions[s]] = 1.0;
  }
  return Policy(actions.size(), n_actions, std::move(probs));
}

Policy Policy::uniform(std::size_t n_states, std::size_t n_actions) {
  return Policy(n_states, n_actions, Vector(n_states * n_actions, 1.0 / static_cast<double>(n_actions)));
}

bool Policy::is_deterministic() const {
  return std::all_of(probs_.begin(), probs_.end(), [](double p) { return p == 0.0 || p == 1.0; });
}

std::size_t Policy::action(std::size_t s) const {
  const auto r = row(s);
  return static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin());
}

namespace {

void check_policy(const TabularMdp& mdp, const Policy& pi) {
  if (pi.n_states() != mdp.n_states() || pi.n_actions() != mdp.n_actions())
    throw InvalidInput("policy shape does not match mdp");
}

}  // namespace

PlanningResult value_iteration(const TabularMdp& mdp, double gamma, double tol) {
  check_discount(gamma, "gamma");
  if (!(tol > 0.0)) throw InvalidInput("tol must be positive");
  const std::size_t S = mdp.n_states(), A = mdp.n_actions();
  Vector v(S, 0.0), next(S, 0.0);
  // enough sweeps to contract from the worst-case start to tol, with margin
  const double span0 = std::max(1.0, 2.0 * mdp.reward_bound() / (1.0 - gamma));
  const auto max_iter = static_cast<std::size_t>(
      10 + 2.0 * std::ceil(std::log(tol / span0) / std::log(gamma)));
  std::size_t it = 0;
  for (;; ++it) {
    if (it > max_iter) throw NumericalError("value iteration did not reach tolerance");
    for (std::size_t s = 0; s < S; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < A; ++a)
        best = std::max(best, mdp.reward(s, a) + gamma * kernels::dot(mdp.row(s, a), v));
      next[s] = best;
    }
    const double diff = kernels::max_abs_diff(next, v);
    v.swap(next);
    if (diff <= tol) break;
  }
  std::vector<std::size_t> greedy(S, 0);
  for (std::size_t s = 0; s < S; ++s) {
    Vector q(A);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < A; ++a) {
      q[a] = mdp.reward(s, a) + gamma * kernels::dot(mdp.row(s, a), v);
      best = std::max(best, q[a]);
    }
    const double slack = 1e-12 * std::max(1.0, std::fabs(best));
    for (std::size_t a = 0; a < A; ++a) {
      if (q[a] >= best - slack) {
        greedy[s] = a;
        break;
      }
    }
  }
  return {std::move(v), Policy::deterministic(A, greedy), it + 1};
}

Eigen::MatrixXd induced_chain(const TabularMdp& mdp, const Policy& pi) {
  check_policy(mdp, pi);
  const std::size_t S = mdp.n_states(), A = mdp.n_actions();
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(S), static_cast<Eigen::Index>(S));
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a) {
      const double w = pi(s, a);
      if (w == 0.0) continue;
      const auto r = mdp.row(s, a);
      for (std::size_t j = 0; j < S; ++j) P(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j)) += w * r[j];
    }
  return P;
}

Vector induced_reward(const TabularMdp& mdp, const Policy& pi) {
  check_policy(mdp, pi);
  Vector r(mdp.n_states(), 0.0);
  for (std::size_t s = 0; s < mdp.n_states(); ++s)
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) r[s] += pi(s, a) * mdp.reward(s, a);
  return r;
}

Vector chain_evaluate(const Eigen::MatrixXd& chain, std::span<const double> reward, double gamma) {
  const Eigen::Index n = chain.rows();
  if (static_cast<std::size_t>(n) != reward.size()) throw InvalidInput("reward size does not match chain");
  const Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n) - gamma * chain;
  const Eigen::Map<const Eigen::VectorXd> r(reward.data(), n);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(M);
  Eigen::VectorXd v = lu.solve(r);
  const double scale = 1.0 + v.cwiseAbs().maxCoeff();
  Eigen::VectorXd res = r - M * v;
  if (res.cwiseAbs().maxCoeff() > 1e-12 * scale) {
    v += lu.solve(res);
    res = r - M * v;
  }
  if (!v.allFinite() || res.cwiseAbs().maxCoeff() > 1e-9 * (1.0 + v.cwiseAbs().maxCoeff()))
    throw NumericalError("policy evaluation system is singular or ill-conditioned");
  return Vector(v.data(), v.data() + n);
}

Vector policy_evaluation(const TabularMdp& mdp, const Policy& pi, double gamma) {
  check_discount(gamma, "gamma");
  return chain_evaluate(induced_chain(mdp, pi), induced_reward(mdp, pi), gamma);
}

std::vector<std::vector<std::size_t>> closed_classes(const Eigen::MatrixXd& chain) {
  const std::size_t n = static_cast<std::size_t>(chain.rows());
  std::vector<std::vector<std::size_t>> adj(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (chain(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) > 0.0) adj[i].push_back(j);

  // iterative Tarjan
  constexpr std::size_t kUnvisited = static_cast<std::size_t>(-1);
  std::vector<std::size_t> index(n, kUnvisited), low(n, 0), comp(n, kUnvisited);
  std::vector<bool> on_stack(n, false);
  std::vector<std::size_t> stack;
  std::size_t counter = 0, n_comp = 0;
  struct Frame {
    std::size_t v;
    std::size_t edge;
  };
  for (std::size_t root = 0; root < n; ++root) {
    if (index[root] != kUnvisited) continue;
    std::vector<Frame> call{{root, 0}};
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = true;
    while (!call.empty()) {
      Frame& f = call.back();
      if (f.edge < adj[f.v].size()) {
        const std::size_t w = adj[f.v][f.edge++];
        if (index[w] == kUnvisited) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = true;
          call.push_back({w, 0});
        } else if (on_stack[w]) {
          low[f.v] = std::min(low[f.v], index[w]);
        }
        continue;
      }
      const std::size_t v = f.v;
      call.pop_back();
      if (!call.empty()) low[call.back().v] = std::min(low[call.back().v], low[v]);
      if (low[v] == index[v]) {
        std::size_t w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          comp[w] = n_comp;
        } while (w != v);
        ++n_comp;
      }
    }
  }
  std::vector<bool> leaves(n_comp, false);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j : adj[i])
      if (comp[i] != comp[j]) leaves[comp[i]] = true;
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> slot(n_comp, kUnvisited);
  for (std::size_t i = 0; i < n; ++i) {
    if (leaves[comp[i]]) continue;
    if (slot[comp[i]] == kUnvisited) {
      slot[comp[i]] = out.size();
      out.emplace_back();
    }
    out[slot[comp[i]]].push_back(i);
  }
  return out;
}

Vector chain_stationary(const Eigen::MatrixXd& chain) {
  const auto classes = closed_classes(chain);
  if (classes.size() != 1)
    throw StructureError("chain has " + std::to_string(classes.size()) +
                         " closed classes; the stationary distribution is not unique");
  const auto& cls = classes.front();
  const auto m = static_cast<Eigen::Index>(cls.size());
  Eigen::MatrixXd M(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      M(j, i) = (i == j ? 1.0 : 0.0) - chain(static_cast<Eigen::Index>(cls[static_cast<std::size_t>(i)]),
                                             static_cast<Eigen::Index>(cls[static_cast<std::size_t>(j)]));
  M.row(m - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
  rhs(m - 1) = 1.0;
  Eigen::VectorXd mu = M.fullPivLu().solve(rhs);
  if (!mu.allFinite()) throw NumericalError("stationary solve failed");
  for (Eigen::Index i = 0; i < m; ++i) mu(i) = std::max(0.0, mu(i));
  mu /= mu.sum();
  Vector out(static_cast<std::size_t>(chain.rows()), 0.0);
  for (Eigen::Index i = 0; i < m; ++i) out[cls[static_cast<std::size_t>(i)]] = mu(i);
  // verify mu^T P = mu^T on the full chain
  const Eigen::Map<const Eigen::VectorXd> full(out.data(), chain.rows());
  const double res = (chain.transpose() * full - full).cwiseAbs().maxCoeff();
  if (res > 1e-9) throw NumericalError("stationary distribution residual too large");
  return out;
}

Vector stationary_distribution(const TabularMdp& mdp, const Policy& pi) {
  return chain_stationary(induced_chain(mdp, pi));
}

Vector chain_discounted(const Eigen::MatrixXd& chain, double gamma, std::span<const double> alpha) {
  const Eigen::Index n = chain.rows();
  check_distribution(alpha, static_cast<std::size_t>(n), "alpha");
  const Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n) - gamma * chain.transpose();
  const Eigen::Map<const Eigen::VectorXd> a(alpha.data(), n);
  Eigen::VectorXd mu = M.partialPivLu().solve((1.0 - gamma) * a);
  if (!mu.allFinite()) throw NumericalError("discounted distribution solve failed");
  for (Eigen::Index i = 0; i < n; ++i) mu(i) = std::max(0.0, mu(i));
  mu /= mu.sum();
  return Vector(mu.data(), mu.data() + n);
}

Vector discounted_state_distribution(const TabularMdp& mdp, const Policy& pi, double gamma,
                                     std::span<const double> alpha) {
  check_discount(gamma, "gamma");
  return chain_discounted(induced_chain(mdp, pi), gamma, alpha);
}

double ergodic_reward(const TabularMdp& mdp, const Policy& pi) {
  const Vector mu = stationary_distribution(mdp, pi);
  const Vector r = induced_reward(mdp, pi);
  double h = 0.0;
  for (std::size_t s = 0; s < mu.size(); ++s) h += mu[s] * r[s];
  return h;
}

double tv_distance(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw InvalidInput("tv_distance: dimension mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += std::fabs(p[i] - q[i]);
  return 0.5 * acc;
}

double regret_bound(const TabularMdp& mdp, double gamma) {
  check_discount(gamma, "gamma");
  double worst = 0.0;
  for (std::size_t s = 0; s < mdp.n_states(); ++s)
    for (std::size_t a = 0; a < mdp.n_actions(); ++a)
      for (std::size_t b = a + 1; b < mdp.n_actions(); ++b)
        worst = std::max(worst, tv_distance(mdp.row(s, a), mdp.row(s, b)));
  return 2.0 * gamma * mdp.reward_bound() / ((1.0 - gamma) * (1.0 - gamma)) * worst;
}

}  // namespace stealth
