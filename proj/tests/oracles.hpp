#pragma once
// Test-side reference computations. Deliberately naive and independent of
// the library's solvers.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "stealth/attack.hpp"
#include "stealth/mdp.hpp"

namespace oracle {

using stealth::AttackPolicy;
using stealth::Policy;
using stealth::TabularMdp;
using stealth::Vector;

inline Vector random_simplex(std::mt19937_64& g, std::size_t n, double zero_prob = 0.0) {
  std::exponential_distribution<double> e(1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vector p(n);
  double total = 0.0;
  for (auto& x : p) {
    x = u(g) < zero_prob ? 0.0 : e(g);
    total += x;
  }
  if (total == 0.0) {
    p[std::uniform_int_distribution<std::size_t>(0, n - 1)(g)] = 1.0;
    return p;
  }
  for (auto& x : p) x /= total;
  return p;
}

/// Dense random MDP; every row has full support unless zero_prob > 0.
inline TabularMdp random_mdp(std::mt19937_64& g, std::size_t S, std::size_t A, double zero_prob = 0.0,
                             double gamma = 0.9) {
  Vector P, r(S * A);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t i = 0; i < S * A; ++i) {
    auto row = random_simplex(g, S, zero_prob);
    P.insert(P.end(), row.begin(), row.end());
    r[i] = u(g);
  }
  double bound = 0.0;
  for (double x : r) bound = std::max(bound, std::fabs(x));
  return TabularMdp(S, A, P, r, bound, Vector(S, 1.0 / static_cast<double>(S)), gamma);
}

inline Policy random_policy(std::mt19937_64& g, std::size_t S, std::size_t A) {
  Vector p;
  for (std::size_t s = 0; s < S; ++s) {
    auto row = random_simplex(g, A);
    p.insert(p.end(), row.begin(), row.end());
  }
  return Policy(S, A, p);
}

inline AttackPolicy random_attack(std::mt19937_64& g, std::size_t S, std::size_t A, double zero_prob = 0.0) {
  Vector p;
  for (std::size_t i = 0; i < S * A; ++i) {
    auto row = random_simplex(g, A, zero_prob);
    p.insert(p.end(), row.begin(), row.end());
  }
  return AttackPolicy(S, A, p);
}

/// Kernel and reward seen by the state chain, built by explicit loops.
inline Eigen::MatrixXd chain_of(const TabularMdp& m, const Policy& pi, const AttackPolicy* phi = nullptr) {
  const std::size_t S = m.n_states(), A = m.n_actions();
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(S, S);
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a)
      for (std::size_t b = 0; b < A; ++b) {
        const double w = pi(s, a) * (phi ? (*phi)(s, a, b) : (a == b ? 1.0 : 0.0));
        if (w == 0.0) continue;
        for (std::size_t j = 0; j < S; ++j) P(s, j) += w * m.prob(s, b, j);
      }
  return P;
}

/// V = (I - gamma P)^{-1} r via a full-pivot solve.
inline Vector evaluate(const Eigen::MatrixXd& P, const Vector& r, double gamma) {
  const auto n = P.rows();
  Eigen::VectorXd rr = Eigen::Map<const Eigen::VectorXd>(r.data(), n);
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n) - gamma * P;
  Eigen::VectorXd v = M.fullPivLu().solve(rr);
  return Vector(v.data(), v.data() + n);
}

inline Vector policy_value(const TabularMdp& m, const Policy& pi, double gamma) {
  Vector r(m.n_states(), 0.0);
  for (std::size_t s = 0; s < m.n_states(); ++s)
    for (std::size_t a = 0; a < m.n_actions(); ++a) r[s] += pi(s, a) * m.reward(s, a);
  return evaluate(chain_of(m, pi), r, gamma);
}

/// Enumerates all A^S deterministic policies.
inline void for_each_deterministic(std::size_t S, std::size_t A, const std::function<void(const std::vector<std::size_t>&)>& f) {
  std::vector<std::size_t> choice(S, 0);
  while (true) {
    f(choice);
    std::size_t i = 0;
    while (i < S && ++choice[i] == A) choice[i++] = 0;
    if (i == S) return;
  }
}

/// Howard policy iteration with exact evaluation.
inline Vector policy_iteration_values(const TabularMdp& m, double gamma) {
  const std::size_t S = m.n_states(), A = m.n_actions();
  std::vector<std::size_t> act(S, 0);
  Vector v;
  for (int it = 0; it < 1000; ++it) {
    v = policy_value(m, Policy::deterministic(A, act), gamma);
    bool changed = false;
    for (std::size_t s = 0; s < S; ++s) {
      double best = -1e300;
      std::size_t arg = act[s];
      for (std::size_t a = 0; a < A; ++a) {
        double q = m.reward(s, a);
        for (std::size_t j = 0; j < S; ++j) q += gamma * m.prob(s, a, j) * v[j];
        if (q > best + 1e-12) {
          best = q;
          arg = a;
        }
      }
      double cur = m.reward(s, act[s]);
      for (std::size_t j = 0; j < S; ++j) cur += gamma * m.prob(s, act[s], j) * v[j];
      if (arg != act[s] && best > cur + 1e-12) {
        act[s] = arg;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return v;
}

/// Stationary law by repeated squaring of P.
inline Vector power_stationary(const Eigen::MatrixXd& P) {
  Eigen::MatrixXd M = P;
  for (int i = 0; i < 20; ++i) {
    M = M * M;
    M = M.array().colwise() / M.rowwise().sum().array();
  }
  Eigen::VectorXd row = M.colwise().mean();
  return Vector(row.data(), row.data() + row.size());
}

inline double kl(const Vector& p, const Vector& q) {
  double out = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) return INFINITY;
    out += p[i] * std::log(p[i] / q[i]);
  }
  return out;
}

inline Vector row(const TabularMdp& m, std::size_t s, std::size_t a) {
  auto r = m.row(s, a);
  return Vector(r.begin(), r.end());
}

}  // namespace oracle
