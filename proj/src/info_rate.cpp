#include "stealth/info_rate.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "stealth/errors.hpp"
#include "stealth/kernels.hpp"

namespace stealth {

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw InvalidInput("kl_divergence: dimension mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) return kInfinity;
    acc += p[i] * std::log(p[i] / q[i]);
  }
  // rounding can leave a tiny negative value for p ~ q
  return std::max(acc, 0.0);
}

LlrTable log_likelihood_ratio(const TabularMdp& mdp, const AttackPolicy& phi) {
  const std::size_t S = mdp.n_states(), A = mdp.n_actions();
  const Vector attacked = perturbed_kernel(mdp, phi);
  Vector z(S * A * S, 0.0);
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double pa = attacked[i];
    const double p = mdp.transition()[i];
    if (pa == 0.0 && p == 0.0) continue;
    if (pa == 0.0) {
      z[i] = -kInfinity;
    } else if (p == 0.0) {
      z[i] = kInfinity;
    } else {
      z[i] = std::log(pa / p);
    }
  }
  return LlrTable(S, A, std::move(z));
}

namespace {

void check_shapes(const TabularMdp& mdp, const Policy& pi, const AttackPolicy& phi) {
  if (pi.n_states() != mdp.n_states() || pi.n_actions() != mdp.n_actions())
    throw InvalidInput("policy shape does not match mdp");
  if (phi.n_states() != mdp.n_states() || phi.n_actions() != mdp.n_actions())
    throw InvalidInput("attack policy shape does not match mdp");
}

// (1/(1-gamma)) times the per-pair stage cost E_{b~phi} KL(P(s,b), P(s,a))
Vector upper_stage_cost(const TabularMdp& mdp, const AttackPolicy& phi) {
  const std::size_t S = mdp.n_states(), A = mdp.n_actions();
  Vector cost(S * A, 0.0);
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a) {
      double c = 0.0;
      for (std::size_t b = 0; b < A; ++b) {
        const double w = phi(s, a, b);
        if (w == 0.0 || b == a) continue;
        c += w * kl_divergence(mdp.row(s, b), mdp.row(s, a));
      }
      cost[s * A + a] = c;
    }
  return cost;
}

double weighted_pair_sum(const Vector& mu, const Policy& pi, const Vector& cost) {
  const std::size_t S = pi.n_states(), A = pi.n_actions();
  double acc = 0.0;
  for (std::size_t s = 0; s < S; ++s) {
    if (mu[s] == 0.0) continue;
    for (std::size_t a = 0; a < A; ++a) {
      const double w = mu[s] * pi(s, a);
      if (w == 0.0) continue;
      if (std::isinf(cost[s * A + a])) return kInfinity;
      acc += w * cost[s * A + a];
    }
  }
  return acc;
}

}  // namespace

double information_rate(const TabularMdp& mdp, const Policy& pi, const AttackPolicy& phi) {
  check_shapes(mdp, pi, phi);
  const std::size_t S = mdp.n_states(), A = mdp.n_actions();
  const Vector mu = chain_stationary(attacked_chain(mdp, pi, phi));
  const Vector attacked = perturbed_kernel(mdp, phi);
  Vector cost(S * A, 0.0);
  for (std::size_t sa = 0; sa < S * A; ++sa)
    cost[sa] = kl_divergence({attacked.data() + sa * S, S}, {mdp.transition().data() + sa * S, S});
  return weighted_pair_sum(mu, pi, cost);
}

double upper_information_rate(const TabularMdp& mdp, const Policy& pi, const AttackPolicy& phi) {
  check_shapes(mdp, pi, phi);
  const Vector mu = chain_stationary(attacked_chain(mdp, pi, phi));
  return weighted_pair_sum(mu, pi, upper_stage_cost(mdp, phi));
}

DiscountedRate discounted_information_rate(const TabularMdp& mdp, const Policy& pi, const AttackPolicy& phi,
                                           double attack_discount, std::span<const double> alpha) {
  check_shapes(mdp, pi, phi);
  check_discount(attack_discount, "attack_discount");
  const std::size_t S = mdp.n_states(), A = mdp.n_actions();
  check_distribution(alpha, S, "alpha");
  const double g = attack_discount;
  Vector cost = upper_stage_cost(mdp, phi);
  for (double& c : cost) c *= (1.0 - g);

  Vector state_cost(S, 0.0);
  std::vector<bool> infinite(S, false);
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a) {
      const double w = pi(s, a);
      if (w == 0.0) continue;
      if (std::isinf(cost[s * A + a])) {
        infinite[s] = true;
      } else {
        state_cost[s] += w * cost[s * A + a];
      }
    }
  const Eigen::MatrixXd chain = attacked_chain(mdp, pi, phi);
  // any state that can reach an infinite stage cost has infinite value
  bool grew = true;
  while (grew) {
    grew = false;
    for (std::size_t s = 0; s < S; ++s) {
      if (infinite[s]) continue;
      for (std::size_t j = 0; j < S; ++j)
        if (infinite[j] && chain(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j)) > 0.0) {
          infinite[s] = true;
          grew = true;
          break;
        }
    }
  }
  std::vector<std::size_t> finite_states;
  for (std::size_t s = 0; s < S; ++s)
    if (!infinite[s]) finite_states.push_back(s);
  Vector w(S, kInfinity);
  if (!finite_states.empty()) {
    const auto m = static_cast<Eigen::Index>(finite_states.size());
    Eigen::MatrixXd sub(m, m);
    Vector sub_cost(finite_states.size());
    for (Eigen::Index i = 0; i < m; ++i) {
      sub_cost[static_cast<std::size_t>(i)] = state_cost[finite_states[static_cast<std::size_t>(i)]];
      for (Eigen::Index j = 0; j < m; ++j)
        sub(i, j) = chain(static_cast<Eigen::Index>(finite_states[static_cast<std::size_t>(i)]),
                          static_cast<Eigen::Index>(finite_states[static_cast<std::size_t>(j)]));
    }
    const Vector sub_w = chain_evaluate(sub, sub_cost, g);
    for (std::size_t i = 0; i < finite_states.size(); ++i) w[finite_states[i]] = std::max(0.0, sub_w[i]);
  }

  const Vector kernel = perturbed_kernel(mdp, phi);
  DiscountedRate out;
  out.per_pair.assign(S * A, 0.0);
  for (std::size_t sa = 0; sa < S * A; ++sa) {
    if (std::isinf(cost[sa])) {
      out.per_pair[sa] = kInfinity;
      continue;
    }
    double next = 0.0;
    const double* row = kernel.data() + sa * S;
    for (std::size_t j = 0; j < S && !std::isinf(next); ++j)
      if (row[j] > 0.0) next = std::isinf(w[j]) ? kInfinity : next + row[j] * w[j];
    out.per_pair[sa] = cost[sa] + g * next;
  }
  double value = 0.0;
  for (std::size_t s = 0; s < S && !std::isinf(value); ++s) {
    if (alpha[s] == 0.0) continue;
    value = std::isinf(w[s]) ? kInfinity : value + alpha[s] * w[s];
  }
  out.value = value;
  return out;
}

InfoRateReport info_rate_report(const TabularMdp& mdp, const Policy& pi, const AttackPolicy& phi,
                                double attack_discount, std::span<const double> alpha) {
  InfoRateReport r;
  r.rate = information_rate(mdp, pi, phi);
  r.upper_rate = upper_information_rate(mdp, pi, phi);
  DiscountedRate d = discounted_information_rate(mdp, pi, phi, attack_discount, alpha);
  r.discounted_rate = d.value;
  r.per_pair = std::move(d.per_pair);
  return r;
}

MixingBound make_mixing_bound(double l_const, double theta, double d_star) {
  if (!(l_const > 0.0) || !std::isfinite(l_const)) throw InvalidInput("mixing constant L must be positive");
  if (!(theta > 0.0 && theta < 1.0)) throw InvalidInput("mixing rate theta must lie in (0,1)");
  if (!(d_star >= 0.0)) throw InvalidInput("D* must be >= 0");
  MixingBound m;
  m.l_const = l_const;
  m.theta = theta;
  m.d_star = d_star;
  m.gamma0_stated = 1.0 / (1.0 + (1.0 - theta) * l_const);
  m.gamma0_derived = 1.0 / (1.0 + (1.0 - theta) / l_const);
  m.gamma0 = std::max(m.gamma0_stated, m.gamma0_derived);
  return m;
}

Vector tv_decay(const Eigen::MatrixXd& chain, std::size_t horizon) {
  const Eigen::Index n = chain.rows();
  const Vector mu = chain_stationary(chain);
  Eigen::MatrixXd power = Eigen::MatrixXd::Identity(n, n);
  Vector out(horizon + 1, 0.0);
  for (std::size_t t = 0; t <= horizon; ++t) {
    double worst = 0.0;
    for (Eigen::Index x = 0; x < n; ++x) {
      double acc = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) acc += std::fabs(power(x, j) - mu[static_cast<std::size_t>(j)]);
      worst = std::max(worst, 0.5 * acc);
    }
    out[t] = worst;
    power = power * chain;
  }
  return out;
}

MixingBound fit_mixing_bound(const TabularMdp& mdp, const Policy& pi, const AttackPolicy& phi,
                             std::size_t horizon) {
  check_shapes(mdp, pi, phi);
  if (horizon < 2) throw InvalidInput("mixing fit needs a horizon of at least 2");
  const Vector d = tv_decay(attacked_chain(mdp, pi, phi), horizon);
  // Smallest L for a given theta so that L theta^t covers every measured point.
  const auto envelope = [&](double theta) {
    double l = 1.0;
    for (std::size_t t = 0; t <= horizon; ++t)
      if (d[t] >= 1e-12) l = std::max(l, d[t] / std::pow(theta, static_cast<double>(t)));
    return l;
  };
  // Over a theta grid, minimize L / (1 - theta), which sets both gamma0 and the bound's scale.
  constexpr int kGrid = 4000;
  double theta = 0.0, l_const = kInfinity, best = kInfinity;
  for (int i = 1; i < kGrid; ++i) {
    const double th = static_cast<double>(i) / kGrid;
    const double l = envelope(th);
    const double score = l / (1.0 - th);
    if (score < best) {
      best = score;
      theta = th;
      l_const = l;
    }
  }
  if (!std::isfinite(best)) throw DomainError("chain does not mix geometrically over the fitted horizon");

  const std::size_t S = mdp.n_states(), A = mdp.n_actions();
  double d_star = 0.0;
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a) {
      if (pi(s, a) == 0.0) continue;
      for (std::size_t b = 0; b < A; ++b)
        if (phi(s, a, b) > 0.0 && b != a) d_star = std::max(d_star, kl_divergence(mdp.row(s, b), mdp.row(s, a)));
    }
  if (std::isinf(d_star)) throw DomainError("stage KL is unbounded on the attack support");
  return make_mixing_bound(l_const, theta, d_star);
}

double info_rate_error_bound(const MixingBound& m, double gamma) {
  if (!(gamma > m.gamma0 && gamma < 1.0))
    throw DomainError("gamma " + std::to_string(gamma) + " must exceed gamma0 = " + std::to_string(m.gamma0));
  const double denom = gamma * (1.0 - m.theta) - (1.0 - gamma) * m.l_const;
  return (1.0 - gamma) * m.l_const * m.d_star / denom;
}

DriftReport llr_drift(const TabularMdp& mdp, const AttackPolicy& phi) {
  const std::size_t S = mdp.n_states(), A = mdp.n_actions();
  const LlrTable z = log_likelihood_ratio(mdp, phi);
  const Vector attacked = perturbed_kernel(mdp, phi);
  DriftReport r{-kInfinity, kInfinity};
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a) {
      const auto zr = z.row(s, a);
      const auto p = mdp.row(s, a);
      const std::span<const double> q{attacked.data() + (s * A + a) * S, S};
      double pre = 0.0, post = 0.0;
      for (std::size_t j = 0; j < S; ++j) {
        if (p[j] > 0.0) pre += p[j] * zr[j];
        if (q[j] > 0.0) post += q[j] * zr[j];
      }
      r.max_pre_change = std::max(r.max_pre_change, pre);
      r.min_post_change = std::min(r.min_post_change, post);
    }
  return r;
}

}  // namespace stealth
