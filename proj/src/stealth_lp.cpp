#include "stealth/stealth_lp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "stealth/errors.hpp"
#include "stealth/info_rate.hpp"

namespace stealth {

OccupancyMeasure::OccupancyMeasure(std::size_t n_states, std::size_t n_actions, Vector xi)
    : n_states_(n_states), n_actions_(n_actions), xi_(std::move(xi)) {
  if (xi_.size() != n_states_ * n_actions_ * n_actions_) throw InvalidInput("occupancy tensor has wrong size");
  for (double x : xi_)
    if (!(x >= 0.0) || !std::isfinite(x)) throw InvalidInput("occupancy entries must be finite and >= 0");
}

double OccupancyMeasure::total_mass() const {
  double acc = 0.0;
  for (double x : xi_) acc += x;
  return acc;
}

namespace {

// inflow[s][a] = pi(a|s) sum_{s',a',b'} P(s|s',b') xi(s',a',b')
Vector inflow(const TabularMdp& mdp, const Policy& pi, const Vector& xi) {
  const std::size_t S = mdp.n_states(), A = mdp.n_actions();
  Vector into_state(S, 0.0);
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a)
      for (std::size_t b = 0; b < A; ++b) {
        const double x = xi[(s * A + a) * A + b];
        if (x == 0.0) continue;
        const auto p = mdp.row(s, b);
        for (std::size_t j = 0; j < S; ++j) into_state[j] += x * p[j];
      }
  Vector out(S * A);
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a) out[s * A + a] = pi(s, a) * into_state[s];
  return out;
}

void check_policy(const TabularMdp& mdp, const Policy& pi) {
  if (pi.n_states() != mdp.n_states() || pi.n_actions() != mdp.n_actions())
    throw InvalidInput("policy shape does not match mdp");
}

struct FlowLayout {
  std::vector<std::size_t> vars;  // flat (s*A+a)*A+b per LP column
  std::vector<std::size_t> rows;  // pair s*A+a per flow row
};

FlowLayout layout(const TabularMdp& mdp, const Policy& pi) {
  const std::size_t S = mdp.n_states(), A = mdp.n_actions();
  const auto mask = admissible_mask(mdp, pi);
  FlowLayout l;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) l.vars.push_back(i);
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a)
      if (pi(s, a) > 0.0) l.rows.push_back(s * A + a);
  return l;
}

// Rows: sum_b xi(s,a,b) - gamma pi(a|s) sum P(s|s',b') xi(s',a',b').
Eigen::MatrixXd flow_matrix(const TabularMdp& mdp, const Policy& pi, const FlowLayout& l, double gamma) {
  const std::size_t S = mdp.n_states(), A = mdp.n_actions();
  std::vector<std::size_t> row_of(S * A, l.rows.size());
  for (std::size_t r = 0; r < l.rows.size(); ++r) row_of[l.rows[r]] = r;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(l.rows.size()),
                                            static_cast<Eigen::Index>(l.vars.size()));
  for (std::size_t k = 0; k < l.vars.size(); ++k) {
    const std::size_t flat = l.vars[k];
    const std::size_t b = flat % A, sa = flat / A, s = sa / A;
    const auto col = static_cast<Eigen::Index>(k);
    m(static_cast<Eigen::Index>(row_of[sa]), col) += 1.0;
    const auto p = mdp.row(s, b);
    for (std::size_t j = 0; j < S; ++j) {
      if (p[j] == 0.0) continue;
      for (std::size_t a2 = 0; a2 < A; ++a2) {
        const double w = pi(j, a2);
        if (w == 0.0) continue;
        m(static_cast<Eigen::Index>(row_of[j * A + a2]), col) -= gamma * w * p[j];
      }
    }
  }
  return m;
}

Vector kl_coefficients(const TabularMdp& mdp, const FlowLayout& l) {
  const std::size_t A = mdp.n_actions();
  Vector kl(l.vars.size());
  for (std::size_t k = 0; k < l.vars.size(); ++k) {
    const std::size_t flat = l.vars[k];
    const std::size_t b = flat % A, a = (flat / A) % A, s = flat / (A * A);
    kl[k] = b == a ? 0.0 : kl_divergence(mdp.row(s, b), mdp.row(s, a));
  }
  return kl;
}

OccupancyMeasure scatter(const TabularMdp& mdp, const FlowLayout& l, const Vector& x) {
  const std::size_t S = mdp.n_states(), A = mdp.n_actions();
  Vector xi(S * A * A, 0.0);
  for (std::size_t k = 0; k < l.vars.size(); ++k) xi[l.vars[k]] = std::max(0.0, x[k]);
  return OccupancyMeasure(S, A, std::move(xi));
}

Eigen::MatrixXd row_matrix(const Vector& coeffs) {
  Eigen::MatrixXd m(1, static_cast<Eigen::Index>(coeffs.size()));
  for (std::size_t k = 0; k < coeffs.size(); ++k) m(0, static_cast<Eigen::Index>(k)) = coeffs[k];
  return m;
}

}  // namespace

double OccupancyMeasure::discounted_flow_residual(const TabularMdp& mdp, const Policy& pi, double gamma,
                                                  std::span<const double> alpha) const {
  const std::size_t S = n_states_, A = n_actions_;
  const Vector in = inflow(mdp, pi, xi_);
  double worst = 0.0;
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a) {
      double out = 0.0;
      for (std::size_t b = 0; b < A; ++b) out += (*this)(s, a, b);
      const double src = (1.0 - gamma) * alpha[s] * pi(s, a);
      worst = std::max(worst, std::fabs(out - src - gamma * in[s * A + a]));
    }
  return worst;
}

double OccupancyMeasure::stationary_flow_residual(const TabularMdp& mdp, const Policy& pi) const {
  const std::size_t S = n_states_, A = n_actions_;
  const Vector in = inflow(mdp, pi, xi_);
  double worst = 0.0;
  for (std::size_t sa = 0; sa < S * A; ++sa) {
    double out = 0.0;
    for (std::size_t b = 0; b < A; ++b) out += xi_[sa * A + b];
    worst = std::max(worst, std::fabs(out - in[sa]));
  }
  return worst;
}

std::vector<unsigned char> admissible_mask(const TabularMdp& mdp, const Policy& pi) {
  check_policy(mdp, pi);
  const std::size_t S = mdp.n_states(), A = mdp.n_actions();
  std::vector<unsigned char> mask = continuity_mask(mdp);
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a)
      if (pi(s, a) == 0.0)
        for (std::size_t b = 0; b < A; ++b) mask[(s * A + a) * A + b] = 0;
  return mask;
}

AttackPolicy policy_from_occupancy(const OccupancyMeasure& xi) {
  const std::size_t S = xi.n_states(), A = xi.n_actions();
  Vector p(S * A * A, 0.0);
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a) {
      double mass = 0.0;
      for (std::size_t b = 0; b < A; ++b) mass += xi(s, a, b);
      double* row = p.data() + (s * A + a) * A;
      if (mass > 0.0) {
        for (std::size_t b = 0; b < A; ++b) row[b] = xi(s, a, b) / mass;
      } else {
        row[a] = 1.0;
      }
    }
  return AttackPolicy(S, A, std::move(p));
}

OccupancyMeasure occupancy_of(const TabularMdp& mdp, const Policy& pi, const AttackPolicy& phi, double gamma,
                              std::span<const double> alpha) {
  check_discount(gamma, "gamma");
  const std::size_t S = mdp.n_states(), A = mdp.n_actions();
  const Vector mu = chain_discounted(attacked_chain(mdp, pi, phi), gamma, alpha);
  Vector xi(S * A * A, 0.0);
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a)
      for (std::size_t b = 0; b < A; ++b) xi[(s * A + a) * A + b] = mu[s] * pi(s, a) * phi(s, a, b);
  return OccupancyMeasure(S, A, std::move(xi));
}

StealthyAttack optimal_stealthy_attack(const TabularMdp& mdp, const Policy& pi, double epsilon,
                                       double attack_discount, std::span<const double> alpha,
                                       std::span<const double> adversary_reward) {
  check_policy(mdp, pi);
  check_discount(attack_discount, "attack_discount");
  if (!(epsilon >= 0.0)) throw InvalidInput("epsilon must be >= 0");
  const std::size_t S = mdp.n_states(), A = mdp.n_actions();
  check_distribution(alpha, S, "alpha");
  if (adversary_reward.size() != S * A * A) throw InvalidInput("adversary reward tensor has wrong size");
  const double g = attack_discount;

  const FlowLayout l = layout(mdp, pi);
  LpProblem lp;
  lp.objective.resize(l.vars.size());
  for (std::size_t k = 0; k < l.vars.size(); ++k) lp.objective[k] = -adversary_reward[l.vars[k]] / (1.0 - g);
  lp.eq_matrix = flow_matrix(mdp, pi, l, g);
  lp.eq_rhs.resize(l.rows.size());
  for (std::size_t r = 0; r < l.rows.size(); ++r) {
    const std::size_t sa = l.rows[r];
    lp.eq_rhs[r] = (1.0 - g) * alpha[sa / A] * pi(sa / A, sa % A);
  }
  const Vector kl = kl_coefficients(mdp, l);
  if (!std::isinf(epsilon)) {
    lp.ub_matrix = row_matrix(kl);
    lp.ub_rhs = {epsilon};
  }

  LpSolution sol = solve_lp(lp);
  if (sol.status != LpStatus::optimal)
    throw Infeasible(std::string("stealthy attack LP ended with status ") + lp_status_name(sol.status));
  OccupancyMeasure occ = scatter(mdp, l, sol.variables);
  double used = 0.0;
  for (std::size_t k = 0; k < kl.size(); ++k) used += kl[k] * sol.variables[k];
  AttackPolicy phi = policy_from_occupancy(occ);
  const double value = -sol.objective;
  return {std::move(phi), std::move(occ), value, used, std::move(sol)};
}

MinRateResult min_info_rate(const TabularMdp& mdp, const Policy& pi, double rho, const RateMode& mode,
                            RewardModel model) {
  check_policy(mdp, pi);
  if (!std::isfinite(rho)) throw InvalidInput("rho must be finite");
  const std::size_t S = mdp.n_states(), A = mdp.n_actions();
  const FlowLayout l = layout(mdp, pi);
  const Vector kl = kl_coefficients(mdp, l);
  const Vector rv = victim_reward_tensor(mdp, model);

  LpProblem lp;
  lp.objective = kl;
  const bool ergodic = std::holds_alternative<ErgodicMode>(mode);
  if (ergodic) {
    const Eigen::MatrixXd flow = flow_matrix(mdp, pi, l, 1.0);
    lp.eq_matrix.resize(flow.rows() + 1, flow.cols());
    lp.eq_matrix.topRows(flow.rows()) = flow;
    lp.eq_matrix.row(flow.rows()).setOnes();
    lp.eq_rhs.assign(l.rows.size() + 1, 0.0);
    lp.eq_rhs.back() = 1.0;
  } else {
    const auto& d = std::get<DiscountedMode>(mode);
    check_discount(d.gamma, "gamma");
    Vector alpha = d.alpha.empty() ? Vector(S, 1.0 / static_cast<double>(S)) : d.alpha;
    check_distribution(alpha, S, "alpha");
    lp.eq_matrix = flow_matrix(mdp, pi, l, d.gamma);
    lp.eq_rhs.resize(l.rows.size());
    for (std::size_t r = 0; r < l.rows.size(); ++r) {
      const std::size_t sa = l.rows[r];
      lp.eq_rhs[r] = (1.0 - d.gamma) * alpha[sa / A] * pi(sa / A, sa % A);
    }
  }
  Vector reward_row(l.vars.size());
  for (std::size_t k = 0; k < l.vars.size(); ++k) reward_row[k] = rv[l.vars[k]];
  lp.ub_matrix = row_matrix(reward_row);
  lp.ub_rhs = {rho};

  LpSolution sol = solve_lp(lp);
  if (sol.status != LpStatus::optimal)
    throw Infeasible(std::string("minimum information rate LP ended with status ") + lp_status_name(sol.status));
  OccupancyMeasure occ = scatter(mdp, l, sol.variables);
  double reached = 0.0;
  for (std::size_t k = 0; k < reward_row.size(); ++k) reached += reward_row[k] * sol.variables[k];
  AttackPolicy phi = policy_from_occupancy(occ);
  const double rate = sol.objective;
  return {std::move(phi), std::move(occ), rate, reached, std::move(sol)};
}

}  // namespace stealth
