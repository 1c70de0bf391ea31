#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <string>

#include "stealth/mdp.hpp"

namespace stealth {

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };

const char* lp_status_name(LpStatus status);

/// minimize c^T x  s.t.  A_eq x = b_eq,  A_ub x <= b_ub,  x >= 0 (or free
/// when nonneg is false). Empty matrices mean no constraints of that kind.
struct LpProblem {
  Vector objective;
  Eigen::MatrixXd eq_matrix;
  Vector eq_rhs;
  Eigen::MatrixXd ub_matrix;
  Vector ub_rhs;
  bool nonneg = true;
};

struct LpSolution {
  LpStatus status = LpStatus::infeasible;
  Vector variables;
  double objective = 0.0;
  /// |c^T x - b^T y| / (1 + |c^T x|) for the refined primal/dual pair
  double dual_gap = 0.0;
  /// largest reduced-cost violation of the dual, relative to max|c|
  double dual_infeasibility = 0.0;
  /// largest constraint violation of the returned point
  double primal_residual = 0.0;
  std::size_t iterations = 0;
  std::size_t redundant_rows = 0;
};

/// Dense two-phase primal simplex. Dantzig pricing, switching to Bland's
/// rule after a run of degenerate pivots; the final basis is re-solved with
/// an LU factorization to produce the primal point and the duals.
LpSolution solve_lp(const LpProblem& problem);

}  // namespace stealth
