#include "stealth/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "stealth/errors.hpp"
#include "stealth/kernels.hpp"

namespace stealth {

const char* lp_status_name(LpStatus status) {
  switch (status) {
    case LpStatus::optimal: return "optimal";
    case LpStatus::infeasible: return "infeasible";
    case LpStatus::unbounded: return "unbounded";
    case LpStatus::iteration_limit: return "iteration_limit";
  }
  return "unknown";
}

namespace {

constexpr double kPivotTol = 1e-9;
constexpr std::size_t kDegenerateRun = 50;

class Tableau {
 public:
  Tableau(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), width_(cols + 1), data_(rows * width_, 0.0) {}

  double* row(std::size_t i) { return data_.data() + i * width_; }
  const double* row(std::size_t i) const { return data_.data() + i * width_; }
  double& at(std::size_t i, std::size_t j) { return data_[i * width_ + j]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * width_ + j]; }
  double& rhs(std::size_t i) { return data_[i * width_ + cols_]; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t width() const { return width_; }

  void erase_row(std::size_t i) {
    data_.erase(data_.begin() + static_cast<std::ptrdiff_t>(i * width_),
                data_.begin() + static_cast<std::ptrdiff_t>((i + 1) * width_));
    --rows_;
  }

 private:
  std::size_t rows_, cols_, width_;
  std::vector<double> data_;
};

struct Simplex {
  Tableau t;
  Vector cost;  // reduced costs, last entry is -objective
  std::vector<std::size_t> basis;
  std::vector<std::size_t> rows_of_origin;  // standard-form row index per tableau row
  std::vector<bool> allowed;
  std::size_t iterations = 0;
  std::size_t limit = 0;

  void pivot(std::size_t r, std::size_t c) {
    const std::size_t w = t.width();
    double* pr = t.row(r);
    const double inv = 1.0 / pr[c];
    for (std::size_t j = 0; j < w; ++j) pr[j] *= inv;
    pr[c] = 1.0;
    const std::span<const double> pivot_row{pr, w};
    for (std::size_t i = 0; i < t.rows(); ++i) {
      if (i == r) continue;
      double* ri = t.row(i);
      const double f = ri[c];
      if (f == 0.0) continue;
      kernels::axpy(-f, pivot_row, {ri, w});
      ri[c] = 0.0;
    }
    const double f = cost[c];
    if (f != 0.0) {
      kernels::axpy(-f, pivot_row, cost);
      cost[c] = 0.0;
    }
    basis[r] = c;
    ++iterations;
  }

  // Returns optimal, unbounded or iteration_limit.
  LpStatus run(double tol) {
    bool bland = false;
    std::size_t degenerate = 0;
    while (true) {
      if (iterations >= limit) return LpStatus::iteration_limit;
      std::size_t enter = t.cols();
      double best = -tol;
      for (std::size_t j = 0; j < t.cols(); ++j) {
        if (!allowed[j] || cost[j] >= -tol) continue;
        if (bland) {
          enter = j;
          break;
        }
        if (cost[j] < best) {
          best = cost[j];
          enter = j;
        }
      }
      if (enter == t.cols()) return LpStatus::optimal;
      std::size_t leave = t.rows();
      double ratio = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < t.rows(); ++i) {
        const double a = t.at(i, enter);
        if (a <= kPivotTol) continue;
        const double q = std::max(0.0, t.rhs(i)) / a;
        const bool better = q < ratio - 1e-12 ||
                            (q <= ratio + 1e-12 && leave < t.rows() &&
                             (bland ? basis[i] < basis[leave] : a > t.at(leave, enter)));
        if (leave == t.rows() || better) {
          ratio = q;
          leave = i;
        }
      }
      if (leave == t.rows()) return LpStatus::unbounded;
      if (ratio <= 1e-12) {
        if (++degenerate >= kDegenerateRun) bland = true;
      } else {
        degenerate = 0;
      }
      pivot(leave, enter);
    }
  }
};

}  // namespace

LpSolution solve_lp(const LpProblem& problem) {
  const std::size_t n = problem.objective.size();
  if (n == 0) throw InvalidInput("linear program has no variables");
  const auto m_eq = static_cast<std::size_t>(problem.eq_matrix.rows());
  const auto m_ub = static_cast<std::size_t>(problem.ub_matrix.rows());
  if (m_eq > 0 && static_cast<std::size_t>(problem.eq_matrix.cols()) != n)
    throw InvalidInput("equality matrix has wrong column count");
  if (m_ub > 0 && static_cast<std::size_t>(problem.ub_matrix.cols()) != n)
    throw InvalidInput("inequality matrix has wrong column count");
  if (problem.eq_rhs.size() != m_eq || problem.ub_rhs.size() != m_ub)
    throw InvalidInput("constraint right-hand side has wrong size");
  for (double c : problem.objective)
    if (!std::isfinite(c)) throw InvalidInput("objective must be finite");
  if (!problem.eq_matrix.allFinite() || !problem.ub_matrix.allFinite())
    throw InvalidInput("constraint matrices must be finite");

  // standard form: columns are [x (or x+, x-) | slacks], rows are eq then ub
  const std::size_t nx = problem.nonneg ? n : 2 * n;
  const std::size_t ns = nx + m_ub;
  const std::size_t m = m_eq + m_ub;
  Eigen::MatrixXd a_std = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(ns));
  Eigen::VectorXd b_std(static_cast<Eigen::Index>(m));
  Vector c_std(ns, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    c_std[j] = problem.objective[j];
    if (!problem.nonneg) c_std[n + j] = -problem.objective[j];
  }
  auto fill = [&](std::size_t r, const Eigen::MatrixXd& src, std::size_t sr, double b) {
    const auto ri = static_cast<Eigen::Index>(r);
    for (std::size_t j = 0; j < n; ++j) {
      const double v = src(static_cast<Eigen::Index>(sr), static_cast<Eigen::Index>(j));
      a_std(ri, static_cast<Eigen::Index>(j)) = v;
      if (!problem.nonneg) a_std(ri, static_cast<Eigen::Index>(n + j)) = -v;
    }
    b_std(ri) = b;
  };
  for (std::size_t i = 0; i < m_eq; ++i) fill(i, problem.eq_matrix, i, problem.eq_rhs[i]);
  for (std::size_t i = 0; i < m_ub; ++i) {
    fill(m_eq + i, problem.ub_matrix, i, problem.ub_rhs[i]);
    a_std(static_cast<Eigen::Index>(m_eq + i), static_cast<Eigen::Index>(nx + i)) = 1.0;
  }
  for (std::size_t i = 0; i < m; ++i)
    if (b_std(static_cast<Eigen::Index>(i)) < 0.0) {
      a_std.row(static_cast<Eigen::Index>(i)) *= -1.0;
      b_std(static_cast<Eigen::Index>(i)) *= -1.0;
    }

  // slack columns with +1 start in the basis, everything else gets an artificial
  std::vector<std::size_t> initial(m, ns);
  for (std::size_t i = 0; i < m_ub; ++i)
    if (a_std(static_cast<Eigen::Index>(m_eq + i), static_cast<Eigen::Index>(nx + i)) > 0.0) initial[m_eq + i] = nx + i;
  std::size_t n_art = 0;
  for (std::size_t i = 0; i < m; ++i)
    if (initial[i] == ns) initial[i] = ns + n_art++;
  const std::size_t total = ns + n_art;

  Simplex sx{Tableau(m, total), Vector(total + 1, 0.0), initial, {}, std::vector<bool>(total, true), 0, 0};
  sx.limit = 50 * (m + total) + 1000;
  for (std::size_t i = 0; i < m; ++i) {
    sx.rows_of_origin.push_back(i);
    for (std::size_t j = 0; j < ns; ++j) sx.t.at(i, j) = a_std(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    if (initial[i] >= ns) sx.t.at(i, initial[i]) = 1.0;
    sx.t.rhs(i) = b_std(static_cast<Eigen::Index>(i));
  }

  LpSolution out;
  // artificial rows only; a huge slack-covered bound should not loosen phase 1
  double b_scale = 1.0;
  for (std::size_t i = 0; i < m; ++i)
    if (initial[i] >= ns) b_scale = std::max(b_scale, 1.0 + std::fabs(b_std(static_cast<Eigen::Index>(i))));

  if (n_art > 0) {
    // phase 1: minimize the sum of artificials
    for (std::size_t i = 0; i < m; ++i) {
      if (initial[i] < ns) continue;
      const double* r = sx.t.row(i);
      for (std::size_t j = 0; j <= total; ++j)
        if (j < ns || j == total) sx.cost[j] -= r[j];
    }
    const LpStatus st = sx.run(1e-11);
    out.iterations = sx.iterations;
    if (st == LpStatus::iteration_limit) {
      out.status = st;
      return out;
    }
    if (-sx.cost[total] > 1e-9 * b_scale) {
      out.status = LpStatus::infeasible;
      return out;
    }
    // drive remaining artificials out, dropping rows that turn out redundant
    for (std::size_t i = 0; i < sx.t.rows();) {
      if (sx.basis[i] < ns) {
        ++i;
        continue;
      }
      std::size_t best = ns;
      double mag = kPivotTol;
      for (std::size_t j = 0; j < ns; ++j)
        if (std::fabs(sx.t.at(i, j)) > mag) {
          mag = std::fabs(sx.t.at(i, j));
          best = j;
        }
      if (best < ns) {
        sx.pivot(i, best);
        ++i;
      } else {
        sx.t.erase_row(i);
        sx.basis.erase(sx.basis.begin() + static_cast<std::ptrdiff_t>(i));
        sx.rows_of_origin.erase(sx.rows_of_origin.begin() + static_cast<std::ptrdiff_t>(i));
        ++out.redundant_rows;
      }
    }
    for (std::size_t j = ns; j < total; ++j) sx.allowed[j] = false;
  }

  // phase 2
  std::fill(sx.cost.begin(), sx.cost.end(), 0.0);
  for (std::size_t j = 0; j < ns; ++j) sx.cost[j] = c_std[j];
  for (std::size_t i = 0; i < sx.t.rows(); ++i) {
    const double cb = sx.basis[i] < ns ? c_std[sx.basis[i]] : 0.0;
    if (cb != 0.0) kernels::axpy(-cb, {sx.t.row(i), total + 1}, sx.cost);
  }
  for (std::size_t i = 0; i < sx.t.rows(); ++i) sx.cost[sx.basis[i]] = 0.0;
  double c_scale = 1.0;
  for (double c : c_std) c_scale = std::max(c_scale, std::fabs(c));
  const LpStatus st = sx.run(1e-11 * c_scale);
  out.iterations = sx.iterations;
  if (st != LpStatus::optimal) {
    out.status = st;
    return out;
  }

  // tableau point
  Vector x_std(ns, 0.0);
  for (std::size_t i = 0; i < sx.t.rows(); ++i)
    if (sx.basis[i] < ns) x_std[sx.basis[i]] = std::max(0.0, sx.t.rhs(i));

  // refinement on the final basis
  const std::size_t mb = sx.t.rows();
  if (mb > 0) {
    Eigen::MatrixXd basis_matrix(static_cast<Eigen::Index>(mb), static_cast<Eigen::Index>(mb));
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(mb)), cb(static_cast<Eigen::Index>(mb));
    bool ok = true;
    for (std::size_t k = 0; k < mb; ++k) {
      const std::size_t j = sx.basis[k];
      if (j >= ns) ok = false;
      rhs(static_cast<Eigen::Index>(k)) = b_std(static_cast<Eigen::Index>(sx.rows_of_origin[k]));
      cb(static_cast<Eigen::Index>(k)) = j < ns ? c_std[j] : 0.0;
      for (std::size_t r = 0; r < mb; ++r)
        basis_matrix(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) =
            j < ns ? a_std(static_cast<Eigen::Index>(sx.rows_of_origin[r]), static_cast<Eigen::Index>(j)) : 0.0;
    }
    if (ok) {
      Eigen::PartialPivLU<Eigen::MatrixXd> lu(basis_matrix);
      Eigen::VectorXd xb = lu.solve(rhs);
      xb += lu.solve(rhs - basis_matrix * xb);
      const Eigen::VectorXd y = lu.transpose().solve(cb);
      if (xb.allFinite() && xb.minCoeff() >= -1e-9 * b_scale) {
        std::fill(x_std.begin(), x_std.end(), 0.0);
        for (std::size_t k = 0; k < mb; ++k) x_std[sx.basis[k]] = std::max(0.0, xb(static_cast<Eigen::Index>(k)));
      }
      if (y.allFinite()) {
        double worst = 0.0, by = 0.0;
        for (std::size_t j = 0; j < ns; ++j) {
          double d = c_std[j];
          for (std::size_t r = 0; r < mb; ++r)
            d -= a_std(static_cast<Eigen::Index>(sx.rows_of_origin[r]), static_cast<Eigen::Index>(j)) *
                 y(static_cast<Eigen::Index>(r));
          worst = std::max(worst, -d);
        }
        for (std::size_t r = 0; r < mb; ++r)
          by += b_std(static_cast<Eigen::Index>(sx.rows_of_origin[r])) * y(static_cast<Eigen::Index>(r));
        double cx = 0.0;
        for (std::size_t j = 0; j < ns; ++j) cx += c_std[j] * x_std[j];
        out.dual_infeasibility = worst / c_scale;
        out.dual_gap = std::fabs(cx - by) / (1.0 + std::fabs(cx));
      }
    }
  }

  out.variables.assign(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) out.variables[j] = problem.nonneg ? x_std[j] : x_std[j] - x_std[n + j];
  out.objective = 0.0;
  for (std::size_t j = 0; j < n; ++j) out.objective += problem.objective[j] * out.variables[j];

  const Eigen::Map<const Eigen::VectorXd> xv(out.variables.data(), static_cast<Eigen::Index>(n));
  double resid = 0.0;
  if (m_eq > 0) {
    const Eigen::VectorXd r = problem.eq_matrix * xv;
    for (std::size_t i = 0; i < m_eq; ++i) resid = std::max(resid, std::fabs(r(static_cast<Eigen::Index>(i)) - problem.eq_rhs[i]));
  }
  if (m_ub > 0) {
    const Eigen::VectorXd r = problem.ub_matrix * xv;
    for (std::size_t i = 0; i < m_ub; ++i) resid = std::max(resid, r(static_cast<Eigen::Index>(i)) - problem.ub_rhs[i]);
  }
  out.primal_residual = resid;
  out.status = LpStatus::optimal;
  return out;
}

}  // namespace stealth
