#pragma once

// Dense two-phase simplex for small linear programs.
//
// Solves  min c'x  s.t.  A_in x <= b_in,  A_eq x = b_eq,  lb <= x <= ub
// where variables are free unless bounds are given. Bounds use a sentinel
// magnitude (kInfinity) for +/-inf. The solver is deterministic: identical
// input bits yield identical output bits. Dantzig pricing with smallest-index
// tie-breaks; Bland's rule engages after a bounded run of degenerate pivots.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "errors.hpp"

namespace veripc::lp {

using veripc::DimensionMismatch;
using veripc::NumericalFailure;

/// Sentinel magnitude encoding an absent (infinite) bound.
inline constexpr double kInfinity = 1e30;

struct LpConfig {
  double tol = 1e-9;         ///< feasibility / optimality tolerance
  double active_tol = 1e-7;  ///< tolerance for active-set detection
  int degenerate_limit = 64; ///< degenerate pivots before Bland's rule
  long max_iterations = 50000;
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LinearProgram {
  Eigen::VectorXd c;
  Eigen::MatrixXd A_in;
  Eigen::VectorXd b_in;
  Eigen::MatrixXd A_eq;  // 0 rows when absent
  Eigen::VectorXd b_eq;
  Eigen::VectorXd lb;    // size 0 means all -inf
  Eigen::VectorXd ub;    // size 0 means all +inf

  int num_vars() const { return static_cast<int>(c.size()); }
};

struct LpSolution {
  LpStatus status = LpStatus::Infeasible;
  Eigen::VectorXd x_opt;
  double objective = 0.0;
  std::vector<int> active_set;  ///< input inequality rows tight at x_opt, sorted
  Eigen::VectorXd dual;         ///< multiplier per inequality row (>= 0)
  Eigen::VectorXd dual_eq;      ///< multiplier per equality row (free sign)
};

namespace detail {

inline void validate(const LinearProgram& p) {
  const int n = p.num_vars();
  if (n == 0) throw DimensionMismatch("lp: empty cost vector");
  if (p.A_in.rows() != p.b_in.size())
    throw DimensionMismatch("lp: A_in/b_in row mismatch");
  if (p.A_in.rows() > 0 && p.A_in.cols() != n)
    throw DimensionMismatch("lp: A_in column count != num vars");
  if (p.A_eq.rows() != p.b_eq.size())
    throw DimensionMismatch("lp: A_eq/b_eq row mismatch");
  if (p.A_eq.rows() > 0 && p.A_eq.cols() != n)
    throw DimensionMismatch("lp: A_eq column count != num vars");
  if (p.lb.size() != 0 && p.lb.size() != n)
    throw DimensionMismatch("lp: lb size != num vars");
  if (p.ub.size() != 0 && p.ub.size() != n)
    throw DimensionMismatch("lp: ub size != num vars");
  auto finite = [](double v) { return std::isfinite(v); };
  if (!p.c.allFinite()) throw DimensionMismatch("lp: non-finite cost");
  if (p.A_in.size() > 0 && !p.A_in.allFinite())
    throw DimensionMismatch("lp: non-finite A_in");
  if (p.b_in.size() > 0 && !p.b_in.allFinite())
    throw DimensionMismatch("lp: non-finite b_in");
  if (p.A_eq.size() > 0 && !p.A_eq.allFinite())
    throw DimensionMismatch("lp: non-finite A_eq");
  if (p.b_eq.size() > 0 && !p.b_eq.allFinite())
    throw DimensionMismatch("lp: non-finite b_eq");
  for (int j = 0; j < p.lb.size(); ++j)
    if (!finite(p.lb[j]) && std::abs(p.lb[j]) < kInfinity)
      throw DimensionMismatch("lp: non-finite lb entry");
  for (int j = 0; j < p.ub.size(); ++j)
    if (!finite(p.ub[j]) && std::abs(p.ub[j]) < kInfinity)
      throw DimensionMismatch("lp: non-finite ub entry");
}

// Simplex working state over the standard form
//   min chat'y   s.t.  Ahat y = bhat,  y >= 0,
// built by splitting every variable (x = x+ - x-), turning bounds into
// extra inequality rows, and adding one slack per inequality row.
struct Tableau {
  Eigen::MatrixXd body;   // rows x cols, kept canonical on the basis
  Eigen::VectorXd rhs;    // >= 0 throughout
  Eigen::RowVectorXd z1;  // phase-1 reduced costs
  Eigen::RowVectorXd z2;  // phase-2 reduced costs
  double z1_val = 0.0;
  std::vector<int> basis;       // basis[r] = column basic in row r
  std::vector<char> blocked;    // artificial columns barred from entering
  int rows = 0, cols = 0;
};

inline constexpr double kPivotTol = 1e-11;

inline void pivot(Tableau& t, int prow, int pcol) {
  const double piv = t.body(prow, pcol);
  t.body.row(prow) /= piv;
  t.rhs[prow] /= piv;
  for (int r = 0; r < t.rows; ++r) {
    if (r == prow) continue;
    const double f = t.body(r, pcol);
    if (f == 0.0) continue;
    t.body.row(r) -= f * t.body.row(prow);
    t.rhs[r] -= f * t.rhs[prow];
    if (t.rhs[r] < 0.0 && t.rhs[r] > -1e-12) t.rhs[r] = 0.0;
  }
  const double f1 = t.z1[pcol];
  if (f1 != 0.0) {
    t.z1 -= f1 * t.body.row(prow);
    t.z1_val -= f1 * t.rhs[prow];
  }
  const double f2 = t.z2[pcol];
  if (f2 != 0.0) t.z2 -= f2 * t.body.row(prow);
  t.basis[prow] = pcol;
}

// One simplex phase. Returns true when optimal for the given cost row,
// false when the cost is unbounded below.
inline bool run_phase(Tableau& t, bool phase_one, const LpConfig& cfg, long& iters) {
  Eigen::RowVectorXd& z = phase_one ? t.z1 : t.z2;
  int degenerate_run = 0;
  bool bland = false;
  while (true) {
    if (++iters > cfg.max_iterations)
      throw NumericalFailure("lp: iteration limit exceeded");
    // entering column
    int enter = -1;
    if (bland) {
      for (int j = 0; j < t.cols; ++j) {
        if (t.blocked[j]) continue;
        if (z[j] < -cfg.tol) { enter = j; break; }
      }
    } else {
      double best = -cfg.tol;
      for (int j = 0; j < t.cols; ++j) {
        if (t.blocked[j]) continue;
        if (z[j] < best) { best = z[j]; enter = j; }
      }
    }
    if (enter < 0) return true;  // optimal for this phase
    // ratio test
    int leave = -1;
    double best_ratio = 0.0;
    for (int r = 0; r < t.rows; ++r) {
      const double a = t.body(r, enter);
      if (a <= kPivotTol) continue;
      const double ratio = t.rhs[r] / a;
      if (leave < 0 || ratio < best_ratio - 1e-12 ||
          (std::abs(ratio - best_ratio) <= 1e-12 && t.basis[r] < t.basis[leave])) {
        leave = r;
        best_ratio = ratio;
      }
    }
    if (leave < 0) {
      if (phase_one)
        throw NumericalFailure("lp: phase-1 cost unbounded");  // cannot happen
      return false;  // unbounded
    }
    if (best_ratio <= cfg.tol) {
      if (++degenerate_run > cfg.degenerate_limit) bland = true;
    } else {
      degenerate_run = 0;
    }
    pivot(t, leave, enter);
  }
}

}  // namespace detail

inline LpSolution solve_lp(const LinearProgram& prob, const LpConfig& cfg = {}) {
  detail::validate(prob);
  const int n = prob.num_vars();
  const int m_in = static_cast<int>(prob.A_in.rows());
  const int m_eq = static_cast<int>(prob.A_eq.rows());

  // Internal inequality list: input rows first, then bound rows.
  std::vector<Eigen::RowVectorXd> ineq_a;
  std::vector<double> ineq_b;
  ineq_a.reserve(m_in + 2 * n);
  ineq_b.reserve(m_in + 2 * n);
  for (int i = 0; i < m_in; ++i) {
    ineq_a.emplace_back(prob.A_in.row(i));
    ineq_b.push_back(prob.b_in[i]);
  }
  for (int j = 0; j < prob.ub.size(); ++j) {
    if (prob.ub[j] >= kInfinity) continue;
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n);
    row[j] = 1.0;
    ineq_a.push_back(row);
    ineq_b.push_back(prob.ub[j]);
  }
  for (int j = 0; j < prob.lb.size(); ++j) {
    if (prob.lb[j] <= -kInfinity) continue;
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n);
    row[j] = -1.0;
    ineq_a.push_back(row);
    ineq_b.push_back(-prob.lb[j]);
  }
  const int m_it = static_cast<int>(ineq_a.size());
  const int rows = m_it + m_eq;

  // Column layout: [x+ (n) | x- (n) | slacks (m_it) | artificials (as needed)]
  const int col_xp = 0, col_xm = n, col_s = 2 * n;
  std::vector<int> art_col(rows, -1);
  int n_art = 0;
  std::vector<double> sigma(rows, 1.0);  // row sign flips applied

  // Count artificials: flipped inequality rows and all equality rows.
  std::vector<double> rhs_raw(rows);
  for (int r = 0; r < m_it; ++r) rhs_raw[r] = ineq_b[r];
  for (int r = 0; r < m_eq; ++r) rhs_raw[m_it + r] = prob.b_eq[r];
  for (int r = 0; r < rows; ++r) {
    if (rhs_raw[r] < 0.0) sigma[r] = -1.0;
    const bool need_art = (r >= m_it) || (sigma[r] < 0.0);
    if (need_art) art_col[r] = n_art++;
  }
  const int cols = 2 * n + m_it + n_art;

  detail::Tableau t;
  t.rows = rows;
  t.cols = cols;
  t.body = Eigen::MatrixXd::Zero(rows, cols);
  t.rhs = Eigen::VectorXd::Zero(rows);
  t.basis.assign(rows, -1);
  t.blocked.assign(cols, 0);

  for (int r = 0; r < rows; ++r) {
    Eigen::RowVectorXd a;
    if (r < m_it) {
      a = ineq_a[r];
    } else {
      a = prob.A_eq.row(r - m_it);
    }
    t.body.block(r, col_xp, 1, n) = sigma[r] * a;
    t.body.block(r, col_xm, 1, n) = -sigma[r] * a;
    if (r < m_it) t.body(r, col_s + r) = sigma[r];
    t.rhs[r] = sigma[r] * rhs_raw[r];
    if (art_col[r] >= 0) {
      const int c = col_s + m_it + art_col[r];
      t.body(r, c) = 1.0;
      t.basis[r] = c;
      t.blocked[c] = 1;  // may leave the basis but never re-enter
    } else {
      t.basis[r] = col_s + r;
    }
  }

  // Phase-2 cost over standard-form columns.
  Eigen::RowVectorXd chat = Eigen::RowVectorXd::Zero(cols);
  chat.segment(col_xp, n) = prob.c.transpose();
  chat.segment(col_xm, n) = -prob.c.transpose();

  // Reduced-cost rows for the initial basis.
  t.z1 = Eigen::RowVectorXd::Zero(cols);
  t.z1_val = 0.0;
  for (int r = 0; r < rows; ++r) {
    if (art_col[r] >= 0) {  // phase-1 cost 1 on artificials
      t.z1 -= t.body.row(r);
      t.z1_val -= t.rhs[r];
    }
  }
  for (int r = 0; r < rows; ++r)
    if (art_col[r] >= 0) t.z1[col_s + m_it + art_col[r]] = 0.0;
  t.z2 = chat;
  for (int r = 0; r < rows; ++r) {
    const double cb = chat[t.basis[r]];
    if (cb != 0.0) t.z2 -= cb * t.body.row(r);
  }

  long iters = 0;
  LpSolution sol;

  if (n_art > 0) {
    detail::run_phase(t, true, cfg, iters);
    if (-t.z1_val > cfg.tol * 10.0 + 1e-12) {
      sol.status = LpStatus::Infeasible;
      return sol;
    }
    // Drive leftover artificials out of the basis where possible.
    for (int r = 0; r < rows; ++r) {
      if (t.basis[r] < col_s + m_it) continue;
      int enter = -1;
      for (int j = 0; j < col_s + m_it; ++j) {
        if (std::abs(t.body(r, j)) > detail::kPivotTol) { enter = j; break; }
      }
      if (enter >= 0) detail::pivot(t, r, enter);
      // else: redundant row, artificial stays basic at zero (blocked anyway)
    }
  }

  const bool bounded = detail::run_phase(t, false, cfg, iters);
  if (!bounded) {
    sol.status = LpStatus::Unbounded;
    return sol;
  }

  // Recover the original variables.
  Eigen::VectorXd y = Eigen::VectorXd::Zero(cols);
  for (int r = 0; r < rows; ++r) y[t.basis[r]] = t.rhs[r];
  sol.x_opt = y.segment(col_xp, n) - y.segment(col_xm, n);
  sol.objective = prob.c.dot(sol.x_opt);
  sol.status = LpStatus::Optimal;

  // Duals: reduced cost of a slack column equals the row's multiplier;
  // for equality rows read it off the (blocked) artificial column.
  sol.dual = Eigen::VectorXd::Zero(m_in);
  for (int i = 0; i < m_in; ++i) sol.dual[i] = std::max(0.0, t.z2[col_s + i]);
  sol.dual_eq = Eigen::VectorXd::Zero(m_eq);
  for (int r = 0; r < m_eq; ++r) {
    const int ac = art_col[m_it + r];
    sol.dual_eq[r] = sigma[m_it + r] * t.z2[col_s + m_it + ac];
  }

  sol.active_set.clear();
  if (m_in > 0) {
    const Eigen::VectorXd resid = prob.A_in * sol.x_opt - prob.b_in;
    for (int i = 0; i < m_in; ++i)
      if (std::abs(resid[i]) <= cfg.active_tol) sol.active_set.push_back(i);
  }
  return sol;
}

}  // namespace veripc::lp
