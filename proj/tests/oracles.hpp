#pragma once

// Brute-force reference computations used by the test suites. These stay
// deliberately independent of the library's solver paths: linear programs
// are settled by enumerating basic solutions, sets by sampling points.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <vector>

namespace oracle {

struct BruteLpResult {
  bool feasible = false;
  double objective = std::numeric_limits<double>::infinity();
  Eigen::VectorXd x_best;
};

// Visit all size-k index subsets of {0..m-1}.
inline void for_each_subset(int m, int k, const std::function<void(const std::vector<int>&)>& fn) {
  if (k > m || k < 0) return;
  std::vector<int> idx(k);
  for (int i = 0; i < k; ++i) idx[i] = i;
  while (true) {
    fn(idx);
    int i = k - 1;
    while (i >= 0 && idx[i] == m - k + i) --i;
    if (i < 0) break;
    ++idx[i];
    for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

// min c'x s.t. A x <= b by enumerating all basic solutions (n tight rows).
// Assumes the feasible set, if nonempty, is bounded (callers include box
// rows), so feasibility and the optimum are both decided by vertices.
inline BruteLpResult brute_force_lp(const Eigen::VectorXd& c, const Eigen::MatrixXd& A,
                                    const Eigen::VectorXd& b, double feas_tol = 1e-7) {
  BruteLpResult res;
  const int n = static_cast<int>(c.size());
  const int m = static_cast<int>(A.rows());
  for_each_subset(m, n, [&](const std::vector<int>& idx) {
    Eigen::MatrixXd M(n, n);
    Eigen::VectorXd rhs(n);
    for (int i = 0; i < n; ++i) {
      M.row(i) = A.row(idx[i]);
      rhs[i] = b[idx[i]];
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
    if (!lu.isInvertible()) return;
    Eigen::VectorXd x = lu.solve(rhs);
    if (((A * x - b).array() > feas_tol).any()) return;
    const double obj = c.dot(x);
    if (!res.feasible || obj < res.objective) {
      res.feasible = true;
      res.objective = obj;
      res.x_best = x;
    }
  });
  return res;
}

// All vertices of {A x <= b} (assumed bounded), deduplicated.
inline std::vector<Eigen::VectorXd> enumerate_vertices(const Eigen::MatrixXd& A,
                                                       const Eigen::VectorXd& b,
                                                       double feas_tol = 1e-7,
                                                       double dedup_tol = 1e-7) {
  std::vector<Eigen::VectorXd> verts;
  const int n = static_cast<int>(A.cols());
  const int m = static_cast<int>(A.rows());
  for_each_subset(m, n, [&](const std::vector<int>& idx) {
    Eigen::MatrixXd M(n, n);
    Eigen::VectorXd rhs(n);
    for (int i = 0; i < n; ++i) {
      M.row(i) = A.row(idx[i]);
      rhs[i] = b[idx[i]];
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
    if (!lu.isInvertible()) return;
    Eigen::VectorXd x = lu.solve(rhs);
    if (((A * x - b).array() > feas_tol).any()) return;
    for (const auto& v : verts)
      if ((v - x).lpNorm<Eigen::Infinity>() <= dedup_tol) return;
    verts.push_back(x);
  });
  return verts;
}

// Is there a completion y of the kept coordinates q with [q;y] in {Ax<=b}?
// Decided by enumerating basic solutions of the fiber system.
inline bool point_in_projection(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                const std::vector<int>& keep, const Eigen::VectorXd& q,
                                double feas_tol = 1e-7) {
  const int n = static_cast<int>(A.cols());
  const int k = static_cast<int>(keep.size());
  std::vector<int> dropped;
  for (int j = 0; j < n; ++j)
    if (std::find(keep.begin(), keep.end(), j) == keep.end()) dropped.push_back(j);
  const int d = static_cast<int>(dropped.size());
  // Constant part of each row once kept coordinates are fixed.
  Eigen::VectorXd b_red = b;
  for (int i = 0; i < A.rows(); ++i)
    for (int j = 0; j < k; ++j) b_red[i] -= A(i, keep[j]) * q[j];
  Eigen::MatrixXd A_red(A.rows(), d);
  for (int j = 0; j < d; ++j) A_red.col(j) = A.col(dropped[j]);
  if (d == 0) return ((A_red.rows() == 0) || (b_red.array() >= -feas_tol).all());

  bool found = false;
  for_each_subset(static_cast<int>(A_red.rows()), d, [&](const std::vector<int>& idx) {
    if (found) return;
    Eigen::MatrixXd M(d, d);
    Eigen::VectorXd rhs(d);
    for (int i = 0; i < d; ++i) {
      M.row(i) = A_red.row(idx[i]);
      rhs[i] = b_red[idx[i]];
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
    if (!lu.isInvertible()) return;
    Eigen::VectorXd y = lu.solve(rhs);
    if (((A_red * y - b_red).array() > feas_tol).any()) return;
    found = true;
  });
  return found;
}

// Central finite difference of a scalar function.
inline double central_diff(const std::function<double(double)>& f, double x, double h = 1e-6) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

// Classic RK4 with a fixed tiny step, used as an ODE reference.
inline Eigen::VectorXd integrate_reference(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f, Eigen::VectorXd x,
    double T, int steps) {
  const double h = T / steps;
  for (int i = 0; i < steps; ++i) {
    Eigen::VectorXd k1 = f(x);
    Eigen::VectorXd k2 = f(x + 0.5 * h * k1);
    Eigen::VectorXd k3 = f(x + 0.5 * h * k2);
    Eigen::VectorXd k4 = f(x + h * k3);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return x;
}

}  // namespace oracle
