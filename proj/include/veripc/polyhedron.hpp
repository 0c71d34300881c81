#pragma once

// Halfspace-representation polyhedral kernel: {x : Ax <= b} with unit-norm
// rows, backed by the LP solver. All operations are pure; Polyhedron values
// are immutable after construction. Unbounded queries are cut off by a world
// box (default +/-1e6 per dimension).

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "lp.hpp"

namespace veripc::poly {

inline constexpr double kWorldExtent = 1e6;
inline constexpr double kTol = 1e-9;
inline constexpr double kZeroRowTol = 1e-12;

struct Box {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  int dim() const { return static_cast<int>(lo.size()); }
  Eigen::VectorXd center() const { return 0.5 * (lo + hi); }
  Eigen::VectorXd widths() const { return hi - lo; }
  double diagonal() const { return (hi - lo).norm(); }

  int widest_dim() const {
    int d = 0;
    (hi - lo).maxCoeff(&d);
    return d;
  }

  bool contains(const Eigen::VectorXd& x, double tol = 0.0) const {
    if (x.size() != lo.size()) throw DimensionMismatch("box: point dimension");
    return (x.array() >= lo.array() - tol).all() &&
           (x.array() <= hi.array() + tol).all();
  }

  std::pair<Box, Box> split(int d) const {
    const double mid = 0.5 * (lo[d] + hi[d]);
    Box left = *this, right = *this;
    left.hi[d] = mid;
    right.lo[d] = mid;
    return {left, right};
  }

  std::vector<Eigen::VectorXd> corners() const {
    const int n = dim();
    std::vector<Eigen::VectorXd> out;
    out.reserve(std::size_t{1} << n);
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
      Eigen::VectorXd p(n);
      for (int d = 0; d < n; ++d) p[d] = (mask >> d & 1) ? hi[d] : lo[d];
      out.push_back(std::move(p));
    }
    return out;
  }

  std::vector<Eigen::VectorXd> face_centers() const {
    std::vector<Eigen::VectorXd> out;
    const Eigen::VectorXd c = center();
    for (int d = 0; d < dim(); ++d) {
      Eigen::VectorXd p = c;
      p[d] = lo[d];
      out.push_back(p);
      p[d] = hi[d];
      out.push_back(std::move(p));
    }
    return out;
  }
};

inline Box world_box(int dim, double extent = kWorldExtent) {
  return {Eigen::VectorXd::Constant(dim, -extent),
          Eigen::VectorXd::Constant(dim, extent)};
}

class Polyhedron {
 public:
  // Normalizes nonzero rows to unit norm, drops vacuous zero rows, and
  // canonicalizes "0x <= negative" rows into a single empty marker.
  Polyhedron(Eigen::MatrixXd A, Eigen::VectorXd b)
      : A_(std::move(A)), b_(std::move(b)) {
    if (A_.rows() != b_.size())
      throw DimensionMismatch("polyhedron: A/b row mismatch");
    if (!A_.allFinite() || !b_.allFinite())
      throw DimensionMismatch("polyhedron: non-finite entry");
    Eigen::Index keep = 0;
    bool empty_marker = false;
    for (Eigen::Index i = 0; i < A_.rows(); ++i) {
      const double nrm = A_.row(i).norm();
      if (nrm <= kZeroRowTol) {
        if (b_[i] < 0) empty_marker = true;
        continue;
      }
      A_.row(keep) = A_.row(i) / nrm;
      b_[keep] = b_[i] / nrm;
      ++keep;
    }
    if (empty_marker) {
      A_.conservativeResize(keep + 1, A_.cols());
      b_.conservativeResize(keep + 1);
      A_.row(keep).setZero();
      b_[keep] = -1.0;
    } else {
      A_.conservativeResize(keep, A_.cols());
      b_.conservativeResize(keep);
    }
  }

  static Polyhedron empty(int dim) {
    return Polyhedron(Eigen::MatrixXd::Zero(1, dim),
                      -Eigen::VectorXd::Ones(1));
  }

  static Polyhedron from_box(const Box& box) {
    const int n = box.dim();
    Eigen::MatrixXd A(2 * n, n);
    Eigen::VectorXd b(2 * n);
    A.setZero();
    for (int d = 0; d < n; ++d) {
      A(2 * d, d) = 1.0;
      b[2 * d] = box.hi[d];
      A(2 * d + 1, d) = -1.0;
      b[2 * d + 1] = -box.lo[d];
    }
    return Polyhedron(std::move(A), std::move(b));
  }

  const Eigen::MatrixXd& A() const { return A_; }
  const Eigen::VectorXd& b() const { return b_; }
  int dim() const { return static_cast<int>(A_.cols()); }
  int rows() const { return static_cast<int>(A_.rows()); }

  bool has_empty_marker() const {
    for (Eigen::Index i = 0; i < A_.rows(); ++i)
      if (A_.row(i).norm() <= kZeroRowTol && b_[i] < 0) return true;
    return false;
  }

 private:
  Eigen::MatrixXd A_;
  Eigen::VectorXd b_;
};

struct ChebyshevBall {
  Eigen::VectorXd center;
  double radius = -1.0;  // negative when the set is empty
};

inline bool contains(const Polyhedron& P, const Eigen::VectorXd& x,
                     double tol = 1e-9) {
  if (x.size() != P.dim()) throw DimensionMismatch("contains: point dimension");
  if (P.rows() == 0) return true;
  return ((P.A() * x - P.b()).array() <= tol).all();
}

inline bool is_empty(const Polyhedron& P) {
  if (P.has_empty_marker()) return true;
  if (P.rows() == 0) return false;
  lp::LinearProgram prob;
  prob.c = Eigen::VectorXd::Zero(P.dim());
  prob.A_in = P.A();
  prob.b_in = P.b();
  prob.A_eq.resize(0, P.dim());
  prob.b_eq.resize(0);
  return lp::solve_lp(prob).status == lp::LpStatus::Infeasible;
}

// Sequential facet-redundancy elimination: a row is redundant when maximizing
// its lhs subject to the remaining rows (self relaxed by +1) stays within its
// rhs. A cheap duplicate-normal pre-pass avoids most LPs on stacked systems.
inline Polyhedron remove_redundant(const Polyhedron& P, double tol = kTol) {
  if (is_empty(P)) throw EmptyInput("remove_redundant: empty polyhedron");
  const int m = P.rows();
  const int n = P.dim();
  std::vector<char> alive(static_cast<std::size_t>(m), 1);
  for (int i = 0; i < m; ++i) {
    if (!alive[i]) continue;
    for (int j = i + 1; j < m; ++j) {
      if (!alive[j]) continue;
      if ((P.A().row(i) - P.A().row(j)).lpNorm<Eigen::Infinity>() > 1e-9)
        continue;
      if (P.b()[j] >= P.b()[i])
        alive[j] = 0;
      else
        alive[i] = 0;
      if (!alive[i]) break;
    }
  }
  for (int i = 0; i < m; ++i) {
    if (!alive[i]) continue;
    std::vector<int> others;
    for (int j = 0; j < m; ++j)
      if (alive[j] && j != i) others.push_back(j);
    lp::LinearProgram prob;
    prob.c = -P.A().row(i).transpose();
    prob.A_in.resize(static_cast<Eigen::Index>(others.size()) + 1, n);
    prob.b_in.resize(static_cast<Eigen::Index>(others.size()) + 1);
    for (std::size_t r = 0; r < others.size(); ++r) {
      prob.A_in.row(static_cast<Eigen::Index>(r)) = P.A().row(others[r]);
      prob.b_in[static_cast<Eigen::Index>(r)] = P.b()[others[r]];
    }
    prob.A_in.bottomRows(1) = P.A().row(i);
    prob.b_in[static_cast<Eigen::Index>(others.size())] = P.b()[i] + 1.0;
    prob.A_eq.resize(0, n);
    prob.b_eq.resize(0);
    const auto sol = lp::solve_lp(prob);
    if (sol.status == lp::LpStatus::Optimal && -sol.objective <= P.b()[i] + tol)
      alive[i] = 0;
  }
  int kept = 0;
  for (int i = 0; i < m; ++i) kept += alive[i];
  Eigen::MatrixXd A(kept, n);
  Eigen::VectorXd b(kept);
  int r = 0;
  for (int i = 0; i < m; ++i) {
    if (!alive[i]) continue;
    A.row(r) = P.A().row(i);
    b[r] = P.b()[i];
    ++r;
  }
  return Polyhedron(std::move(A), std::move(b));
}

inline Polyhedron intersect(const Polyhedron& P, const Polyhedron& Q) {
  if (P.dim() != Q.dim()) throw DimensionMismatch("intersect: ambient dims");
  Eigen::MatrixXd A(P.rows() + Q.rows(), P.dim());
  Eigen::VectorXd b(P.rows() + Q.rows());
  A << P.A(), Q.A();
  b << P.b(), Q.b();
  Polyhedron R(std::move(A), std::move(b));
  if (is_empty(R)) return Polyhedron::empty(P.dim());
  return remove_redundant(R);
}

inline ChebyshevBall chebyshev_center(const Polyhedron& P,
                                      double world_extent = kWorldExtent) {
  const int n = P.dim();
  const int m = P.rows();
  lp::LinearProgram prob;
  prob.c = Eigen::VectorXd::Zero(n + 1);
  prob.c[n] = -1.0;  // maximize the radius
  prob.A_in.resize(m + 2 * n, n + 1);
  prob.b_in.resize(m + 2 * n);
  prob.A_in.setZero();
  for (int i = 0; i < m; ++i) {
    prob.A_in.block(i, 0, 1, n) = P.A().row(i);
    prob.A_in(i, n) = P.A().row(i).norm();
    prob.b_in[i] = P.b()[i];
  }
  for (int d = 0; d < n; ++d) {
    prob.A_in(m + 2 * d, d) = 1.0;
    prob.A_in(m + 2 * d, n) = 1.0;
    prob.b_in[m + 2 * d] = world_extent;
    prob.A_in(m + 2 * d + 1, d) = -1.0;
    prob.A_in(m + 2 * d + 1, n) = 1.0;
    prob.b_in[m + 2 * d + 1] = world_extent;
  }
  prob.A_eq.resize(0, n + 1);
  prob.b_eq.resize(0);
  prob.lb = Eigen::VectorXd::Constant(n + 1, -lp::kInfinity);
  prob.lb[n] = 0.0;
  prob.ub = Eigen::VectorXd::Constant(n + 1, lp::kInfinity);
  const auto sol = lp::solve_lp(prob);
  if (sol.status != lp::LpStatus::Optimal)
    return {Eigen::VectorXd::Zero(n), -1.0};
  return {sol.x_opt.head(n), sol.x_opt[n]};
}

inline Box bounding_box(const Polyhedron& P, double world_extent = kWorldExtent) {
  if (is_empty(P)) throw EmptySet("bounding_box: empty polyhedron");
  const int n = P.dim();
  const Polyhedron W = Polyhedron::from_box(world_box(n, world_extent));
  lp::LinearProgram prob;
  prob.A_in.resize(P.rows() + W.rows(), n);
  prob.b_in.resize(P.rows() + W.rows());
  prob.A_in << P.A(), W.A();
  prob.b_in << P.b(), W.b();
  prob.A_eq.resize(0, n);
  prob.b_eq.resize(0);
  Box out{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
  for (int d = 0; d < n; ++d) {
    prob.c = Eigen::VectorXd::Zero(n);
    prob.c[d] = 1.0;
    auto lo = lp::solve_lp(prob);
    prob.c[d] = -1.0;
    auto hi = lp::solve_lp(prob);
    if (lo.status != lp::LpStatus::Optimal || hi.status != lp::LpStatus::Optimal)
      throw NumericalFailure("bounding_box: support LP failed");
    out.lo[d] = lo.objective;
    out.hi[d] = -hi.objective;
  }
  return out;
}

namespace detail {

// One Fourier-Motzkin step removing column e; caller prunes afterwards.
inline void fm_eliminate(Eigen::MatrixXd& A, Eigen::VectorXd& b, int e) {
  const double eps = 1e-9;
  std::vector<int> pos, neg, zero;
  for (int i = 0; i < A.rows(); ++i) {
    const double c = A(i, e);
    if (c > eps)
      pos.push_back(i);
    else if (c < -eps)
      neg.push_back(i);
    else
      zero.push_back(i);
  }
  const int n = static_cast<int>(A.cols());
  const auto keep_cols = [&](const Eigen::RowVectorXd& row) {
    Eigen::RowVectorXd out(n - 1);
    out << row.head(e), row.tail(n - e - 1);
    return out;
  };
  Eigen::MatrixXd A2(static_cast<Eigen::Index>(zero.size()) +
                         static_cast<Eigen::Index>(pos.size() * neg.size()),
                     n - 1);
  Eigen::VectorXd b2(A2.rows());
  Eigen::Index r = 0;
  for (int i : zero) {
    A2.row(r) = keep_cols(A.row(i));
    b2[r] = b[i];
    ++r;
  }
  for (int p : pos)
    for (int q : neg) {
      const double wp = -A(q, e), wq = A(p, e);
      A2.row(r) = keep_cols(wp * A.row(p) + wq * A.row(q));
      b2[r] = wp * b[p] + wq * b[q];
      ++r;
    }
  A = std::move(A2);
  b = std::move(b2);
}

}  // namespace detail

inline Polyhedron project(const Polyhedron& P, const std::vector<int>& keep_dims) {
  const int n = P.dim();
  if (keep_dims.empty()) throw DimensionMismatch("project: no kept dimensions");
  std::vector<char> kept(static_cast<std::size_t>(n), 0);
  for (int d : keep_dims) {
    if (d < 0 || d >= n) throw DimensionMismatch("project: dimension out of range");
    if (kept[d]) throw DimensionMismatch("project: duplicate dimension");
    kept[d] = 1;
  }
  const int k = static_cast<int>(keep_dims.size());
  if (is_empty(P)) return Polyhedron::empty(k);

  Eigen::MatrixXd A = P.A();
  Eigen::VectorXd b = P.b();
  for (int e = n - 1; e >= 0; --e) {
    if (kept[e]) continue;
    detail::fm_eliminate(A, b, e);
    Polyhedron step(std::move(A), std::move(b));
    if (step.rows() > 0) step = remove_redundant(step);
    A = step.A();
    b = step.b();
  }
  // Remaining columns follow ascending original order; restore caller order.
  std::vector<int> sorted = keep_dims;
  std::sort(sorted.begin(), sorted.end());
  Eigen::MatrixXd Ao(A.rows(), k);
  for (int t = 0; t < k; ++t) {
    const int col = static_cast<int>(
        std::lower_bound(sorted.begin(), sorted.end(), keep_dims[t]) -
        sorted.begin());
    Ao.col(t) = A.col(col);
  }
  return Polyhedron(std::move(Ao), std::move(b));
}

inline std::vector<Eigen::VectorXd> vertices(const Polyhedron& P,
                                             int max_dim = 4,
                                             double tol = 1e-7) {
  const int n = P.dim();
  if (n > max_dim) throw DimensionTooHigh("vertices: ambient dimension");
  const int m = P.rows();
  std::vector<Eigen::VectorXd> out;
  if (m < n) return out;
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  while (true) {
    Eigen::MatrixXd M(n, n);
    Eigen::VectorXd rhs(n);
    for (int i = 0; i < n; ++i) {
      M.row(i) = P.A().row(idx[static_cast<std::size_t>(i)]);
      rhs[i] = P.b()[idx[static_cast<std::size_t>(i)]];
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
    if (lu.isInvertible()) {
      Eigen::VectorXd x = lu.solve(rhs);
      if (contains(P, x, tol)) {
        bool dup = false;
        for (const auto& v : out)
          if ((v - x).lpNorm<Eigen::Infinity>() <= tol) {
            dup = true;
            break;
          }
        if (!dup) out.push_back(std::move(x));
      }
    }
    int pos = n - 1;
    while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == m - n + pos) --pos;
    if (pos < 0) break;
    ++idx[static_cast<std::size_t>(pos)];
    for (int i = pos + 1; i < n; ++i)
      idx[static_cast<std::size_t>(i)] = idx[static_cast<std::size_t>(i - 1)] + 1;
  }
  std::sort(out.begin(), out.end(), [](const auto& u, const auto& v) {
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      if (u[i] < v[i] - 1e-12) return true;
      if (u[i] > v[i] + 1e-12) return false;
    }
    return false;
  });
  return out;
}

}  // namespace veripc::poly
