#pragma once

// Finite-horizon constrained linear MPC with 1-norm or inf-norm stage cost,
// recast as a multi-parametric LP in the measured state. solve_mplp explores
// the parameter domain region by region and returns the explicit PWA law
// u(x) = F_i x + G_i over critical regions.
//
// A small lexicographic tie-break (rho * ||U||_1 epigraph terms) keeps the
// minimizer unique under dual degeneracy; the pointwise oracle applies the
// same tie-break so both paths select the same control.

#include <Eigen/Dense>

#include <cmath>
#include <deque>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "lp.hpp"
#include "polyhedron.hpp"

namespace veripc::mpc {

struct NonFiniteInput : Error {
  using Error::Error;
};

struct SeedInfeasible : Error {
  using Error::Error;
};

struct ExplorationOverflow : Error {
  using Error::Error;
};

enum class NormKind { One, Inf };

struct MpcProblem {
  Eigen::MatrixXd A_d;
  Eigen::MatrixXd B_d;
  int N = 1;
  double Ts = 1.0;
  Eigen::MatrixXd Q;
  Eigen::MatrixXd R;
  NormKind norm_kind = NormKind::Inf;
  Eigen::VectorXd u_min, u_max;
  Eigen::VectorXd x_min, x_max;
  poly::Box param_domain;

  int state_dim() const { return static_cast<int>(A_d.rows()); }
  int input_dim() const { return static_cast<int>(B_d.cols()); }

  void validate() const {
    const int n = state_dim(), m = input_dim();
    if (A_d.cols() != n || B_d.rows() != n)
      throw DimensionMismatch("mpc: A_d/B_d shapes");
    if (Q.rows() != n || Q.cols() != n || R.rows() != m || R.cols() != m)
      throw DimensionMismatch("mpc: Q/R shapes");
    if (u_min.size() != m || u_max.size() != m || x_min.size() != n ||
        x_max.size() != n)
      throw DimensionMismatch("mpc: bound vector sizes");
    if (param_domain.dim() != n)
      throw DimensionMismatch("mpc: param_domain dimension");
    if (!A_d.allFinite() || !B_d.allFinite() || !Q.allFinite() || !R.allFinite())
      throw NonFiniteInput("mpc: non-finite problem data");
    if (N < 1) throw ValidationError("mpc: horizon must be >= 1");
    if (!(Ts > 0)) throw ValidationError("mpc: Ts must be positive");
    if (!(u_min.array() < u_max.array()).all())
      throw ValidationError("mpc: u_min must be below u_max");
    if (!(x_min.array() < x_max.array()).all())
      throw ValidationError("mpc: x_min must be below x_max");
    if (!(param_domain.lo.array() >= x_min.array() - 1e-9).all() ||
        !(param_domain.hi.array() <= x_max.array() + 1e-9).all())
      throw ValidationError("mpc: param_domain must lie within state bounds");
  }
};

struct AffineLaw {
  Eigen::MatrixXd F;
  Eigen::VectorXd G;
};

struct CriticalRegion {
  poly::Polyhedron region;
  AffineLaw law;
  std::vector<int> active_set;
};

struct ExplicitSolution {
  std::vector<CriticalRegion> regions;
  int k() const { return static_cast<int>(regions.size()); }
};

// Constraints G z <= w + S x with cost c'z; the first n_u entries of z are
// the applied input u(k).
struct ParametricLp {
  Eigen::VectorXd c;
  Eigen::MatrixXd G;
  Eigen::VectorXd w;
  Eigen::MatrixXd S;
  int n_x = 0;
  int n_u = 0;
  int horizon = 0;

  int num_vars() const { return static_cast<int>(c.size()); }
  int num_rows() const { return static_cast<int>(G.rows()); }
};

struct MplpConfig {
  double rho = 1e-6;        // tie-break weight on ||U||_1; 0 disables
  double step_eps = 1e-6;   // outward offset past each facet
  double region_tol = 1e-7; // Chebyshev radius below which a region is dropped
  int max_regions = 20000;
  double dual_tol = 1e-9;
  double contain_tol = 1e-9;
};

namespace detail {

inline Eigen::MatrixXd expm(const Eigen::MatrixXd& M) {
  const Eigen::Index d = M.rows();
  double nrm = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) nrm = std::max(nrm, M.row(i).cwiseAbs().sum());
  int squarings = 0;
  while (nrm > 0.5) {
    nrm *= 0.5;
    ++squarings;
  }
  const Eigen::MatrixXd X = M / std::exp2(squarings);
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(d, d);
  Eigen::MatrixXd sum = term;
  for (int k = 1; k <= 64; ++k) {
    term = (term * X) / k;
    sum += term;
    if (term.cwiseAbs().maxCoeff() <
        1e-16 * std::max(1.0, sum.cwiseAbs().maxCoeff()))
      break;
  }
  for (int i = 0; i < squarings; ++i) sum = sum * sum;
  return sum;
}

}  // namespace detail

// Exact zero-order-hold discretization of dx/dt = Jx x + Ju u via the matrix
// exponential of the augmented system.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> discretize(
    const Eigen::MatrixXd& Jx, const Eigen::MatrixXd& Ju, double Ts) {
  if (!Jx.allFinite() || !Ju.allFinite())
    throw NonFiniteInput("discretize: non-finite matrices");
  const int n = static_cast<int>(Jx.rows());
  const int m = static_cast<int>(Ju.cols());
  if (Jx.cols() != n || Ju.rows() != n)
    throw DimensionMismatch("discretize: matrix shapes");
  if (!(Ts > 0)) throw ValidationError("discretize: Ts must be positive");
  Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(n + m, n + m);
  aug.topLeftCorner(n, n) = Jx;
  aug.topRightCorner(n, m) = Ju;
  const Eigen::MatrixXd E = detail::expm(aug * Ts);
  return {E.topLeftCorner(n, n), E.topRightCorner(n, m)};
}

// Epigraph LP over z = [u(k..k+N-1); eps_x; eps_u] with predictions
// substituted out, so the measured state enters only through S.
inline ParametricLp build_parametric_lp(const MpcProblem& prob) {
  prob.validate();
  const int n = prob.state_dim();
  const int m = prob.input_dim();
  const int N = prob.N;
  const bool inf_norm = prob.norm_kind == NormKind::Inf;
  const int eps_x_per_stage = inf_norm ? 1 : n;
  const int eps_u_per_stage = inf_norm ? 1 : m;
  const int nu = N * m;
  const int nz = nu + N * (eps_x_per_stage + eps_u_per_stage);
  const int eps_x0 = nu;
  const int eps_u0 = nu + N * eps_x_per_stage;

  std::vector<Eigen::MatrixXd> Apow(static_cast<std::size_t>(N) + 1);
  Apow[0] = Eigen::MatrixXd::Identity(n, n);
  for (int i = 1; i <= N; ++i) Apow[static_cast<std::size_t>(i)] = Apow[static_cast<std::size_t>(i - 1)] * prob.A_d;

  // prediction x(k+i) = Apow[i] x + sum_j T(i,j) u(j), j < i
  const auto T = [&](int i, int j) -> Eigen::MatrixXd {
    return Apow[static_cast<std::size_t>(i - 1 - j)] * prob.B_d;
  };

  const int rows = 2 * N * m                        // input bounds
                   + 2 * N * n                      // state bounds
                   + 2 * N * (inf_norm ? n : n)     // eps_x epigraph
                   + 2 * N * (inf_norm ? m : m);    // eps_u epigraph
  ParametricLp plp;
  plp.c = Eigen::VectorXd::Zero(nz);
  plp.c.segment(eps_x0, N * eps_x_per_stage).setOnes();
  plp.c.segment(eps_u0, N * eps_u_per_stage).setOnes();
  plp.G = Eigen::MatrixXd::Zero(rows, nz);
  plp.w = Eigen::VectorXd::Zero(rows);
  plp.S = Eigen::MatrixXd::Zero(rows, n);
  plp.n_x = n;
  plp.n_u = m;
  plp.horizon = N;

  int r = 0;
  for (int i = 0; i < N; ++i) {  // u(k+i) within bounds
    plp.G.block(r, i * m, m, m) = Eigen::MatrixXd::Identity(m, m);
    plp.w.segment(r, m) = prob.u_max;
    r += m;
    plp.G.block(r, i * m, m, m) = -Eigen::MatrixXd::Identity(m, m);
    plp.w.segment(r, m) = -prob.u_min;
    r += m;
  }
  for (int i = 1; i <= N; ++i) {  // x(k+i) within bounds
    for (int j = 0; j < i; ++j) plp.G.block(r, j * m, n, m) = T(i, j);
    plp.w.segment(r, n) = prob.x_max;
    plp.S.block(r, 0, n, n) = -Apow[static_cast<std::size_t>(i)];
    r += n;
    for (int j = 0; j < i; ++j) plp.G.block(r, j * m, n, m) = -T(i, j);
    plp.w.segment(r, n) = -prob.x_min;
    plp.S.block(r, 0, n, n) = Apow[static_cast<std::size_t>(i)];
    r += n;
  }
  for (int i = 1; i <= N; ++i) {  // +/- Q x(k+i) <= eps_x
    for (int sign : {+1, -1}) {
      const Eigen::MatrixXd Qs = sign * prob.Q;
      for (int j = 0; j < i; ++j) plp.G.block(r, j * m, n, m) = Qs * T(i, j);
      plp.S.block(r, 0, n, n) = -Qs * Apow[static_cast<std::size_t>(i)];
      for (int row = 0; row < n; ++row) {
        const int col =
            eps_x0 + (i - 1) * eps_x_per_stage + (inf_norm ? 0 : row);
        plp.G(r + row, col) = -1.0;
      }
      r += n;
    }
  }
  for (int i = 0; i < N; ++i) {  // +/- R u(k+i) <= eps_u
    for (int sign : {+1, -1}) {
      plp.G.block(r, i * m, m, m) = sign * prob.R;
      for (int row = 0; row < m; ++row) {
        const int col =
            eps_u0 + i * eps_u_per_stage + (inf_norm ? 0 : row);
        plp.G(r + row, col) = -1.0;
      }
      r += m;
    }
  }
  return plp;
}

// Adds s >= |u| epigraph variables with cost rho, selecting the minimum
// 1-norm input sequence among cost-optimal ones.
inline ParametricLp augment_with_tiebreak(const ParametricLp& plp, double rho) {
  const int nu = plp.n_u * plp.horizon;
  const int nz = plp.num_vars();
  const int rows = plp.num_rows();
  ParametricLp out;
  out.n_x = plp.n_x;
  out.n_u = plp.n_u;
  out.horizon = plp.horizon;
  out.c.resize(nz + nu);
  out.c << plp.c, Eigen::VectorXd::Constant(nu, rho);
  out.G = Eigen::MatrixXd::Zero(rows + 2 * nu, nz + nu);
  out.G.topLeftCorner(rows, nz) = plp.G;
  out.w.resize(rows + 2 * nu);
  out.w << plp.w, Eigen::VectorXd::Zero(2 * nu);
  out.S = Eigen::MatrixXd::Zero(rows + 2 * nu, plp.n_x);
  out.S.topRows(rows) = plp.S;
  for (int i = 0; i < nu; ++i) {
    out.G(rows + 2 * i, i) = 1.0;
    out.G(rows + 2 * i, nz + i) = -1.0;
    out.G(rows + 2 * i + 1, i) = -1.0;
    out.G(rows + 2 * i + 1, nz + i) = -1.0;
  }
  return out;
}

namespace detail {

inline lp::LpSolution solve_at(const ParametricLp& plp, const Eigen::VectorXd& x) {
  lp::LinearProgram prob;
  prob.c = plp.c;
  prob.A_in = plp.G;
  prob.b_in = plp.w + plp.S * x;
  prob.A_eq.resize(0, plp.num_vars());
  prob.b_eq.resize(0);
  return lp::solve_lp(prob);
}

// Completes dual-supported rows to an invertible nz x nz basis, preferring
// positive-dual rows, then remaining tight rows in ascending index.
inline std::vector<int> complete_basis(const ParametricLp& plp,
                                       const lp::LpSolution& sol,
                                       double dual_tol) {
  const int nz = plp.num_vars();
  std::vector<int> candidates;
  std::vector<char> listed(static_cast<std::size_t>(plp.num_rows()), 0);
  for (int i = 0; i < plp.num_rows(); ++i)
    if (sol.dual[i] > dual_tol) {
      candidates.push_back(i);
      listed[static_cast<std::size_t>(i)] = 1;
    }
  for (int i : sol.active_set)
    if (!listed[static_cast<std::size_t>(i)]) candidates.push_back(i);

  std::vector<int> basis;
  Eigen::MatrixXd rows(nz, nz);
  for (int cand : candidates) {
    if (static_cast<int>(basis.size()) == nz) break;
    rows.row(static_cast<Eigen::Index>(basis.size())) = plp.G.row(cand);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(
        rows.topRows(static_cast<Eigen::Index>(basis.size()) + 1).transpose());
    if (qr.rank() == static_cast<Eigen::Index>(basis.size()) + 1)
      basis.push_back(cand);
  }
  if (static_cast<int>(basis.size()) != nz) return {};
  std::sort(basis.begin(), basis.end());
  return basis;
}

struct RegionCandidate {
  Eigen::MatrixXd Mz;  // z*(x) = Mz x + dz
  Eigen::VectorXd dz;
  std::vector<int> basis;
};

inline std::optional<RegionCandidate> affine_optimizer(
    const ParametricLp& plp, const lp::LpSolution& sol,
    const Eigen::VectorXd& x0, double dual_tol) {
  const int nz = plp.num_vars();
  std::vector<int> basis = complete_basis(plp, sol, dual_tol);
  if (basis.empty()) return std::nullopt;
  Eigen::MatrixXd GB(nz, nz);
  Eigen::MatrixXd SB(nz, plp.n_x);
  Eigen::VectorXd wB(nz);
  for (int i = 0; i < nz; ++i) {
    GB.row(i) = plp.G.row(basis[static_cast<std::size_t>(i)]);
    SB.row(i) = plp.S.row(basis[static_cast<std::size_t>(i)]);
    wB[i] = plp.w[basis[static_cast<std::size_t>(i)]];
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(GB);
  if (!lu.isInvertible()) return std::nullopt;
  RegionCandidate cand;
  cand.Mz = lu.solve(SB);
  cand.dz = lu.solve(wB);
  cand.basis = std::move(basis);
  // the basis must reproduce the LP optimizer and be dual feasible
  if ((cand.Mz * x0 + cand.dz - sol.x_opt).lpNorm<Eigen::Infinity>() > 1e-6)
    return std::nullopt;
  Eigen::VectorXd lambda = lu.transpose().solve(-plp.c);
  if (lambda.minCoeff() < -1e-7) return std::nullopt;
  return cand;
}

// Relative-interior point of facet f: maximize slack to the other rows while
// pinned to the facet hyperplane.
inline std::optional<Eigen::VectorXd> facet_point(const poly::Polyhedron& P, int f) {
  const int n = P.dim();
  lp::LinearProgram prob;
  prob.c = Eigen::VectorXd::Zero(n + 1);
  prob.c[n] = -1.0;
  prob.A_in.resize(P.rows() - 1, n + 1);
  prob.b_in.resize(P.rows() - 1);
  int r = 0;
  for (int i = 0; i < P.rows(); ++i) {
    if (i == f) continue;
    prob.A_in.block(r, 0, 1, n) = P.A().row(i);
    prob.A_in(r, n) = 1.0;
    prob.b_in[r] = P.b()[i];
    ++r;
  }
  prob.A_eq.resize(1, n + 1);
  prob.A_eq.block(0, 0, 1, n) = P.A().row(f);
  prob.A_eq(0, n) = 0.0;
  prob.b_eq.resize(1);
  prob.b_eq[0] = P.b()[f];
  prob.lb = Eigen::VectorXd::Constant(n + 1, -lp::kInfinity);
  prob.ub = Eigen::VectorXd::Constant(n + 1, lp::kInfinity);
  prob.lb[n] = 0.0;
  prob.ub[n] = 1.0;  // caps the objective; large slack is not informative
  const auto sol = lp::solve_lp(prob);
  if (sol.status != lp::LpStatus::Optimal || sol.x_opt[n] <= 0)
    return std::nullopt;
  return sol.x_opt.head(n);
}

}  // namespace detail

inline ExplicitSolution solve_mplp(const ParametricLp& plp_in,
                                   const poly::Box& domain,
                                   const MplpConfig& cfg = {}) {
  if (domain.dim() != plp_in.n_x)
    throw DimensionMismatch("solve_mplp: domain dimension");
  const ParametricLp plp =
      cfg.rho > 0 ? augment_with_tiebreak(plp_in, cfg.rho) : plp_in;
  const poly::Polyhedron domain_poly = poly::Polyhedron::from_box(domain);
  const int m = plp.n_u;

  // Feasible seed: domain center, else dyadic bisection of each
  // center-to-corner segment (feasible set is convex but may miss the center).
  Eigen::VectorXd seed0 = domain.center();
  if (detail::solve_at(plp, seed0).status != lp::LpStatus::Optimal) {
    bool found = false;
    for (const auto& corner : domain.corners()) {
      for (int depth = 0; depth <= 6 && !found; ++depth) {
        const int denom = 1 << depth;
        for (int num = 1; num <= denom && !found; num += 2) {
          const double t = static_cast<double>(num) / denom;
          Eigen::VectorXd probe =
              domain.center() + t * (corner - domain.center());
          if (detail::solve_at(plp, probe).status == lp::LpStatus::Optimal) {
            seed0 = std::move(probe);
            found = true;
          }
        }
      }
      if (found) break;
    }
    if (!found) throw SeedInfeasible("solve_mplp: no feasible parameter in domain");
  }

  ExplicitSolution sol;
  std::set<std::vector<int>> seen;
  // bool flag: seed may spawn nearby probes if it lands on a degenerate locus
  std::deque<std::pair<Eigen::VectorXd, bool>> queue{{seed0, true}};
  const auto push_probes = [&](const Eigen::VectorXd& x0) {
    for (int d = 0; d < domain.dim(); ++d) {
      const double h = std::max(1e-6, 1e-3 * (domain.hi[d] - domain.lo[d]));
      for (double sgn : {1.0, -1.0}) {
        Eigen::VectorXd probe = x0;
        probe[d] += sgn * h;
        queue.emplace_back(std::move(probe), false);
      }
    }
  };

  while (!queue.empty()) {
    const Eigen::VectorXd x0 = queue.front().first;
    const bool can_probe = queue.front().second;
    queue.pop_front();
    if (!domain.contains(x0, 0.0)) continue;
    bool covered = false;
    for (const auto& cr : sol.regions)
      if (poly::contains(cr.region, x0, cfg.contain_tol)) {
        covered = true;
        break;
      }
    if (covered) continue;

    const auto lp_sol = detail::solve_at(plp, x0);
    if (lp_sol.status != lp::LpStatus::Optimal) continue;
    const auto cand = detail::affine_optimizer(plp, lp_sol, x0, cfg.dual_tol);
    if (!cand) {
      if (can_probe) push_probes(x0);  // degenerate point, tile around it
      continue;
    }
    if (!seen.insert(cand->basis).second) continue;

    // Region: primal feasibility of the basic solution as a function of x.
    std::vector<int> inactive;
    for (int i = 0; i < plp.num_rows(); ++i)
      if (!std::binary_search(cand->basis.begin(), cand->basis.end(), i))
        inactive.push_back(i);
    Eigen::MatrixXd RA(static_cast<Eigen::Index>(inactive.size()) + domain_poly.rows(),
                       plp.n_x);
    Eigen::VectorXd Rb(RA.rows());
    for (std::size_t r = 0; r < inactive.size(); ++r) {
      const int i = inactive[r];
      RA.row(static_cast<Eigen::Index>(r)) =
          plp.G.row(i) * cand->Mz - plp.S.row(i);
      Rb[static_cast<Eigen::Index>(r)] = plp.w[i] - plp.G.row(i).dot(cand->dz);
    }
    RA.bottomRows(domain_poly.rows()) = domain_poly.A();
    Rb.tail(domain_poly.rows()) = domain_poly.b();
    poly::Polyhedron region(std::move(RA), std::move(Rb));
    if (poly::is_empty(region)) {
      if (can_probe) push_probes(x0);
      continue;
    }
    if (poly::chebyshev_center(region).radius < cfg.region_tol) {
      if (can_probe) push_probes(x0);  // seed sits on a region boundary
      continue;
    }
    region = poly::remove_redundant(region);

    if (sol.k() >= cfg.max_regions)
      throw ExplorationOverflow("solve_mplp: region count exceeds max_regions");
    AffineLaw law{cand->Mz.topRows(m), cand->dz.head(m)};
    sol.regions.push_back({region, law, cand->basis});

    for (int f = 0; f < region.rows(); ++f) {
      const auto fp = detail::facet_point(region, f);
      if (!fp) continue;
      Eigen::VectorXd outward =
          *fp + cfg.step_eps * region.A().row(f).transpose();
      if (domain.contains(outward, 0.0)) queue.emplace_back(std::move(outward), true);
    }
  }
  if (sol.regions.empty())
    throw SeedInfeasible("solve_mplp: no full-dimensional region found");
  return sol;
}

// Lowest-index region containing x wins; boundary points resolve to the
// earlier region, which agrees with its neighbors by continuity.
inline std::optional<std::pair<Eigen::VectorXd, int>> eval_control(
    const ExplicitSolution& sol, const Eigen::VectorXd& x, double tol = 1e-7) {
  for (int i = 0; i < sol.k(); ++i) {
    const auto& cr = sol.regions[static_cast<std::size_t>(i)];
    if (poly::contains(cr.region, x, tol))
      return std::make_pair(Eigen::VectorXd(cr.law.F * x + cr.law.G), i);
  }
  return std::nullopt;
}

// Fixes x in the parametric LP and solves once; the reference the explicit
// law is tested against.
inline std::optional<Eigen::VectorXd> pointwise_oracle(const MpcProblem& prob,
                                                       const Eigen::VectorXd& x,
                                                       double rho = 1e-6) {
  if (x.size() != prob.state_dim())
    throw DimensionMismatch("pointwise_oracle: state dimension");
  if (((x - prob.x_max).array() > 1e-9).any() ||
      ((prob.x_min - x).array() > 1e-9).any())
    return std::nullopt;
  ParametricLp plp = build_parametric_lp(prob);
  if (rho > 0) plp = augment_with_tiebreak(plp, rho);
  const auto sol = detail::solve_at(plp, x);
  if (sol.status != lp::LpStatus::Optimal) return std::nullopt;
  return Eigen::VectorXd(sol.x_opt.head(prob.input_dim()));
}

}  // namespace veripc::mpc
