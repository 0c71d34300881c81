#pragma once

// Bounded-time safety verification of the closed loop: the initial box is
// partitioned per mode, each period is covered by simulation plus an
// exponential discrepancy bloat, tubes are chained through the periodic mode
// relocation, and unsafe overlap triggers bisection refinement under a global
// partition budget.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <deque>
#include <map>
#include <future>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "hybrid.hpp"
#include "mpc.hpp"
#include "polyhedron.hpp"

namespace veripc::reach {

struct ReachConfig {
  long max_partitions = 512;
  int steps_per_period = 50;
  double bloat_safety = 1.1;   // multiplier on the exponential discrepancy term
  double containment_tol = 1e-7;
  double world_extent = poly::kWorldExtent;
  int max_split_depth = 8;     // initial-partition bisection depth
  int threads = 1;             // 1 = deterministic scheduling
};

struct Cell {
  poly::Box box;
  int mode = -1;
  double t = 0.0;
  int lineage = 0;  // partition depth of this cell
  // inherited enclosing ball: all states of the cell lie within ball_radius
  // of ball_center (tighter than the box half-diagonal after a period)
  Eigen::VectorXd ball_center;
  double ball_radius = -1.0;

  double initial_radius() const {
    const double half_diag = box.diagonal() / 2.0;
    if (ball_radius < 0) return half_diag;
    return std::min(half_diag, ball_radius + (ball_center - box.center()).norm());
  }
};

struct TubeSegment {
  double t_start = 0.0;
  double t_end = 0.0;
  poly::Box enclosure;
  int mode = -1;
};

struct Reachtube {
  std::vector<TubeSegment> segments;
};

enum class VerdictKind { RobustSafe, MaxPart, Infeasible };

struct Verdict {
  VerdictKind kind = VerdictKind::Infeasible;
  std::string detail;
  Reachtube tube;  // nonempty iff kind == RobustSafe
  long partitions_used = 0;
};

// delta(t) = base_radius * e^{lambda t} * bloat + step_error bounds the
// distance between the center simulation and any trajectory of the cell
struct DiscrepancyBound {
  double lambda = 0.0;
  double base_radius = 0.0;
  double step_error = 0.0;

  double delta(double t, double bloat) const {
    return base_radius * std::exp(lambda * t) * bloat + step_error;
  }
};

namespace detail {

inline poly::Box inflate(const poly::Box& b, double r) {
  const Eigen::VectorXd pad = Eigen::VectorXd::Constant(b.dim(), r);
  return {b.lo - pad, b.hi + pad};
}

inline void hull_point(poly::Box& b, const Eigen::VectorXd& x) {
  b.lo = b.lo.cwiseMin(x);
  b.hi = b.hi.cwiseMax(x);
}

inline bool box_in_region(const poly::Box& b, const poly::Polyhedron& P, double tol) {
  for (const auto& c : b.corners())
    if (((P.A() * c - P.b()).array() > tol).any()) return false;
  return true;
}

// emptiness of box ∩ P without the redundancy pass (inner-loop fast path)
inline bool box_meets(const poly::Box& b, const poly::Polyhedron& P) {
  const int n = b.dim();
  Eigen::MatrixXd A(2 * n + P.rows(), n);
  Eigen::VectorXd rhs(2 * n + P.rows());
  A.topRows(n) = Eigen::MatrixXd::Identity(n, n);
  A.middleRows(n, n) = -Eigen::MatrixXd::Identity(n, n);
  rhs.head(n) = b.hi;
  rhs.segment(n, n) = -b.lo;
  A.bottomRows(P.rows()) = P.A();
  rhs.tail(P.rows()) = P.b();
  return !poly::is_empty(poly::Polyhedron(A, rhs));
}

// deterministic grid used for Jacobian sampling and leak detection
inline std::vector<Eigen::VectorXd> sample_grid(const poly::Box& b) {
  std::vector<Eigen::VectorXd> pts = b.corners();
  pts.push_back(b.center());
  for (auto& p : b.face_centers()) pts.push_back(std::move(p));
  return pts;
}

inline double spectral_norm(const Eigen::MatrixXd& M) {
  return Eigen::JacobiSVD<Eigen::MatrixXd>(M).singularValues()(0);
}

// smallest ball enclosing two balls
inline std::pair<Eigen::VectorXd, double> merge_balls(const Eigen::VectorXd& c1,
                                                      double r1,
                                                      const Eigen::VectorXd& c2,
                                                      double r2) {
  const double d = (c1 - c2).norm();
  if (r1 >= d + r2) return {c1, r1};
  if (r2 >= d + r1) return {c2, r2};
  const double R = 0.5 * (d + r1 + r2);
  return {c1 + ((R - r1) / d) * (c2 - c1), R};
}

// single-mode flow: control substituted, no relocation
template <class Automaton>
Eigen::VectorXd integrate_mode(const Automaton& ha, int mode, Eigen::VectorXd x,
                               double span, int steps) {
  const auto& l = ha.law(mode);
  const double h = span / steps;
  for (int j = 0; j < steps; ++j)
    x = hybrid::detail::rk4_step(
        [&](const Eigen::VectorXd& y) { return ha.field.eval(y, l.F * y + l.G); },
        x, h);
  return x;
}

}  // namespace detail

struct PartitionResult {
  bool ok = false;
  std::vector<Cell> cells;
  std::string detail;
};

namespace detail {

inline bool partition_rec(const poly::Box& box, const mpc::ExplicitSolution& sol,
                          const ReachConfig& cfg, int depth, std::vector<Cell>& out,
                          std::string& why) {
  for (int i = 0; i < sol.k(); ++i) {
    if (box_in_region(box, sol.regions[static_cast<std::size_t>(i)].region,
                      cfg.containment_tol)) {
      out.push_back({box, i, 0.0, depth});
      return true;
    }
  }
  std::vector<int> meets;
  for (int i = 0; i < sol.k(); ++i)
    if (box_meets(box, sol.regions[static_cast<std::size_t>(i)].region))
      meets.push_back(i);
  if (meets.empty()) {
    why = "initial states outside the feasible set near (";
    const Eigen::VectorXd c = box.center();
    for (int d = 0; d < box.dim(); ++d)
      why += (d ? ", " : "") + hybrid::detail::format_double(c[d]);
    why += ")";
    return false;
  }
  if (depth >= cfg.max_split_depth) {
    // depth budget spent: cover the straddling box by per-region boxes
    const std::size_t first = out.size();
    for (int i : meets) {
      const auto cap = poly::intersect(
          poly::Polyhedron::from_box(box),
          sol.regions[static_cast<std::size_t>(i)].region);
      if (poly::is_empty(cap)) continue;
      out.push_back({poly::bounding_box(cap), i, 0.0, depth});
    }
    for (const auto& p : sample_grid(box)) {
      bool covered = false;
      for (std::size_t c = first; c < out.size(); ++c)
        if (out[c].box.contains(p, cfg.containment_tol)) {
          covered = true;
          break;
        }
      if (!covered) {
        why = "initial box straddles the feasible boundary at depth limit";
        return false;
      }
    }
    return true;
  }
  const auto [a, b] = box.split(box.widest_dim());
  return partition_rec(a, sol, cfg, depth + 1, out, why) &&
         partition_rec(b, sol, cfg, depth + 1, out, why);
}

}  // namespace detail

inline PartitionResult partition_initial(const poly::Box& Theta,
                                         const mpc::ExplicitSolution& sol,
                                         const ReachConfig& cfg) {
  if (Theta.dim() == 0 || (Theta.widths().array() < 0).any())
    throw ValidationError("partition: initial box is empty");
  PartitionResult res;
  if (!detail::partition_rec(Theta, sol, cfg, 0, res.cells, res.detail)) {
    res.cells.clear();
    return res;
  }
  res.ok = true;
  return res;
}

inline DiscrepancyBound discrepancy_bound(const hybrid::HybridAutomaton& ha,
                                          int mode, const poly::Box& coarse,
                                          double delta0, const ReachConfig& cfg) {
  const auto grid = detail::sample_grid(coarse);
  std::vector<Eigen::MatrixXd> jacs;
  jacs.reserve(grid.size());
  double mu_max = -std::numeric_limits<double>::infinity();
  for (const auto& p : grid) {
    const Eigen::MatrixXd J = ha.closed_loop_jac(p, mode);
    const Eigen::MatrixXd S = 0.5 * (J + J.transpose());
    const double mu =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(S).eigenvalues().maxCoeff();
    mu_max = std::max(mu_max, mu);
    jacs.push_back(J);
  }
  // Lipschitz padding covers curvature between grid points
  double lip = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (std::size_t j = i + 1; j < grid.size(); ++j) {
      const double d = (grid[i] - grid[j]).norm();
      if (d < 1e-12) continue;
      lip = std::max(lip, detail::spectral_norm(jacs[i] - jacs[j]) / d);
    }
  DiscrepancyBound b;
  b.lambda = mu_max + lip * coarse.diagonal() / 2.0;
  b.base_radius = delta0;
  // Richardson estimate of the integrator error over one period
  const Eigen::VectorXd x1 =
      detail::integrate_mode(ha, mode, coarse.center(), ha.Ts, cfg.steps_per_period);
  const Eigen::VectorXd x2 = detail::integrate_mode(ha, mode, coarse.center(), ha.Ts,
                                                    2 * cfg.steps_per_period);
  b.step_error = std::max((16.0 / 15.0) * (x1 - x2).norm(), 1e-14);
  return b;
}

enum class PostKind { Safe, MaxPartExceeded, InfeasibleExit };

// final-time enclosure: the box circumscribes ball(center, radius)
struct EndSet {
  poly::Box box;
  Eigen::VectorXd center;
  double radius = 0.0;
};

struct PostResult {
  PostKind kind = PostKind::Safe;
  std::vector<TubeSegment> segments;
  std::vector<EndSet> end_sets;  // one per surviving leaf partition
  std::string detail;
};

inline PostResult compute_post(const hybrid::HybridAutomaton& ha, const Cell& cell,
                               const std::vector<poly::Polyhedron>& unsafe,
                               const ReachConfig& cfg, std::atomic<long>& counter,
                               double span) {
  try {
    const double h_nominal = ha.Ts / cfg.steps_per_period;
    const int steps =
        std::max(4, static_cast<int>(std::ceil(span / h_nominal - 1e-12)));
    const double h = span / steps;
    const auto& l = ha.law(cell.mode);
    auto flow = [&](const Eigen::VectorXd& y) {
      return ha.field.eval(y, l.F * y + l.G);
    };

    std::vector<Eigen::VectorXd> xs(static_cast<std::size_t>(steps) + 1);
    xs[0] = cell.box.center();
    poly::Box hull{xs[0], xs[0]};
    for (int j = 0; j < steps; ++j) {
      xs[static_cast<std::size_t>(j) + 1] =
          hybrid::detail::rk4_step(flow, xs[static_cast<std::size_t>(j)], h);
      const auto& x = xs[static_cast<std::size_t>(j) + 1];
      if (!x.allFinite() || x.lpNorm<Eigen::Infinity>() > cfg.world_extent)
        throw NumericalFailure("center simulation left the world box");
      detail::hull_point(hull, x);
    }

    const double delta0 = cell.initial_radius();
    // first pass on a guessed enclosure, then one refinement pass
    const auto d1 =
        discrepancy_bound(ha, cell.mode, detail::inflate(hull, delta0), delta0, cfg);
    const double sup1 = d1.delta(d1.lambda > 0 ? span : 0.0, cfg.bloat_safety);
    const auto d =
        discrepancy_bound(ha, cell.mode, detail::inflate(hull, sup1), delta0, cfg);

    PostResult res;
    for (int j = 0; j < steps; ++j) {
      const double bloat = std::max(d.delta(j * h, cfg.bloat_safety),
                                    d.delta((j + 1) * h, cfg.bloat_safety));
      poly::Box enc{xs[static_cast<std::size_t>(j)], xs[static_cast<std::size_t>(j)]};
      detail::hull_point(enc, xs[static_cast<std::size_t>(j) + 1]);
      res.segments.push_back({cell.t + j * h, cell.t + (j + 1) * h,
                              detail::inflate(enc, bloat), cell.mode});
    }
    const double dT = d.delta(span, cfg.bloat_safety);
    res.end_sets.push_back({detail::inflate({xs.back(), xs.back()}, dT), xs.back(), dT});

    bool hit = false;
    for (const auto& seg : res.segments) {
      for (const auto& U : unsafe)
        if (detail::box_meets(seg.enclosure, U)) {
          hit = true;
          break;
        }
      if (hit) break;
    }
    if (!hit) return res;

    // possible unsafe overlap: split the cell and try both halves
    if (++counter > cfg.max_partitions) {
      PostResult bad;
      bad.kind = PostKind::MaxPartExceeded;
      bad.detail = "partition budget exhausted at t=" +
                   hybrid::detail::format_double(cell.t) + ", lineage " +
                   std::to_string(cell.lineage);
      return bad;
    }
    const auto [a, b] = cell.box.split(cell.box.widest_dim());
    const Cell ca{a, cell.mode, cell.t, cell.lineage + 1, cell.ball_center,
                  cell.ball_radius};
    const Cell cb{b, cell.mode, cell.t, cell.lineage + 1, cell.ball_center,
                  cell.ball_radius};
    PostResult ra = compute_post(ha, ca, unsafe, cfg, counter, span);
    if (ra.kind != PostKind::Safe) return ra;
    PostResult rb = compute_post(ha, cb, unsafe, cfg, counter, span);
    if (rb.kind != PostKind::Safe) return rb;
    ra.segments.insert(ra.segments.end(), rb.segments.begin(), rb.segments.end());
    ra.end_sets.insert(ra.end_sets.end(), rb.end_sets.begin(), rb.end_sets.end());
    return ra;
  } catch (const Error& e) {
    PostResult bad;
    bad.kind = PostKind::MaxPartExceeded;
    bad.detail = std::string("numerical failure: ") + e.what();
    return bad;
  }
}

struct SuccessorResult {
  bool ok = false;
  std::vector<Cell> cells;
  std::string detail;
};

inline SuccessorResult successor_cells(const EndSet& end, const mpc::ExplicitSolution& sol,
                                       double t, const ReachConfig& cfg,
                                       int lineage = 0) {
  const poly::Box& end_box = end.box;
  SuccessorResult res;
  for (int i = 0; i < sol.k(); ++i) {
    const auto& region = sol.regions[static_cast<std::size_t>(i)].region;
    if (!detail::box_meets(end_box, region)) continue;
    const auto cap = poly::intersect(poly::Polyhedron::from_box(end_box), region);
    if (poly::is_empty(cap)) continue;
    res.cells.push_back(
        {poly::bounding_box(cap), i, t, lineage, end.center, end.radius});
  }
  // leak check: every grid sample of end_box must land in some successor box
  for (const auto& p : detail::sample_grid(end_box)) {
    bool covered = false;
    for (const auto& cell : res.cells)
      if (cell.box.contains(p, cfg.containment_tol)) {
        covered = true;
        break;
      }
    if (!covered) {
      res.cells.clear();
      res.detail = "reachable states leak outside the explicit solution at t=" +
                   hybrid::detail::format_double(t);
      return res;
    }
  }
  res.ok = true;
  return res;
}

inline Verdict compute_reach(const hybrid::HybridAutomaton& ha, const poly::Box& Theta,
                             double Tv, const std::vector<poly::Polyhedron>& unsafe,
                             const ReachConfig& cfg = {}) {
  if (!(Tv > 0)) throw ValidationError("verify: horizon must be positive");
  if (cfg.max_partitions < 1 || cfg.steps_per_period < 4 || cfg.bloat_safety < 1.0)
    throw ValidationError("verify: invalid reach configuration");
  if (ha.hold != hybrid::HoldKind::StateFeedback)
    throw ValidationError("verify: reach analysis requires state-feedback hold");
  if (Theta.dim() != ha.field.state_dim())
    throw DimensionMismatch("verify: initial box dimension");
  for (const auto& U : unsafe)
    if (U.dim() != ha.field.state_dim())
      throw DimensionMismatch("verify: unsafe set dimension");

  const auto part = partition_initial(Theta, ha.solution, cfg);
  if (!part.ok) return {VerdictKind::Infeasible, part.detail, {}, 0};

  std::atomic<long> counter{0};
  std::deque<Cell> work(part.cells.begin(), part.cells.end());
  std::vector<TubeSegment> all;
  while (!work.empty()) {
    // one wave per control period; cells in a wave are independent
    std::vector<Cell> wave(work.begin(), work.end());
    work.clear();
    std::vector<PostResult> posts(wave.size());
    std::vector<double> spans(wave.size());
    auto run = [&](std::size_t i) {
      spans[i] = std::min(ha.Ts, Tv - wave[i].t);
      posts[i] = compute_post(ha, wave[i], unsafe, cfg, counter, spans[i]);
    };
    if (cfg.threads > 1 && wave.size() > 1) {
      std::vector<std::future<void>> jobs;
      std::atomic<std::size_t> next{0};
      const int nthreads = std::min<int>(cfg.threads, static_cast<int>(wave.size()));
      for (int w = 0; w < nthreads; ++w)
        jobs.push_back(std::async(std::launch::async, [&] {
          for (std::size_t i = next++; i < wave.size(); i = next++) run(i);
        }));
      for (auto& j : jobs) j.get();
    } else {
      for (std::size_t i = 0; i < wave.size(); ++i) run(i);
    }
    for (std::size_t i = 0; i < wave.size(); ++i) {
      auto& post = posts[i];
      if (post.kind == PostKind::MaxPartExceeded)
        return {VerdictKind::MaxPart, post.detail, {}, counter.load()};
      if (post.kind == PostKind::InfeasibleExit)
        return {VerdictKind::Infeasible, post.detail, {}, counter.load()};
      all.insert(all.end(), post.segments.begin(), post.segments.end());
      const double t_next = wave[i].t + spans[i];
      if (t_next < Tv - 1e-12) {
        for (const auto& end : post.end_sets) {
          auto succ =
              successor_cells(end, ha.solution, t_next, cfg, wave[i].lineage);
          if (!succ.ok)
            return {VerdictKind::Infeasible, succ.detail, {}, counter.load()};
          work.insert(work.end(), succ.cells.begin(), succ.cells.end());
        }
      }
    }
    // merge cells that landed in the same mode so branch count stays at most
    // the region count; hulls of subsets of a convex region keep its law valid
    if (!work.empty()) {
      std::map<int, Cell> merged;
      for (const auto& c : work) {
        auto it = merged.find(c.mode);
        if (it == merged.end()) {
          merged.emplace(c.mode, c);
          continue;
        }
        Cell& m = it->second;
        detail::hull_point(m.box, c.box.lo);
        detail::hull_point(m.box, c.box.hi);
        const auto [bc, br] =
            detail::merge_balls(m.ball_center, m.ball_radius, c.ball_center,
                                c.ball_radius);
        m.ball_center = bc;
        m.ball_radius = br;
        m.lineage = std::max(m.lineage, c.lineage);
      }
      work.clear();
      for (auto& [mode, c] : merged) work.push_back(std::move(c));
    }
  }
  std::stable_sort(all.begin(), all.end(),
                   [](const TubeSegment& x, const TubeSegment& y) {
                     return x.t_start < y.t_start;
                   });
  return {VerdictKind::RobustSafe, "", {std::move(all)}, counter.load()};
}

inline bool check_safety(const std::vector<TubeSegment>& segments,
                         const std::vector<poly::Polyhedron>& unsafe) {
  for (const auto& seg : segments)
    for (const auto& U : unsafe)
      if (detail::box_meets(seg.enclosure, U)) return false;
  return true;
}

}  // namespace veripc::reach
