#pragma once

// Closed-loop hybrid automaton: one mode per critical region, flow
// dx/dt = f(x, F_i x + G_i), and a timer that re-locates the mode every Ts.
// The invariant region is consulted only at sampling instants; trajectories
// terminate with an infeasible flag when the state leaves all regions.

#include <Eigen/Dense>

#include <array>
#include <charconv>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "expr.hpp"
#include "mpc.hpp"

namespace veripc::hybrid {

enum class HoldKind { StateFeedback, Zoh };

struct HybridAutomaton {
  expr::VectorField field;
  mpc::ExplicitSolution solution;
  double Ts = 1.0;
  HoldKind hold = HoldKind::StateFeedback;

  int mode_count() const { return solution.k(); }
  const mpc::AffineLaw& law(int mode) const {
    return solution.regions[static_cast<std::size_t>(mode)].law;
  }

  // u under continuous state feedback in the given mode
  Eigen::VectorXd control(const Eigen::VectorXd& x, int mode) const {
    const auto& l = law(mode);
    return l.F * x + l.G;
  }

  Eigen::VectorXd flow(const Eigen::VectorXd& x, int mode) const {
    return field.eval(x, control(x, mode));
  }

  // d/dx f(x, F_i x + G_i) = Jx + Ju F_i
  Eigen::MatrixXd closed_loop_jac(const Eigen::VectorXd& x, int mode) const {
    const Eigen::VectorXd u = control(x, mode);
    return field.jac_x_at(x, u) + field.jac_u_at(x, u) * law(mode).F;
  }
};

inline HybridAutomaton build_automaton(expr::VectorField field,
                                       mpc::ExplicitSolution solution,
                                       double Ts,
                                       HoldKind hold = HoldKind::StateFeedback) {
  if (!(Ts > 0)) throw ValidationError("automaton: Ts must be positive");
  if (solution.k() == 0) throw ValidationError("automaton: empty explicit solution");
  for (const auto& cr : solution.regions) {
    if (cr.law.F.rows() != field.input_dim() ||
        cr.law.F.cols() != field.state_dim() ||
        cr.law.G.size() != field.input_dim())
      throw DimensionMismatch("automaton: law shape vs plant dimensions");
    if (cr.region.dim() != field.state_dim())
      throw DimensionMismatch("automaton: region dimension vs plant");
  }
  return {std::move(field), std::move(solution), Ts, hold};
}

inline std::optional<int> locate_mode(const HybridAutomaton& ha,
                                      const Eigen::VectorXd& x,
                                      double tol = 1e-7) {
  const auto ev = mpc::eval_control(ha.solution, x, tol);
  if (!ev) return std::nullopt;
  return ev->second;
}

struct TrajectorySample {
  double t = 0.0;
  Eigen::VectorXd x;
  int mode = -1;  // -1 flags an infeasible (region-less) state
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  double step = 0.0;
  bool infeasible = false;
};

namespace detail {

template <class F>
Eigen::VectorXd rk4_step(F&& f, const Eigen::VectorXd& x, double h) {
  const Eigen::VectorXd k1 = f(x);
  const Eigen::VectorXd k2 = f(x + 0.5 * h * k1);
  const Eigen::VectorXd k3 = f(x + 0.5 * h * k2);
  const Eigen::VectorXd k4 = f(x + h * k3);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace detail

inline Trajectory simulate(const HybridAutomaton& ha, const Eigen::VectorXd& x0,
                           double Tv, double h) {
  if (!(Tv > 0)) throw ValidationError("simulate: horizon must be positive");
  if (!(h > 0)) throw ValidationError("simulate: step must be positive");
  const double per = ha.Ts / h;
  const long steps_per_period = std::lround(per);
  if (steps_per_period < 1 || std::abs(ha.Ts - steps_per_period * h) > 1e-12)
    throw ValidationError("simulate: step must divide the sampling period");
  if (x0.size() != ha.field.state_dim())
    throw DimensionMismatch("simulate: initial state dimension");

  Trajectory traj;
  traj.step = h;
  const long total_steps = static_cast<long>(std::ceil(Tv / h - 1e-12));

  Eigen::VectorXd x = x0;
  auto mode = locate_mode(ha, x);
  traj.samples.push_back({0.0, x, mode ? *mode : -1});
  if (!mode) {
    traj.infeasible = true;
    return traj;
  }

  Eigen::VectorXd u_held = ha.control(x, *mode);
  for (long step = 1; step <= total_steps; ++step) {
    if (ha.hold == HoldKind::StateFeedback) {
      const auto& l = ha.law(*mode);
      x = detail::rk4_step(
          [&](const Eigen::VectorXd& y) { return ha.field.eval(y, l.F * y + l.G); },
          x, h);
    } else {
      x = detail::rk4_step(
          [&](const Eigen::VectorXd& y) { return ha.field.eval(y, u_held); }, x, h);
    }
    const double t = static_cast<double>(step) * h;
    if (step % steps_per_period == 0) {  // timer fires: tau = Ts, tau := 0
      mode = locate_mode(ha, x);
      traj.samples.push_back({t, x, mode ? *mode : -1});
      if (!mode) {
        traj.infeasible = true;
        return traj;
      }
      u_held = ha.control(x, *mode);
    } else {
      traj.samples.push_back({t, x, *mode});
    }
  }
  return traj;
}

namespace detail {

inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto [p, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), p);
}

}  // namespace detail

inline std::string to_csv(const Trajectory& traj) {
  if (traj.samples.empty()) return "t,mode\n";
  const Eigen::Index n = traj.samples.front().x.size();
  std::string out = "t";
  for (Eigen::Index d = 0; d < n; ++d) out += ",x" + std::to_string(d + 1);
  out += ",mode\n";
  for (const auto& s : traj.samples) {
    out += detail::format_double(s.t);
    for (Eigen::Index d = 0; d < n; ++d) out += "," + detail::format_double(s.x[d]);
    out += "," + std::to_string(s.mode) + "\n";
  }
  return out;
}

}  // namespace veripc::hybrid
