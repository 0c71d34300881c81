#include <catch2/catch_amalgamated.hpp>

#include <veripc/hybrid.hpp>

#include <cmath>
#include <random>

using namespace veripc;
using namespace veripc::hybrid;

namespace {

mpc::ExplicitSolution single_law(const Eigen::MatrixXd& F, const Eigen::VectorXd& G,
                                 const poly::Box& dom) {
  mpc::CriticalRegion cr{poly::Polyhedron::from_box(dom), {F, G}, {}};
  return {{cr}};
}

poly::Box box1(double lo, double hi) {
  return {Eigen::VectorXd::Constant(1, lo), Eigen::VectorXd::Constant(1, hi)};
}

mpc::MpcProblem make_double_integrator() {
  mpc::MpcProblem p;
  p.A_d.resize(2, 2);
  p.A_d << 1, 1, 0, 1;
  p.B_d.resize(2, 1);
  p.B_d << 0.5, 1;
  p.N = 2;
  p.Ts = 1.0;
  p.Q = Eigen::MatrixXd::Identity(2, 2);
  p.R = Eigen::MatrixXd::Identity(1, 1);
  p.u_min = Eigen::VectorXd::Constant(1, -1.0);
  p.u_max = Eigen::VectorXd::Constant(1, 1.0);
  p.x_min = Eigen::VectorXd::Constant(2, -5.0);
  p.x_max = Eigen::VectorXd::Constant(2, 5.0);
  p.param_domain = {p.x_min, p.x_max};
  return p;
}

expr::VectorField double_integrator_field() {
  return expr::make_vector_field({"x2", "u1"}, 2, 1);
}

HybridAutomaton double_integrator_automaton(HoldKind hold = HoldKind::StateFeedback) {
  const auto prob = make_double_integrator();
  const auto plp = mpc::build_parametric_lp(prob);
  const auto sol = mpc::solve_mplp(plp, prob.param_domain);
  return build_automaton(double_integrator_field(), sol, prob.Ts, hold);
}

}  // namespace

TEST_CASE("zero field holds the state constant") {
  auto f = expr::make_vector_field({"0*x1", "0*x2"}, 2, 1);
  auto sol = single_law(Eigen::MatrixXd::Zero(1, 2), Eigen::VectorXd::Zero(1),
                        {Eigen::VectorXd::Constant(2, -10.0),
                         Eigen::VectorXd::Constant(2, 10.0)});
  const auto ha = build_automaton(f, sol, 0.5);

  Eigen::VectorXd x0(2);
  x0 << 1.25, -3.5;
  const auto traj = simulate(ha, x0, 2.0, 0.05);
  REQUIRE_FALSE(traj.infeasible);
  REQUIRE(traj.samples.size() == 41);
  for (const auto& s : traj.samples) {
    CHECK((s.x - x0).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK(s.mode == 0);
  }
  CHECK(traj.samples.back().t == Catch::Approx(2.0));
}

TEST_CASE("linear contraction matches the exponential") {
  // plant x' = u with law u = -x gives x(t) = x0 e^{-t}
  auto f = expr::make_vector_field({"u1"}, 1, 1);
  auto sol = single_law(Eigen::MatrixXd::Constant(1, 1, -1.0),
                        Eigen::VectorXd::Zero(1), box1(-10.0, 10.0));
  const auto ha = build_automaton(f, sol, 1.0);

  const auto traj = simulate(ha, Eigen::VectorXd::Ones(1), 1.0, 0.01);
  REQUIRE(traj.samples.size() == 101);
  CHECK(std::abs(traj.samples.back().x[0] - std::exp(-1.0)) < 1e-9);
}

TEST_CASE("simulate validates horizon, step, and dimensions") {
  auto f = expr::make_vector_field({"u1"}, 1, 1);
  auto sol = single_law(Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Zero(1),
                        box1(-1.0, 1.0));
  const auto ha = build_automaton(f, sol, 1.0);

  CHECK_THROWS_AS(simulate(ha, Eigen::VectorXd::Zero(1), -1.0, 0.1), ValidationError);
  CHECK_THROWS_AS(simulate(ha, Eigen::VectorXd::Zero(1), 1.0, 0.0), ValidationError);
  CHECK_THROWS_AS(simulate(ha, Eigen::VectorXd::Zero(1), 1.0, 0.3), ValidationError);
  CHECK_THROWS_AS(simulate(ha, Eigen::VectorXd::Zero(2), 1.0, 0.1), DimensionMismatch);
  CHECK_THROWS_AS(build_automaton(f, single_law(Eigen::MatrixXd::Zero(1, 2),
                                                Eigen::VectorXd::Zero(1),
                                                {Eigen::VectorXd::Constant(2, -1.0),
                                                 Eigen::VectorXd::Constant(2, 1.0)}),
                                  1.0),
                  DimensionMismatch);
}

TEST_CASE("infeasible start and infeasible exit are flagged") {
  auto f = expr::make_vector_field({"u1"}, 1, 1);
  // law pushes the state rightwards out of the narrow region
  auto sol = single_law(Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Ones(1),
                        box1(-1.0, 1.0));
  const auto ha = build_automaton(f, sol, 0.5);

  SECTION("start outside every region") {
    const auto traj = simulate(ha, Eigen::VectorXd::Constant(1, 3.0), 1.0, 0.1);
    CHECK(traj.infeasible);
    REQUIRE(traj.samples.size() == 1);
    CHECK(traj.samples.front().mode == -1);
  }

  SECTION("exit detected at a sampling instant") {
    const auto traj = simulate(ha, Eigen::VectorXd::Constant(1, 0.8), 4.0, 0.1);
    CHECK(traj.infeasible);
    const auto& last = traj.samples.back();
    CHECK(last.mode == -1);
    CHECK(last.x[0] > 1.0);
    // termination happens on the sampling grid
    CHECK(std::abs(last.t / 0.5 - std::round(last.t / 0.5)) < 1e-12);
    CHECK(last.t < 4.0);
  }
}

TEST_CASE("modes switch only at sampling instants") {
  const auto ha = double_integrator_automaton();
  REQUIRE(ha.mode_count() > 1);

  Eigen::VectorXd x0(2);
  x0 << -2.0, 1.5;
  const auto traj = simulate(ha, x0, 9.0, 0.02);
  REQUIRE_FALSE(traj.infeasible);

  int switches = 0;
  for (std::size_t i = 1; i < traj.samples.size(); ++i) {
    const auto& prev = traj.samples[i - 1];
    const auto& cur = traj.samples[i];
    if (cur.mode != prev.mode) {
      ++switches;
      const double ratio = cur.t / ha.Ts;
      CHECK(std::abs(ratio - std::round(ratio)) < 1e-9);
    }
  }
  CHECK(switches > 0);
}

TEST_CASE("sampled flow agrees with the evaluated control law") {
  const auto ha = double_integrator_automaton();
  std::mt19937 rng(71);
  std::uniform_real_distribution<double> dist(-3.0, 3.0);
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::VectorXd x(2);
    x << dist(rng), dist(rng);
    const auto mode = locate_mode(ha, x);
    const auto ev = mpc::eval_control(ha.solution, x);
    REQUIRE(mode.has_value() == ev.has_value());
    if (!mode) continue;
    CHECK(*mode == ev->second);
    const Eigen::VectorXd dx = ha.flow(x, *mode);
    const Eigen::VectorXd want = ha.field.eval(x, ev->first);
    CHECK((dx - want).lpNorm<Eigen::Infinity>() < 1e-12);
    ++checked;
  }
  CHECK(checked > 100);
}

TEST_CASE("closed-loop jacobian matches finite differences") {
  const auto ha = double_integrator_automaton();
  Eigen::VectorXd x(2);
  x << 0.4, -0.3;
  const auto mode = locate_mode(ha, x);
  REQUIRE(mode);
  const Eigen::MatrixXd J = ha.closed_loop_jac(x, *mode);
  const double h = 1e-6;
  for (int j = 0; j < 2; ++j) {
    Eigen::VectorXd xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    const Eigen::VectorXd col = (ha.flow(xp, *mode) - ha.flow(xm, *mode)) / (2 * h);
    CHECK((J.col(j) - col).lpNorm<Eigen::Infinity>() < 1e-6);
  }
}

TEST_CASE("halving the step shrinks the endpoint error like h^4") {
  const auto ha = double_integrator_automaton();
  Eigen::VectorXd x0(2);
  x0 << 0.6, -0.4;

  auto endpoint = [&](double h) {
    const auto traj = simulate(ha, x0, 4.0, h);
    REQUIRE_FALSE(traj.infeasible);
    return traj.samples.back().x;
  };
  const double d1 = (endpoint(0.1) - endpoint(0.05)).norm();
  const double d2 = (endpoint(0.05) - endpoint(0.025)).norm();
  CHECK(d1 < 1e-5);
  // fourth order: each halving cuts the defect by about 16
  CHECK(d2 < d1 / 8.0 + 1e-14);
}

TEST_CASE("held control replays the per-period reoptimization") {
  const auto prob = make_double_integrator();
  const auto ha = double_integrator_automaton(HoldKind::Zoh);
  const double h = 0.05;
  const long per = std::lround(ha.Ts / h);

  std::mt19937 rng(1234);
  std::uniform_real_distribution<double> dist(-1.5, 1.5);
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::VectorXd x0(2);
    x0 << dist(rng), dist(rng);
    const auto traj = simulate(ha, x0, 4.0, h);
    REQUIRE_FALSE(traj.infeasible);

    // replay: re-solve the finite-horizon problem at every period start
    Eigen::VectorXd x = x0;
    std::size_t idx = 0;
    for (int period = 0; period < 4; ++period) {
      const auto u = mpc::pointwise_oracle(prob, x);
      REQUIRE(u);
      for (long s = 0; s < per; ++s) {
        x = hybrid::detail::rk4_step(
            [&](const Eigen::VectorXd& y) { return ha.field.eval(y, *u); }, x, h);
        ++idx;
        REQUIRE(idx < traj.samples.size());
        CHECK((x - traj.samples[idx].x).lpNorm<Eigen::Infinity>() < 1e-5);
      }
    }
  }
}

TEST_CASE("state feedback and held control agree at vanishing step") {
  // both holds integrate the same discrete-time closed loop at the samples
  const auto ha_fb = double_integrator_automaton(HoldKind::StateFeedback);
  const auto ha_zoh = double_integrator_automaton(HoldKind::Zoh);
  Eigen::VectorXd x0(2);
  x0 << 1.0, 0.5;
  const auto t1 = simulate(ha_fb, x0, 9.0, 0.01);
  const auto t2 = simulate(ha_zoh, x0, 9.0, 0.01);
  REQUIRE_FALSE(t1.infeasible);
  REQUIRE_FALSE(t2.infeasible);
  // trajectories differ within periods but both loops regulate to the origin
  CHECK((t1.samples.back().x - t2.samples.back().x).norm() < 0.05);
  CHECK(t1.samples.back().x.norm() < 0.05);
  CHECK(t2.samples.back().x.norm() < 0.01);
}

TEST_CASE("regulation stays feasible over a long horizon") {
  const auto ha = double_integrator_automaton();
  Eigen::VectorXd x0(2);
  x0 << -1.0, 0.8;
  const auto traj = simulate(ha, x0, 9.0, 0.02);
  REQUIRE_FALSE(traj.infeasible);
  CHECK(traj.samples.back().t == Catch::Approx(9.0));
  CHECK(traj.samples.back().x.norm() < x0.norm());
}

TEST_CASE("csv export is stable and well formed") {
  auto f = expr::make_vector_field({"u1"}, 1, 1);
  auto sol = single_law(Eigen::MatrixXd::Constant(1, 1, -1.0),
                        Eigen::VectorXd::Zero(1), box1(-10.0, 10.0));
  const auto ha = build_automaton(f, sol, 1.0);
  const auto traj = simulate(ha, Eigen::VectorXd::Ones(1), 1.0, 0.25);

  const std::string csv = to_csv(traj);
  CHECK(csv.rfind("t,x1,mode\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);
  CHECK(csv == to_csv(simulate(ha, Eigen::VectorXd::Ones(1), 1.0, 0.25)));
}
