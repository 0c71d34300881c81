#pragma once

// Model files and the on-disk JSON formats: plant dynamics as expression
// strings, an optional finite-horizon control problem, verification inputs,
// and serializers for explicit solutions, reachtubes, and verdicts.

#include <Eigen/Dense>

#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "expr.hpp"
#include "mpc.hpp"
#include "polyhedron.hpp"
#include "reach.hpp"

namespace veripc::model {

using json = nlohmann::json;

struct VerifySpec {
  poly::Box initial;
  std::vector<poly::Polyhedron> unsafe;
  double Tv = 0.0;
  reach::ReachConfig cfg;
};

struct ModelSpec {
  std::string name;
  int n = 0;
  int m = 0;
  std::vector<std::string> dynamics;
  std::optional<expr::VectorField> field;
  std::optional<mpc::MpcProblem> mpc_prob;
  std::string solution_file;  // empty when absent
  std::optional<VerifySpec> verify;
};

namespace detail {

inline Eigen::VectorXd to_vector(const json& j, const std::string& field) {
  if (!j.is_array()) throw ValidationError(field + ": expected an array");
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ValidationError(field + ": expected numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

inline Eigen::MatrixXd to_matrix(const json& j, const std::string& field) {
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw ValidationError(field + ": expected an array of rows");
  const std::size_t rows = j.size(), cols = j[0].size();
  Eigen::MatrixXd M(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols)
      throw ValidationError(field + ": ragged rows");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[r][c].is_number()) throw ValidationError(field + ": expected numbers");
      M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          j[r][c].get<double>();
    }
  }
  return M;
}

// Q and R accept "identity" as shorthand
inline Eigen::MatrixXd to_weight(const json& j, int dim, const std::string& field) {
  if (j.is_string()) {
    if (j.get<std::string>() == "identity")
      return Eigen::MatrixXd::Identity(dim, dim);
    throw ValidationError(field + ": unknown shorthand '" + j.get<std::string>() + "'");
  }
  return to_matrix(j, field);
}

inline json from_vector(const Eigen::VectorXd& v) {
  json j = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

inline json from_matrix(const Eigen::MatrixXd& M) {
  json j = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    j.push_back(row);
  }
  return j;
}

inline poly::Box to_box(const json& j, const std::string& field) {
  if (!j.is_object() || !j.contains("lo") || !j.contains("hi"))
    throw ValidationError(field + ": expected {lo, hi}");
  poly::Box b{to_vector(j["lo"], field + ".lo"), to_vector(j["hi"], field + ".hi")};
  if (b.lo.size() != b.hi.size() || (b.widths().array() < 0).any())
    throw ValidationError(field + ": lo/hi mismatch");
  return b;
}

inline poly::Polyhedron to_polyhedron(const json& j, const std::string& field) {
  if (j.contains("lo"))  // box shorthand
    return poly::Polyhedron::from_box(to_box(j, field));
  if (!j.contains("A") || !j.contains("b"))
    throw ValidationError(field + ": expected {A, b} or {lo, hi}");
  return {to_matrix(j["A"], field + ".A"), to_vector(j["b"], field + ".b")};
}

// user-supplied Jacobian entries must agree with the derived ones
inline void cross_check_jacobian(const expr::VectorField& field, const json& jac,
                                 int n, int m) {
  if (!jac.contains("Jx") || !jac.contains("Ju"))
    throw ValidationError("modelJac: expected {Jx, Ju}");
  expr::SymbolTable symbols{n, m, {}};
  auto parse_entries = [&](const json& j, int cols, const std::string& field) {
    if (!j.is_array() || static_cast<int>(j.size()) != n)
      throw ValidationError(field + ": expected " + std::to_string(n) + " rows");
    std::vector<std::vector<expr::Expression>> out;
    for (const auto& row : j) {
      if (!row.is_array() || static_cast<int>(row.size()) != cols)
        throw ValidationError(field + ": expected " + std::to_string(cols) +
                              " columns");
      std::vector<expr::Expression> r;
      for (const auto& e : row) r.push_back(expr::parse(e.get<std::string>(), symbols));
      out.push_back(std::move(r));
    }
    return out;
  };
  const auto jx = parse_entries(jac["Jx"], n, "modelJac.Jx");
  const auto ju = parse_entries(jac["Ju"], m, "modelJac.Ju");

  std::mt19937 rng(20240817);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd x(n), u(m);
    for (int i = 0; i < n; ++i) x[i] = dist(rng);
    for (int i = 0; i < m; ++i) u[i] = dist(rng);
    std::map<std::string, double> env;
    for (int i = 0; i < n; ++i) env["x" + std::to_string(i + 1)] = x[i];
    for (int i = 0; i < m; ++i) env["u" + std::to_string(i + 1)] = u[i];
    const Eigen::MatrixXd dx = field.jac_x_at(x, u);
    const Eigen::MatrixXd du = field.jac_u_at(x, u);
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) {
        const double got = expr::evaluate(jx[static_cast<std::size_t>(r)]
                                             [static_cast<std::size_t>(c)], env);
        if (std::abs(got - dx(r, c)) > 1e-6 * std::max(1.0, std::abs(dx(r, c))))
          throw ValidationError("modelJac.Jx[" + std::to_string(r) + "][" +
                                std::to_string(c) +
                                "] disagrees with the derived jacobian");
      }
      for (int c = 0; c < m; ++c) {
        const double got = expr::evaluate(ju[static_cast<std::size_t>(r)]
                                             [static_cast<std::size_t>(c)], env);
        if (std::abs(got - du(r, c)) > 1e-6 * std::max(1.0, std::abs(du(r, c))))
          throw ValidationError("modelJac.Ju[" + std::to_string(r) + "][" +
                                std::to_string(c) +
                                "] disagrees with the derived jacobian");
      }
    }
  }
}

}  // namespace detail

inline mpc::MpcProblem parse_mpc(const json& j, const expr::VectorField& field) {
  const int n = field.state_dim(), m = field.input_dim();
  mpc::MpcProblem p;
  if (!j.contains("N") || !j.contains("Ts"))
    throw ValidationError("MPCprob: N and Ts are required");
  p.N = j["N"].get<int>();
  p.Ts = j["Ts"].get<double>();
  p.Q = j.contains("Q") ? detail::to_weight(j["Q"], n, "MPCprob.Q")
                        : Eigen::MatrixXd::Identity(n, n);
  p.R = j.contains("R") ? detail::to_weight(j["R"], m, "MPCprob.R")
                        : Eigen::MatrixXd::Identity(m, m);
  if (j.contains("norm")) {
    const std::string norm = j["norm"].get<std::string>();
    if (norm == "inf")
      p.norm_kind = mpc::NormKind::Inf;
    else if (norm == "one")
      p.norm_kind = mpc::NormKind::One;
    else
      throw ValidationError("MPCprob.norm: expected 'inf' or 'one'");
  }
  for (const char* req : {"u_min", "u_max", "x_min", "x_max"})
    if (!j.contains(req))
      throw ValidationError(std::string("MPCprob.") + req + " is required");
  p.u_min = detail::to_vector(j["u_min"], "MPCprob.u_min");
  p.u_max = detail::to_vector(j["u_max"], "MPCprob.u_max");
  p.x_min = detail::to_vector(j["x_min"], "MPCprob.x_min");
  p.x_max = detail::to_vector(j["x_max"], "MPCprob.x_max");
  if (j.contains("A_d") != j.contains("B_d"))
    throw ValidationError("MPCprob: A_d and B_d must be given together");
  if (j.contains("A_d")) {
    p.A_d = detail::to_matrix(j["A_d"], "MPCprob.A_d");
    p.B_d = detail::to_matrix(j["B_d"], "MPCprob.B_d");
  } else {
    // discretize the linearization at the origin
    const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(n);
    const Eigen::VectorXd u0 = Eigen::VectorXd::Zero(m);
    const auto [Ad, Bd] = mpc::discretize(field.jac_x_at(x0, u0),
                                          field.jac_u_at(x0, u0), p.Ts);
    p.A_d = Ad;
    p.B_d = Bd;
  }
  p.param_domain = j.contains("domain")
                       ? detail::to_box(j["domain"], "MPCprob.domain")
                       : poly::Box{p.x_min, p.x_max};
  p.validate();
  return p;
}

inline ModelSpec load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open file");
  json j;
  try {
    j = json::parse(in, nullptr, true, true);  // comments permitted
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }

  ModelSpec spec;
  spec.name = j.value("name", std::string("model"));
  if (!j.contains("n") || !j.contains("m"))
    throw ValidationError(path + ": n and m are required");
  spec.n = j["n"].get<int>();
  spec.m = j["m"].get<int>();
  if (spec.n < 1 || spec.m < 1)
    throw ValidationError(path + ": dimensions must be positive");

  if (!j.contains("flowEq") || !j["flowEq"].is_array())
    throw ValidationError(path + ": flowEq must be a list of expressions");
  for (const auto& e : j["flowEq"]) spec.dynamics.push_back(e.get<std::string>());
  if (static_cast<int>(spec.dynamics.size()) != spec.n)
    throw ValidationError(path + ": flowEq arity differs from n");
  spec.field = expr::make_vector_field(spec.dynamics, spec.n, spec.m);

  if (j.contains("modelJac"))
    detail::cross_check_jacobian(*spec.field, j["modelJac"], spec.n, spec.m);

  if (j.contains("MPCprob")) spec.mpc_prob = parse_mpc(j["MPCprob"], *spec.field);
  if (j.contains("MPCsol")) spec.solution_file = j["MPCsol"].get<std::string>();
  if (!spec.mpc_prob && spec.solution_file.empty())
    throw ValidationError(path + ": one of MPCprob or MPCsol is required");
  if (spec.mpc_prob &&
      (spec.mpc_prob->state_dim() != spec.n || spec.mpc_prob->input_dim() != spec.m))
    throw ValidationError(path + ": MPCprob dimensions differ from the plant");

  if (j.contains("initStates")) {
    VerifySpec v;
    v.initial = detail::to_box(j["initStates"], "initStates");
    if (v.initial.dim() != spec.n)
      throw ValidationError(path + ": initStates dimension differs from n");
    if (j.contains("unsafeStates")) {
      int idx = 0;
      for (const auto& u : j["unsafeStates"]) {
        auto P = detail::to_polyhedron(u, "unsafeStates[" + std::to_string(idx) + "]");
        if (P.dim() != spec.n)
          throw ValidationError(path + ": unsafeStates dimension differs from n");
        v.unsafe.push_back(std::move(P));
        ++idx;
      }
    }
    if (!j.contains("Tv")) throw ValidationError(path + ": Tv is required to verify");
    v.Tv = j["Tv"].get<double>();
    if (!(v.Tv > 0)) throw ValidationError(path + ": Tv must be positive");
    if (j.contains("vPar")) {
      const auto& vp = j["vPar"];
      if (vp.contains("max_partitions"))
        v.cfg.max_partitions = vp["max_partitions"].get<long>();
      if (vp.contains("steps_per_period"))
        v.cfg.steps_per_period = vp["steps_per_period"].get<int>();
      if (vp.contains("bloat_safety"))
        v.cfg.bloat_safety = vp["bloat_safety"].get<double>();
      if (vp.contains("containment_tol"))
        v.cfg.containment_tol = vp["containment_tol"].get<double>();
      if (vp.contains("max_split_depth"))
        v.cfg.max_split_depth = vp["max_split_depth"].get<int>();
      if (vp.contains("threads")) v.cfg.threads = vp["threads"].get<int>();
    }
    spec.verify = std::move(v);
  }
  return spec;
}

inline json write_model(const ModelSpec& spec) {
  json j;
  j["name"] = spec.name;
  j["n"] = spec.n;
  j["m"] = spec.m;
  j["flowEq"] = spec.dynamics;
  if (spec.mpc_prob) {
    const auto& p = *spec.mpc_prob;
    json mj;
    mj["N"] = p.N;
    mj["Ts"] = p.Ts;
    mj["Q"] = detail::from_matrix(p.Q);
    mj["R"] = detail::from_matrix(p.R);
    mj["norm"] = p.norm_kind == mpc::NormKind::Inf ? "inf" : "one";
    mj["u_min"] = detail::from_vector(p.u_min);
    mj["u_max"] = detail::from_vector(p.u_max);
    mj["x_min"] = detail::from_vector(p.x_min);
    mj["x_max"] = detail::from_vector(p.x_max);
    mj["A_d"] = detail::from_matrix(p.A_d);
    mj["B_d"] = detail::from_matrix(p.B_d);
    mj["domain"] = {{"lo", detail::from_vector(p.param_domain.lo)},
                    {"hi", detail::from_vector(p.param_domain.hi)}};
    j["MPCprob"] = std::move(mj);
  }
  if (!spec.solution_file.empty()) j["MPCsol"] = spec.solution_file;
  if (spec.verify) {
    const auto& v = *spec.verify;
    j["initStates"] = {{"lo", detail::from_vector(v.initial.lo)},
                       {"hi", detail::from_vector(v.initial.hi)}};
    json us = json::array();
    for (const auto& U : v.unsafe)
      us.push_back({{"A", detail::from_matrix(U.A())}, {"b", detail::from_vector(U.b())}});
    j["unsafeStates"] = std::move(us);
    j["Tv"] = v.Tv;
    j["vPar"] = {{"max_partitions", v.cfg.max_partitions},
                 {"steps_per_period", v.cfg.steps_per_period},
                 {"bloat_safety", v.cfg.bloat_safety},
                 {"containment_tol", v.cfg.containment_tol},
                 {"max_split_depth", v.cfg.max_split_depth},
                 {"threads", v.cfg.threads}};
  }
  return j;
}

// explicit solution files carry Ts so a model with only MPCsol can rebuild
// the closed-loop automaton
inline json write_solution(const mpc::ExplicitSolution& sol, double Ts) {
  json j;
  j["k"] = sol.k();
  j["Ts"] = Ts;
  json regions = json::array();
  for (const auto& cr : sol.regions) {
    json r;
    r["A"] = detail::from_matrix(cr.region.A());
    r["b"] = detail::from_vector(cr.region.b());
    r["F"] = detail::from_matrix(cr.law.F);
    r["G"] = detail::from_vector(cr.law.G);
    r["active_set"] = cr.active_set;
    regions.push_back(std::move(r));
  }
  j["regions"] = std::move(regions);
  return j;
}

inline std::pair<mpc::ExplicitSolution, double> read_solution(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open solution file");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  if (!j.contains("regions") || !j["regions"].is_array() || j["regions"].empty())
    throw ValidationError(path + ": no regions in solution file");
  const double Ts = j.value("Ts", 1.0);
  mpc::ExplicitSolution sol;
  for (const auto& r : j["regions"]) {
    mpc::CriticalRegion cr{
        poly::Polyhedron(detail::to_matrix(r["A"], "region.A"),
                         detail::to_vector(r["b"], "region.b")),
        {detail::to_matrix(r["F"], "region.F"), detail::to_vector(r["G"], "region.G")},
        {}};
    if (r.contains("active_set"))
      cr.active_set = r["active_set"].get<std::vector<int>>();
    sol.regions.push_back(std::move(cr));
  }
  if (j.contains("k") && j["k"].get<int>() != sol.k())
    throw ValidationError(path + ": region count disagrees with k");
  return {std::move(sol), Ts};
}

inline const char* kind_name(reach::VerdictKind k) {
  switch (k) {
    case reach::VerdictKind::RobustSafe: return "RobustSafe";
    case reach::VerdictKind::MaxPart: return "MaxPart";
    case reach::VerdictKind::Infeasible: return "Infeasible";
  }
  return "Infeasible";
}

inline json write_verdict(const reach::Verdict& v, double wall_time_s) {
  json j;
  j["kind"] = kind_name(v.kind);
  j["detail"] = v.detail;
  j["partitions_used"] = v.partitions_used;
  j["wall_time_s"] = wall_time_s;
  return j;
}

// the tube file is self-contained for plotting: initial box, unsafe sets,
// and the verdict ride along with the segments
inline json write_tube(const reach::Verdict& v, double Tv, double Ts,
                       const poly::Box& initial,
                       const std::vector<poly::Polyhedron>& unsafe) {
  json j;
  j["Tv"] = Tv;
  j["Ts"] = Ts;
  j["kind"] = kind_name(v.kind);
  j["initial"] = {{"lo", detail::from_vector(initial.lo)},
                  {"hi", detail::from_vector(initial.hi)}};
  json us = json::array();
  for (const auto& U : unsafe)
    us.push_back({{"A", detail::from_matrix(U.A())}, {"b", detail::from_vector(U.b())}});
  j["unsafe"] = std::move(us);
  json segments = json::array();
  for (const auto& s : v.tube.segments)
    segments.push_back({{"t0", s.t_start},
                        {"t1", s.t_end},
                        {"lo", detail::from_vector(s.enclosure.lo)},
                        {"hi", detail::from_vector(s.enclosure.hi)},
                        {"mode", s.mode}});
  j["segments"] = std::move(segments);
  return j;
}

}  // namespace veripc::model
