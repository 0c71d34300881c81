#pragma once

// Command implementations behind the veripc executable. Each returns the
// process exit code: 0 success / RobustSafe, 2 MaxPart, 3 Infeasible,
// 1 any error. Human-readable progress goes to the log stream; all file
// output is byte-deterministic.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "hybrid.hpp"
#include "model.hpp"
#include "mpc.hpp"
#include "reach.hpp"
#include "svg.hpp"

namespace veripc::cli {

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write " + path);
  out << text;
}

inline std::string resolve_near(const std::string& path,
                                const std::string& anchor_file) {
  namespace fs = std::filesystem;
  if (path.empty() || fs::exists(path)) return path;
  const auto sibling = fs::path(anchor_file).parent_path() / path;
  if (fs::exists(sibling)) return sibling.string();
  return path;
}

// solution precedence: explicit override, then the model's solution file,
// then on-the-fly synthesis from the control problem
inline std::pair<mpc::ExplicitSolution, double> resolve_solution(
    const model::ModelSpec& spec, const std::string& model_path,
    const std::string& override_path, std::ostream& log) {
  std::string path = override_path.empty() ? spec.solution_file : override_path;
  path = resolve_near(path, model_path);
  if (!path.empty()) {
    auto [sol, ts] = model::read_solution(path);
    log << "loaded explicit law: " << sol.regions.size() << " regions from "
        << path << "\n";
    return {std::move(sol), ts};
  }
  if (!spec.mpc_prob)
    throw ValidationError(
        "no explicit law available: model has neither MPCprob nor MPCsol");
  const auto t0 = std::chrono::steady_clock::now();
  auto plp = mpc::build_parametric_lp(*spec.mpc_prob);
  auto sol = mpc::solve_mplp(plp, spec.mpc_prob->param_domain);
  log << "synthesized explicit law: " << sol.regions.size() << " regions in "
      << seconds_since(t0) << " s\n";
  return {std::move(sol), spec.mpc_prob->Ts};
}

inline void apply_thread_env(reach::ReachConfig& cfg) {
  if (const char* env = std::getenv("VERIPC_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) cfg.threads = std::min(v, 64);
  }
}

}  // namespace detail

inline int cmd_synthesize(const std::string& model_path,
                          const std::string& out_path, std::ostream& log) {
  try {
    const auto spec = model::load_model(model_path);
    if (!spec.mpc_prob)
      throw ValidationError("synthesize: model has no MPCprob section");
    const auto t0 = std::chrono::steady_clock::now();
    auto plp = mpc::build_parametric_lp(*spec.mpc_prob);
    auto sol = mpc::solve_mplp(plp, spec.mpc_prob->param_domain);
    const double wall = detail::seconds_since(t0);
    detail::write_text(out_path,
                       model::write_solution(sol, spec.mpc_prob->Ts).dump(2) + "\n");
    log << spec.name << ": " << sol.regions.size() << " regions in " << wall
        << " s, wrote " << out_path << "\n";
    return 0;
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return 1;
  }
}

inline int cmd_verify(const std::string& model_path,
                      const std::string& solution_path,
                      const std::string& out_dir, std::ostream& log) {
  try {
    const auto spec = model::load_model(model_path);
    if (!spec.verify)
      throw ValidationError("verify: model has no initStates/Tv section");
    auto [sol, ts] =
        detail::resolve_solution(spec, model_path, solution_path, log);
    const auto ha = hybrid::build_automaton(*spec.field, std::move(sol), ts,
                                            hybrid::HoldKind::StateFeedback);
    auto cfg = spec.verify->cfg;
    detail::apply_thread_env(cfg);
    const auto t0 = std::chrono::steady_clock::now();
    const auto verdict = reach::compute_reach(ha, spec.verify->initial,
                                              spec.verify->Tv,
                                              spec.verify->unsafe, cfg);
    const double wall = detail::seconds_since(t0);
    log << spec.name << ": " << model::kind_name(verdict.kind) << " in " << wall
        << " s, " << verdict.tube.segments.size() << " tube segments, "
        << verdict.partitions_used << " refinements\n";
    if (!verdict.detail.empty()) log << "  " << verdict.detail << "\n";
    std::filesystem::create_directories(out_dir.empty() ? "." : out_dir);
    const auto dir = std::filesystem::path(out_dir.empty() ? "." : out_dir);
    detail::write_text((dir / "verdict.json").string(),
                       model::write_verdict(verdict, 0.0).dump(2) + "\n");
    detail::write_text(
        (dir / "tube.json").string(),
        model::write_tube(verdict, spec.verify->Tv, ts, spec.verify->initial,
                          spec.verify->unsafe)
                .dump(2) +
            "\n");
    switch (verdict.kind) {
      case reach::VerdictKind::RobustSafe: return 0;
      case reach::VerdictKind::MaxPart: return 2;
      case reach::VerdictKind::Infeasible: return 3;
    }
    return 1;
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return 1;
  }
}

inline int cmd_simulate(const std::string& model_path,
                        const std::vector<double>& x0_values, double tv,
                        double step, const std::string& out_csv,
                        std::ostream& log) {
  try {
    const auto spec = model::load_model(model_path);
    if (static_cast<int>(x0_values.size()) != spec.n)
      throw BadDims("simulate: --x0 needs " + std::to_string(spec.n) +
                    " components");
    auto [sol, ts] = detail::resolve_solution(spec, model_path, "", log);
    const auto ha = hybrid::build_automaton(*spec.field, std::move(sol), ts,
                                            hybrid::HoldKind::StateFeedback);
    Eigen::VectorXd x0(spec.n);
    for (int i = 0; i < spec.n; ++i) x0[i] = x0_values[static_cast<std::size_t>(i)];
    const auto traj = hybrid::simulate(ha, x0, tv, step);
    detail::write_text(out_csv, hybrid::to_csv(traj));
    log << spec.name << ": " << traj.samples.size() << " samples to " << out_csv;
    if (traj.infeasible) {
      log << " (trajectory left the feasible set at t="
          << traj.samples.back().t << ")\n";
      return 3;
    }
    log << "\n";
    return 0;
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return 1;
  }
}

inline int cmd_plot(const std::string& tube_path, int dim_x, int dim_y,
                    const std::string& out_svg, std::ostream& log) {
  try {
    std::ifstream in(tube_path);
    if (!in) throw ParseError("cannot open file: " + tube_path);
    nlohmann::json tube;
    try {
      tube = nlohmann::json::parse(in, nullptr, true, true);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(tube_path + ": " + e.what());
    }
    detail::write_text(out_svg, svg::render_tube(tube, dim_x, dim_y));
    log << "wrote " << out_svg << "\n";
    return 0;
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace veripc::cli
