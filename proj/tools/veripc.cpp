#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <veripc/cli.hpp>

int main(int argc, char** argv) {
  CLI::App app{
      "explicit MPC synthesis and bounded-time safety verification for "
      "sampled-data control loops"};
  app.require_subcommand(1);

  std::string model_path;
  std::string solution_out = "solution.json";
  auto* synth = app.add_subcommand(
      "synthesize", "compute the piecewise-affine explicit control law");
  synth->add_option("model", model_path, "model file (JSON)")->required();
  synth->add_option("-o,--out", solution_out, "solution output path");

  std::string verify_model, verify_solution, verify_out = ".";
  auto* verify = app.add_subcommand(
      "verify", "check bounded-time safety of the closed loop");
  verify->add_option("model", verify_model, "model file (JSON)")->required();
  verify->add_option("--solution", verify_solution,
                     "explicit law file (otherwise taken from the model or "
                     "synthesized on the fly)");
  verify->add_option("-o,--out", verify_out,
                     "directory for verdict.json and tube.json");

  std::string sim_model, sim_csv = "trajectory.csv";
  std::vector<double> sim_x0;
  double sim_tv = 10.0, sim_step = 0.01;
  auto* sim = app.add_subcommand(
      "simulate", "integrate a single closed-loop trajectory");
  sim->add_option("model", sim_model, "model file (JSON)")->required();
  sim->add_option("--x0", sim_x0, "initial state, comma separated")
      ->required()
      ->delimiter(',');
  sim->add_option("--tv", sim_tv, "time horizon");
  sim->add_option("--step", sim_step, "integration step (must divide the "
                                      "sampling period)");
  sim->add_option("-o,--out", sim_csv, "CSV output path");

  std::string plot_tube, plot_svg = "tube.svg";
  std::vector<int> plot_dims{0, 1};
  auto* plot =
      app.add_subcommand("plot", "render a reachtube file to a static SVG");
  plot->add_option("tube", plot_tube, "tube.json produced by verify")
      ->required();
  plot->add_option("--dims", plot_dims,
                   "two state indices to project onto (0-based)")
      ->delimiter(',')
      ->expected(2);
  plot->add_option("-o,--out", plot_svg, "SVG output path");

  CLI11_PARSE(app, argc, argv);

  if (synth->parsed())
    return veripc::cli::cmd_synthesize(model_path, solution_out, std::cerr);
  if (verify->parsed())
    return veripc::cli::cmd_verify(verify_model, verify_solution, verify_out,
                                   std::cerr);
  if (sim->parsed())
    return veripc::cli::cmd_simulate(sim_model, sim_x0, sim_tv, sim_step,
                                     sim_csv, std::cerr);
  if (plot->parsed())
    return veripc::cli::cmd_plot(plot_tube, plot_dims[0], plot_dims[1],
                                 plot_svg, std::cerr);
  return 1;
}
