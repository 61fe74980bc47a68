#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dloplace/commands.hpp"

namespace {

// "frame:dx:dy", offsets in meters.
dloplace::Disturbance parse_disturbance(const std::string& text) {
  const auto a = text.find(':');
  const auto b = text.find(':', a == std::string::npos ? a : a + 1);
  if (a == std::string::npos || b == std::string::npos) {
    throw dloplace::UsageError("disturbance must be frame:dx:dy, got '" + text + "'");
  }
  dloplace::Disturbance d;
  try {
    d.frame = std::stoul(text.substr(0, a));
    d.dx = dloplace::parse_double(text.substr(a + 1, b - a - 1));
    d.dy = dloplace::parse_double(text.substr(b + 1));
  } catch (const std::exception&) {
    throw dloplace::UsageError("disturbance must be frame:dx:dy, got '" + text + "'");
  }
  return d;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Elastica-based rolling placement of deformable linear objects"};
  app.require_subcommand(1);

  std::string config;
  auto* cfg_cmd = app.add_subcommand("config", "Print the resolved configuration");
  std::string cfg_out;
  cfg_cmd->add_option("-c,--config", config, "Configuration JSON");
  cfg_cmd->add_option("-o,--out", cfg_out, "Output file (default stdout)");

  auto* plan = app.add_subcommand("plan", "Plan a three-stage placement");
  std::string start, plan_out;
  plan->add_option("-c,--config", config, "Configuration JSON");
  plan->add_option("-s,--start", start, "Start JSON file or inline object")->required();
  plan->add_option("-o,--out", plan_out, "Plan JSON output")->required();

  auto* sim = app.add_subcommand("simulate", "Run the closed-loop controller");
  std::string plan_in, sim_dir;
  bool corpus = false;
  std::vector<std::string> disturb;
  sim->add_option("-c,--config", config, "Configuration JSON");
  sim->add_option("-p,--plan", plan_in, "Plan JSON");
  sim->add_flag("--corpus", corpus, "Simulate the generated multi-path corpus");
  sim->add_option("-d,--disturb", disturb, "Rigid displacement frame:dx:dy (meters)");
  sim->add_option("-o,--out-dir", sim_dir, "Output directory (default DLO_OUTPUT_DIR)");

  auto* fit = app.add_subcommand("fit", "Fit elastica parameters to observed points");
  std::string points, fit_out;
  fit->add_option("-i,--points", points, "Points CSV or shape CSV")->required();
  fit->add_option("-c,--config", config, "Configuration JSON");
  fit->add_option("-o,--out", fit_out, "CandidateSet JSON output (default stdout)");

  auto* ds = app.add_subcommand("dataset-gen", "Emit the labelled elastica shape grid");
  std::string ds_dir;
  dloplace::DatasetOptions ds_opt;
  ds->add_option("-c,--config", config, "Configuration JSON");
  ds->add_option("-o,--out-dir", ds_dir, "Output directory (default DLO_OUTPUT_DIR)");
  ds->add_option("--k-stride", ds_opt.k_stride, "Keep every n-th modulus")->check(CLI::PositiveNumber);
  ds->add_option("--Ltilde-stride", ds_opt.Ltilde_stride, "Keep every n-th period length")
      ->check(CLI::PositiveNumber);

  auto* render = app.add_subcommand("render", "Draw plans, shapes and points as SVG");
  std::vector<std::string> render_in;
  std::string svg_out;
  dloplace::RenderOptions r_opt;
  render->add_option("inputs", render_in, "Plan JSON, shape CSV or points CSV files")->required();
  render->add_option("-o,--out", svg_out, "SVG output")->required();
  render->add_option("--every", r_opt.every, "Draw every n-th plan node")->check(CLI::PositiveNumber);
  render->add_option("--width", r_opt.width, "Canvas width in pixels")->check(CLI::PositiveNumber);

  auto* stats = app.add_subcommand("stats", "Recompute error statistics from a frames CSV");
  std::string frames, stats_out;
  stats->add_option("-i,--frames", frames, "frames.csv")->required();
  stats->add_option("-o,--out", stats_out, "Statistics JSON output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? dloplace::kExitOk : dloplace::kExitUsage;
  }

  auto& out = std::cout;
  auto& err = std::cerr;
  if (cfg_cmd->parsed()) return dloplace::cmd_config(config, cfg_out, out, err);
  if (plan->parsed()) return dloplace::cmd_plan(config, start, plan_out, out, err);
  if (sim->parsed()) {
    dloplace::SimulateOptions opt;
    opt.corpus = corpus;
    try {
      for (const auto& d : disturb) opt.disturbances.push_back(parse_disturbance(d));
    } catch (const dloplace::UsageError& e) {
      err << "usage: " << e.what() << "\n";
      return dloplace::kExitUsage;
    }
    return dloplace::cmd_simulate(config, plan_in, sim_dir, opt, out, err);
  }
  if (fit->parsed()) return dloplace::cmd_fit(points, config, fit_out, out, err);
  if (ds->parsed()) return dloplace::cmd_dataset_gen(config, ds_dir, ds_opt, out, err);
  if (render->parsed()) return dloplace::cmd_render(render_in, svg_out, r_opt, out, err);
  if (stats->parsed()) return dloplace::cmd_stats(frames, stats_out, out, err);
  return dloplace::kExitUsage;
}
