/*
 * cag: cell-abstraction-graph safety verification for the continuously
 * actuated taxiing benchmark.
 *
 * Exit codes: 0 verified / ok, 1 property violated or undetermined,
 * 2 usage or configuration error, 3 internal error.
 */
#include <omp.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "cag/config.hpp"
#include "cag/properties.hpp"
#include "cag/render.hpp"
#include "cag/spec_export.hpp"

namespace fs = std::filesystem;
using namespace cag;

namespace {

constexpr double kDeg = 3.14159265358979323846 / 180.0;

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> overrides;
  int jobs = 0;
};

void add_config_opts(CLI::App* cmd, CommonOpts* opts) {
  cmd->add_option("--config", opts->config_path, "run configuration file (INI)");
  cmd->add_option("--set", opts->overrides, "override a config key: section.key=value");
  cmd->add_option("--jobs", opts->jobs, "worker threads (0 = all cores)");
}

std::string hex16(uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_build_log(const CellGraph& g, const RunConfig& cfg, double seconds,
                     const std::string& path) {
  std::ofstream out(path);
  out << "config " << hex16(cfg.hash()) << "\n";
  out << "controller " << hex16(g.controller_hash()) << "\n";
  out << "cells " << g.num_cells() << "\n";
  int64_t unresolved = 0, saturated = 0, escalated = 0;
  std::map<int, int64_t> retry_hist;
  for (const CellRecord& rec : g.cells()) {
    ++retry_hist[rec.retries];
    if (rec.unresolved) ++unresolved;
    if (rec.la.saturated) ++saturated;
    if (rec.escalations > 0) ++escalated;
  }
  out << "unresolved " << unresolved << "\n";
  out << "saturated " << saturated << "\n";
  out << "margin_escalated " << escalated << "\n";
  for (const auto& [retries, count] : retry_hist) {
    out << "retries " << retries << " cells " << count << "\n";
  }
  out << "wall_seconds " << seconds << "\n";
}

int cmd_build_graph(const CommonOpts& copts, const std::string& out_path) {
  const RunConfig cfg = load_config(copts.config_path, copts.overrides);
  const ControlSource cs = cfg.make_controller();
  const Partition part = cfg.make_partition();
  const auto t0 = std::chrono::steady_clock::now();
  const CellGraph g = cat(cs, part, cfg.make_cat(), copts.jobs);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  save_graph(g, out_path);
  write_build_log(g, cfg, secs, out_path + ".log");
  std::printf("wrote %s: %lld cells, %.1f s\n", out_path.c_str(),
              static_cast<long long>(g.num_cells()), secs);
  return 0;
}

int cmd_verify(const std::string& graph_path, const std::string& property,
               const std::string& out_dir, double runway_halfwidth,
               std::vector<double> initial_box, int max_steps, double p2_extent,
               double min_safe_percent, bool snapshots) {
  const CellGraph g = load_graph(graph_path);
  fs::create_directories(out_dir);
  const std::string comment = "graph config " + hex16(g.config_hash());

  if (property == "p1") {
    const PropertyReport rep = verify_p1(g, runway_halfwidth);
    write_report_csv(rep, g.partition(), out_dir + "/p1_cells.csv");
    write_report_text(rep, g, out_dir + "/p1_report.txt");
    write_grid_svg(g.partition(), rep.grid, "P1 safe cells (" + comment + ")",
                   out_dir + "/p1_verdict.svg");
    write_grid_pgm(g.partition(), rep.grid, out_dir + "/p1_verdict.pgm");
    std::printf("P1 safe cells: %.2f%%\n", rep.percentage);
    return rep.percentage >= min_safe_percent ? 0 : 1;
  }

  if (initial_box.size() != 4) {
    throw ConfigError("p2 needs --initial-box p_lo p_hi theta_lo_deg theta_hi_deg");
  }
  const Box c0_box(Interval(initial_box[0], initial_box[1]),
                   Interval(initial_box[2] * kDeg, initial_box[3] * kDeg));
  const std::vector<int64_t> c0 = cells_in_box(g.partition(), c0_box);
  const PropertyReport rep = verify_p2(g, c0, max_steps);
  write_report_csv(rep, g.partition(), out_dir + "/p2_cells.csv");
  write_report_text(rep, g, out_dir + "/p2_report.txt");
  write_grid_svg(g.partition(), rep.grid, "P2 invariant set (" + comment + ")",
                 out_dir + "/p2_invariant.svg");
  write_grid_pgm(g.partition(), rep.grid, out_dir + "/p2_invariant.pgm");
  if (snapshots) {
    for (std::size_t k = 0; k < rep.step_sets.size(); ++k) {
      std::vector<uint8_t> grid(static_cast<std::size_t>(g.num_cells()), 0);
      for (int64_t c : rep.step_sets[k]) {
        if (c < g.num_cells()) grid[static_cast<std::size_t>(c)] = 1;
      }
      char name[64];
      std::snprintf(name, sizeof name, "/p2_step_%03zu", k);
      write_grid_svg(g.partition(), grid, "P2 reach set, step " + std::to_string(k),
                     out_dir + name + ".svg");
      write_grid_pgm(g.partition(), grid, out_dir + name + ".pgm");
    }
  }
  if (!rep.converged_at) {
    std::printf("P2 did not converge within %d steps\n", max_steps);
    return 1;
  }
  std::printf("P2 converged after %d steps; p extent [%.3f, %.3f] m\n", *rep.converged_at,
              rep.p_lo.value_or(0.0), rep.p_hi.value_or(0.0));
  const bool extent_ok =
      rep.p_lo.value_or(0.0) >= -p2_extent && rep.p_hi.value_or(0.0) <= p2_extent;
  return extent_ok ? 0 : 1;
}

int cmd_sweep(const CommonOpts& copts, const std::string& modes_csv,
              const std::string& out_dir) {
  const RunConfig cfg = load_config(copts.config_path, copts.overrides);
  const ControlSource cs = cfg.make_controller();
  const Partition part = cfg.make_partition();

  std::vector<SweepMode> modes;
  std::stringstream ss(modes_csv.empty() ? cfg.modes : modes_csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) modes.push_back(parse_sweep_mode(item));
  }
  const auto rows = frequency_sweep(cs, part, modes, cfg.make_cat(), cfg.runway_halfwidth,
                                    copts.jobs);
  fs::create_directories(out_dir);
  write_sweep_csv(rows, out_dir + "/sweep.csv");
  bool any_failed = false;
  for (const SweepRow& row : rows) {
    if (!row.error.empty()) {
      std::printf("%-8s FAILED: %s\n", row.mode.label.c_str(), row.error.c_str());
      any_failed = true;
      continue;
    }
    std::printf("%-8s safe %.2f%%  (unresolved %lld, %.1f s)\n", row.mode.label.c_str(),
                row.safe_percent, static_cast<long long>(row.unresolved_cells),
                row.build_seconds);
    if (row.report) {
      const std::string base = out_dir + "/p1_" + row.mode.label;
      write_grid_svg(part, row.report->grid, "P1 safe cells, " + row.mode.label, base + ".svg");
      write_grid_pgm(part, row.report->grid, base + ".pgm");
    }
  }
  return any_failed ? 1 : 0;
}

int cmd_export_queries(const CommonOpts& copts, const std::string& graph_path,
                       const std::string& out_dir) {
  const RunConfig cfg = load_config(copts.config_path, copts.overrides);
  const CellGraph g = load_graph(graph_path);
  const ControlSource cs = cfg.make_controller();
  const int64_t n = export_queries(g, cs, out_dir);
  std::printf("wrote %lld query files to %s\n", static_cast<long long>(n), out_dir.c_str());
  return 0;
}

int cmd_simulate(const CommonOpts& copts, double p0, double theta0_deg, double duration,
                 const std::string& out_path) {
  const RunConfig cfg = load_config(copts.config_path, copts.overrides);
  const ControlSource cs = cfg.make_controller();
  const Partition part = cfg.make_partition();
  const State s0{p0, theta0_deg * kDeg};
  if (part.cell_of(s0).is_sink()) {
    throw ConfigError("initial state lies outside the partition domain");
  }
  std::vector<double> latent(cfg.latent_dim, 0.0);
  const Trajectory traj =
      simulate(s0, cs.as_fn(latent), duration, cfg.sim_substep, cfg.make_plant());
  std::ofstream out(out_path);
  if (!out) throw IoError("cannot write trajectory csv " + out_path);
  out << "# config " << hex16(cfg.hash()) << "\n";
  out << "t,p,theta,phi\n";
  out.precision(17);
  for (const auto& s : traj.samples) {
    out << s.t << ',' << s.x.p << ',' << s.x.theta << ',' << s.phi << '\n';
  }
  std::printf("wrote %zu samples to %s%s\n", traj.samples.size(), out_path.c_str(),
              traj.saturated ? " (steering saturated)" : "");
  return 0;
}

int cmd_render(const std::string& graph_path, const std::string& out_dir) {
  const CellGraph g = load_graph(graph_path);
  fs::create_directories(out_dir);
  const Partition& part = g.partition();
  const auto n = static_cast<std::size_t>(g.num_cells());

  std::vector<uint8_t> resolved(n, 0), saturated(n, 0), escalated(n, 0);
  double u_max = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const CellRecord& rec = g.cell(static_cast<int64_t>(i));
    resolved[i] = rec.unresolved ? 0 : 1;
    saturated[i] = rec.la.saturated ? 0 : 1;
    escalated[i] = rec.escalations > 0 ? 0 : 1;
    u_max = std::max(u_max, rec.la.u.width());
  }
  write_grid_svg(part, resolved, "resolved cells (black = unresolved)",
                 out_dir + "/resolved.svg");
  write_grid_pgm(part, resolved, out_dir + "/resolved.pgm");
  write_grid_svg(part, saturated, "steering saturation (black = saturated witnesses)",
                 out_dir + "/saturated.svg");
  write_grid_svg(part, escalated, "audit escalations (black = escalated)",
                 out_dir + "/escalated.svg");
  std::printf("rendered %s (max U width %.3g rad)\n", out_dir.c_str(), u_max);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cell-abstraction-graph verification toolkit"};
  app.require_subcommand(1);

  CommonOpts copts;

  auto* build = app.add_subcommand("build-graph", "run the abstract transition computation");
  add_config_opts(build, &copts);
  std::string out_path = "graph.cag";
  build->add_option("--out", out_path, "output graph file")->required();

  auto* verify = app.add_subcommand("verify", "check a safety property on a graph");
  std::string graph_path, property = "p1", out_dir = "out";
  double runway_halfwidth = 10.0, p2_extent = 1.0, min_safe_percent = 0.0;
  std::vector<double> initial_box;
  int max_steps = 50;
  bool snapshots = false;
  verify->add_option("--graph", graph_path, "graph file")->required();
  verify->add_option("--property", property, "p1 | p2")
      ->check(CLI::IsMember({"p1", "p2"}))
      ->required();
  verify->add_option("--out-dir", out_dir, "artifact directory");
  verify->add_option("--runway-halfwidth", runway_halfwidth, "P1 runway half width [m]");
  verify->add_option("--min-safe-percent", min_safe_percent, "P1 exit-code threshold");
  verify->add_option("--initial-box", initial_box,
                     "P2 initial set: p_lo p_hi theta_lo_deg theta_hi_deg")
      ->expected(4);
  verify->add_option("--max-steps", max_steps, "P2 iteration limit");
  verify->add_option("--p2-extent", p2_extent, "P2 exit-code |p| threshold [m]");
  verify->add_flag("--snapshots", snapshots, "P2: write one reach-set figure per step");

  auto* sweep = app.add_subcommand("sweep", "frequency sweep: one P1 row per mode");
  add_config_opts(sweep, &copts);
  std::string modes_csv, sweep_out = "sweep_out";
  sweep->add_option("--modes", modes_csv, "comma list, e.g. 1Hz,2Hz,10Hz,100Hz,inf,inf+U");
  sweep->add_option("--out-dir", sweep_out, "artifact directory");

  auto* exportq = app.add_subcommand("export-queries", "emit conformance query files");
  add_config_opts(exportq, &copts);
  std::string eq_graph, eq_out = "queries";
  exportq->add_option("--graph", eq_graph, "graph file")->required();
  exportq->add_option("--out-dir", eq_out, "query directory");

  auto* sim = app.add_subcommand("simulate", "closed-loop RK4 trajectory to CSV");
  add_config_opts(sim, &copts);
  double p0 = 0.0, theta0_deg = 0.0, duration = 20.0;
  std::string sim_out = "trajectory.csv";
  sim->add_option("--p0", p0, "initial crosstrack position [m]")->required();
  sim->add_option("--theta0-deg", theta0_deg, "initial heading error [deg]");
  sim->add_option("--duration", duration, "simulated seconds");
  sim->add_option("--out", sim_out, "output CSV");

  auto* render = app.add_subcommand("render", "diagnostic heatmaps for a graph file");
  std::string render_graph, render_out = "render_out";
  render->add_option("--graph", render_graph, "graph file")->required();
  render->add_option("--out-dir", render_out, "artifact directory");

  try {
    app.parse(argc, argv);
    if (copts.jobs > 0) omp_set_num_threads(copts.jobs);
    if (build->parsed()) return cmd_build_graph(copts, out_path);
    if (verify->parsed()) {
      return cmd_verify(graph_path, property, out_dir, runway_halfwidth, initial_box,
                        max_steps, p2_extent, min_safe_percent, snapshots);
    }
    if (sweep->parsed()) return cmd_sweep(copts, modes_csv, sweep_out);
    if (exportq->parsed()) return cmd_export_queries(copts, eq_graph, eq_out);
    if (sim->parsed()) return cmd_simulate(copts, p0, theta0_deg, duration, sim_out);
    if (render->parsed()) return cmd_render(render_graph, render_out);
    return 2;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const HashMismatch& e) {
    std::cerr << "hash mismatch: " << e.what() << "\n";
    return 1;
  } catch (const NotConverged& e) {
    std::cerr << "not converged: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
}
