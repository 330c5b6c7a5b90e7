/*
 * properties.hpp
 *
 * The two taxiing safety properties over a cell abstraction graph: runway
 * containment (P1, backward reachability from the unsafe seeds) and
 * convergence toward the centerline (P2, forward image iteration to an
 * invariant set), plus the controller-frequency sweep experiment.
 */
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cag/graph.hpp"

namespace cag {

enum class PropertyKind { kP1, kP2 };

struct PropertyReport {
  PropertyKind property = PropertyKind::kP1;
  ActuationMode mode = ActuationMode::kContinuous;
  double frequency = 0.0;

  /* P1: verified-safe cells. P2: the converged invariant set. Sorted linear
   * ids; may include the sink id for P2. */
  std::vector<int64_t> result_cells;
  double percentage = 0.0;  // share of non-sink cells in result_cells

  std::optional<int> converged_at;               // P2: image steps until invariance
  std::vector<std::vector<int64_t>> step_sets;   // P2: set series per step
  std::optional<double> p_lo, p_hi;              // P2: p-extent of the non-sink result

  /* Per-cell verdict, linear order: 1 = in result, 0 = not. */
  std::vector<uint8_t> grid;
};

struct NotConverged : GraphError {
  using GraphError::GraphError;
};

/* Backward reachability from {sink} + cells touching |p| >= halfwidth; a
 * cell whose intermediate sets touch the seeds counts as a seed too, so
 * mid-step excursions are covered. */
PropertyReport verify_p1(const CellGraph& g, double runway_halfwidth = 10.0);

/* Image iteration of C0 until image(S) is contained in S (then image(S) is
 * an invariant set) or max_steps. Does not throw on non-convergence; the
 * report's converged_at stays empty. */
PropertyReport verify_p2(const CellGraph& g, const std::vector<int64_t>& c0, int max_steps);

/* All non-sink cells whose box intersects the given state box. */
std::vector<int64_t> cells_in_box(const Partition& part, const Box& b);

struct SweepMode {
  std::string label;        // "1Hz", "inf", "inf+U", ...
  bool continuous = false;
  double frequency = 0.0;   // fixed modes
  bool with_margin = true;  // margin+floor disabled for the bare "inf" row
};

SweepMode parse_sweep_mode(const std::string& label);

struct SweepRow {
  SweepMode mode;
  double safe_percent = 0.0;
  int64_t unresolved_cells = 0;
  double build_seconds = 0.0;
  std::string error;  // nonempty when this mode failed
  std::optional<PropertyReport> report;
};

/* One graph build + P1 verdict per requested mode, in request order. */
std::vector<SweepRow> frequency_sweep(const ControlSource& cs, const Partition& part,
                                      const std::vector<SweepMode>& modes,
                                      const CatConfig& base_cfg, double runway_halfwidth,
                                      int jobs);

/* Report writers. */
void write_report_csv(const PropertyReport& rep, const Partition& part,
                      const std::string& path);
void write_report_text(const PropertyReport& rep, const CellGraph& g,
                       const std::string& path);
void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path);

}  // namespace cag
