/*
 * reach.hpp
 *
 * Sound one-time-step reachability for the closed loop under a per-cell
 * linear controller model: an interval Picard-style a-priori enclosure with
 * first-order tightening, boxes only. A zero-order-hold variant supports
 * fixed-frequency baselines.
 */
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cag/abstraction.hpp"
#include "cag/geom.hpp"
#include "cag/partition.hpp"
#include "cag/plant.hpp"

namespace cag {

struct EnclosureDiverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FlowStep {
  double t0 = 0.0;
  double t1 = 0.0;
  Box box;  // encloses every solution over [t0, t1]
};

/// Time-indexed enclosure sequence tiling [0, horizon]; the last step is the
/// degenerate interval [horizon, horizon] carrying the endpoint box. When a
/// tracking domain is in use and every solution has left it, the pipe ends
/// early with absorbed = true (the sink owns those solutions from then on).
struct Flowpipe {
  std::vector<FlowStep> steps;
  double horizon = 0.0;
  bool absorbed = false;

  const Box& final_box() const { return steps.back().box; }
};

struct ReachResult {
  std::vector<int64_t> final_cells;         // sorted linear ids, sink = num_cells
  std::vector<int64_t> intermediate_cells;  // sorted, superset of final
  Flowpipe flowpipe;
  bool exited_gamma = false;
};

inline constexpr int kDefaultSubsteps = 64;

/* Enclose all solutions of the closed loop with phi(x) in a.x + b + U
 * (saturated to +-phi_limit), x constrained to la.gamma, over [0, horizon].
 * start must be contained in la.gamma. track_domain, when given, absorbs:
 * integration stops once the enclosure lies fully outside it. */
Flowpipe flow_continuous(const LinearAbstraction& la, const Box& start,
                         const PlantParams& params, double horizon, int n_substeps,
                         bool* exited_gamma, const Box* track_domain = nullptr);

ReachResult reach_continuous(const LinearAbstraction& la, const Box& start,
                             const PlantParams& params, const Partition& part,
                             double horizon = 1.0, int n_substeps = kDefaultSubsteps);

/* Zero-order hold: phi is the constant interval phi_range for the whole
 * hold period. */
Flowpipe flow_zoh(const Interval& phi_range, const Box& start, const PlantParams& params,
                  double hold, int n_substeps);

ReachResult reach_zoh(const Interval& phi_range, const Box& start, const PlantParams& params,
                      const Partition& part, double hold, int n_substeps);

/* Fixed-frequency transition over a full abstraction horizon: chains
 * ceil(horizon * frequency) holds, refreshing phi from the linear model's
 * output range over the box at each hold start. Containment per hold start
 * and enclosure, like the continuous operator. */
Flowpipe flow_fixed_chain(const LinearAbstraction& la, const Box& start,
                          const PlantParams& params, double horizon, double frequency,
                          int n_substeps_per_horizon, bool* exited_gamma,
                          const Box* track_domain = nullptr);

/* Map a flowpipe onto the partition: final cells from the last enclosure,
 * intermediate cells from every enclosure. An absorbed pipe's only final
 * cell is the sink. */
void cells_touched(const Flowpipe& fp, const Partition& part,
                   std::vector<int64_t>* final_cells, std::vector<int64_t>* intermediate);

/* CSV export (time_lo, time_hi, p_lo, p_hi, theta_lo, theta_hi). */
void write_flowpipe_csv(const Flowpipe& fp, const std::string& path);

}  // namespace cag
