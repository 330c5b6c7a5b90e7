/*
 * abstraction.hpp
 *
 * Per-cell linear controller models: sample closed-loop witness
 * trajectories, build the abstraction region gamma, fit phi ~ a.x + b by
 * least squares and bound the residual uncertainty U from an independent
 * audit draw plus a safety margin.
 */
#pragma once

#include <cstdint>

#include "cag/controller.hpp"
#include "cag/geom.hpp"
#include "cag/partition.hpp"
#include "cag/plant.hpp"

namespace cag {

struct LinearizeConfig {
  std::size_t n_start = 64;    // witness start states per cell
  std::size_t n_fit = 512;     // regression samples in gamma
  std::size_t n_audit = 4096;  // fresh residual samples bounding U
  double horizon = 1.0;        // abstraction time step delta [s]
  double sim_substep = kDefaultSimSubstep;
  double margin = 0.10;   // relative widening of the audited residual bounds
  double u_floor = 1e-4;  // absolute half-width floor for U [rad]
  uint64_t seed = 1;
};

struct LinearAbstraction {
  double a_p = 0.0;      // d phi / d p
  double a_theta = 0.0;  // d phi / d theta
  double b = 0.0;        // offset [rad]
  Interval u;            // residual uncertainty, post margin, straddles 0
  Interval u_raw;        // audited residual extremes before margin/floor
  Box gamma;
  double bf_used = 0.0;
  std::size_t n_samples = 0;

  bool saturated = false;       // witness trajectories hit the steering limit
  bool degenerate_fit = false;  // near-singular normal equations, ridge used
  bool left_domain = false;     // witness trajectories left the partition domain

  /* Model output range over a state box: a.x + b + U. */
  Interval phi_range(const Box& sbox) const;
};

/* Witness data shared by all bloating-factor retries of one cell: the hull
 * does not depend on bf, so the simulations run once. */
struct CellWitness {
  Box hull;  // starts and every trajectory sample point
  bool saturated = false;
  bool left_domain = false;
};

CellWitness gather_witnesses(const ControlSource& cs, const Partition& part,
                             const CellId& cell, const LinearizeConfig& cfg,
                             const PlantParams& params);

/* Fit + audit over gamma = bloat(hull, bf). */
LinearAbstraction linearize_from_witness(const ControlSource& cs, const Partition& part,
                                         const CellId& cell, const CellWitness& witness,
                                         double bf, const LinearizeConfig& cfg);

/* The full per-cell linearization step. */
LinearAbstraction linearize(const ControlSource& cs, const Partition& part,
                            const CellId& cell, double bf, const LinearizeConfig& cfg,
                            const PlantParams& params);

/* Re-audit with a fresh stream; on residuals escaping U, fold them in and
 * double the margin, up to `rounds` times. Returns the number of escalation
 * rounds performed (0 = clean on the first audit). */
int audit_and_escalate(const ControlSource& cs, LinearAbstraction* la,
                       const Partition& part, const CellId& cell,
                       const LinearizeConfig& cfg, int rounds = 3);

/* Residual bounds -> U: extend to straddle zero, widen by margin and floor. */
Interval apply_margin(const Interval& raw, double margin, double floor);

}  // namespace cag
