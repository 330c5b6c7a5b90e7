/*
 * plant.hpp
 *
 * Continuous-time taxiing dynamics, closed-loop RK4 simulation, and the
 * interval lift of the vector field.
 *
 *   dp/dt     = v * sin(theta)
 *   dtheta/dt = (v / L) * tan(phi)
 *
 * State convention everywhere: dimension 0 is crosstrack position p [m],
 * dimension 1 is heading error theta [rad].
 */
#pragma once

#include <functional>
#include <vector>

#include "cag/geom.hpp"

namespace cag {

struct PlantError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct PhiOutOfRange : PlantError {
  using PlantError::PlantError;
};

struct PlantParams {
  double v = 5.0;                                // taxi speed [m/s]
  double L = 5.0;                                // wheelbase [m]
  double phi_limit = 80.0 * 3.14159265358979323846 / 180.0;  // steering saturation [rad]

  void validate() const;
};

struct State {
  double p = 0.0;
  double theta = 0.0;
};

struct Deriv {
  double dp = 0.0;
  double dtheta = 0.0;
};

struct TrajectorySample {
  double t = 0.0;
  State x;
  double phi = 0.0;  // applied (post-saturation) steering at this sample
};

/// Closed-loop trajectory at uniform substep spacing.
struct Trajectory {
  std::vector<TrajectorySample> samples;
  double step = 0.0;
  bool saturated = false;  // controller output hit the steering limit somewhere
};

/* Steering command source; latent handling and network evaluation live in
 * the controller module, the plant only needs state -> raw phi. */
using ControlFn = std::function<double(const State&)>;

/* Vector field at a point. Requires |phi| <= phi_limit. */
Deriv dynamics(const State& s, double phi, const PlantParams& params);

/* Vector field over a state box and steering interval. phi must already be
 * inside the tan guard domain (callers clamp to phi_limit first). */
Box dynamics_interval(const Box& sbox, const Interval& phi, const PlantParams& params);

/* RK4 integration of the closed loop with the controller re-evaluated at
 * every stage state; the numerical stand-in for continuous actuation.
 * Raw controller output is saturated to +-phi_limit and flagged. */
Trajectory simulate(const State& s0, const ControlFn& controller, double duration,
                    double substep, const PlantParams& params);

/* One RK4 step used both by simulate() and by tests. */
State rk4_step(const State& s, const ControlFn& controller, double h,
               const PlantParams& params, bool* saturated,
               double* applied_phi_at_start = nullptr);

/* Default simulation substep: far below any control period studied here. */
inline constexpr double kDefaultSimSubstep = 1.0 / 256.0;

}  // namespace cag
