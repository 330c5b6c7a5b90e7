#include "cag/plant.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cag {

namespace {
constexpr double kHalfPi = 0.5 * 3.14159265358979323846;
}

void PlantParams::validate() const {
  if (!(v > 0.0)) throw PlantError("taxi speed must be positive");
  if (!(L > 0.0)) throw PlantError("wheelbase must be positive");
  if (!(phi_limit > 0.0) || !(phi_limit < kHalfPi - kTanGuardMargin)) {
    throw PlantError("phi_limit must lie in (0, pi/2 - guard)");
  }
}

Deriv dynamics(const State& s, double phi, const PlantParams& params) {
  if (std::fabs(phi) > params.phi_limit * (1.0 + 1e-12)) {
    throw PhiOutOfRange("steering angle " + std::to_string(phi) +
                        " exceeds the saturation limit");
  }
  return Deriv{params.v * std::sin(s.theta), (params.v / params.L) * std::tan(phi)};
}

Box dynamics_interval(const Box& sbox, const Interval& phi, const PlantParams& params) {
  if (sbox.dim() != 2) throw DimMismatch("state box must be 2-dimensional");
  const Interval dp = params.v * interval_sin(sbox[1]);
  const Interval dtheta = (params.v / params.L) * interval_tan(phi);
  return Box(dp, dtheta);
}

State rk4_step(const State& s, const ControlFn& controller, double h,
               const PlantParams& params, bool* saturated, double* applied_phi_at_start) {
  auto f = [&](const State& x) {
    double phi = controller(x);
    if (std::fabs(phi) > params.phi_limit) {
      if (saturated) *saturated = true;
      phi = std::clamp(phi, -params.phi_limit, params.phi_limit);
    }
    return std::pair<Deriv, double>(dynamics(x, phi, params), phi);
  };
  const auto [k1, phi0] = f(s);
  if (applied_phi_at_start) *applied_phi_at_start = phi0;
  const auto [k2, p2] = f(State{s.p + 0.5 * h * k1.dp, s.theta + 0.5 * h * k1.dtheta});
  const auto [k3, p3] = f(State{s.p + 0.5 * h * k2.dp, s.theta + 0.5 * h * k2.dtheta});
  const auto [k4, p4] = f(State{s.p + h * k3.dp, s.theta + h * k3.dtheta});
  return State{s.p + h / 6.0 * (k1.dp + 2.0 * k2.dp + 2.0 * k3.dp + k4.dp),
               s.theta + h / 6.0 * (k1.dtheta + 2.0 * k2.dtheta + 2.0 * k3.dtheta + k4.dtheta)};
}

Trajectory simulate(const State& s0, const ControlFn& controller, double duration,
                    double substep, const PlantParams& params) {
  if (!(substep > 0.0)) throw PlantError("substep must be positive");
  if (!(duration >= substep)) throw PlantError("duration must cover at least one substep");
  params.validate();

  const auto n = static_cast<std::size_t>(std::llround(duration / substep));
  Trajectory traj;
  traj.step = substep;
  traj.samples.reserve(n + 1);

  State x = s0;
  for (std::size_t k = 0; k < n; ++k) {
    double phi0 = 0.0;
    const State next = rk4_step(x, controller, substep, params, &traj.saturated, &phi0);
    traj.samples.push_back(TrajectorySample{static_cast<double>(k) * substep, x, phi0});
    x = next;
  }
  double phi_end = controller(x);
  if (std::fabs(phi_end) > params.phi_limit) {
    traj.saturated = true;
    phi_end = std::clamp(phi_end, -params.phi_limit, params.phi_limit);
  }
  traj.samples.push_back(TrajectorySample{static_cast<double>(n) * substep, x, phi_end});
  return traj;
}

}  // namespace cag
