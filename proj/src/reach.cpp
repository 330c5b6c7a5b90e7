#include "cag/reach.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace cag {

namespace {

/* Derivative box of the closed loop over a state box with phi in phi_range,
 * saturated at the plant's steering limit. */
Box closed_loop_deriv(const Box& sbox, const Interval& phi_range, const PlantParams& params) {
  return dynamics_interval(sbox, interval_clamp(phi_range, params.phi_limit), params);
}

/* X extended along [0, h] by derivative box d: hull(X, X + h d). */
Box euler_cone(const Box& x, const Box& d, double h) {
  std::vector<Interval> dims;
  dims.reserve(x.dim());
  for (std::size_t k = 0; k < x.dim(); ++k) {
    dims.emplace_back(x[k].lo() + std::min(0.0, h * d[k].lo()),
                      x[k].hi() + std::max(0.0, h * d[k].hi()));
  }
  return Box(std::move(dims));
}

Box widen_abs(const Box& b, double pad) {
  std::vector<Interval> dims;
  dims.reserve(b.dim());
  for (std::size_t k = 0; k < b.dim(); ++k) {
    dims.emplace_back(b[k].lo() - pad, b[k].hi() + pad);
  }
  return Box(std::move(dims));
}

/* A-priori enclosure of all solutions from X over one substep: find E with
 * X + [0,h] f(E) contained in E, then return that (tighter) cone. */
template <typename DerivFn>
Box apriori_enclosure(const Box& x, double h, const DerivFn& deriv) {
  Box d = deriv(x);
  double pad = 0.0;
  for (std::size_t k = 0; k < x.dim(); ++k) {
    pad = std::max(pad, 0.1 * h * std::max(std::fabs(d[k].lo()), std::fabs(d[k].hi())));
  }
  pad += 1e-14;
  Box trial = widen_abs(euler_cone(x, d, h), pad);
  for (int iter = 0; iter < 20; ++iter) {
    const Box cand = euler_cone(x, deriv(trial), h);
    if (trial.contains(cand)) return cand;
    trial = widen_abs(box_hull(std::array{trial, cand}), pad);
    pad *= 1.6;
  }
  throw EnclosureDiverged("a-priori enclosure did not stabilize; refine the substeps");
}

/* One tightened substep; records the span enclosure, advances x. */
template <typename DerivFn>
Box substep_advance(Box* x, double h, const DerivFn& deriv) {
  const Box span = apriori_enclosure(*x, h, deriv);
  const Box d = deriv(span);
  std::vector<Interval> dims;
  dims.reserve(x->dim());
  for (std::size_t k = 0; k < x->dim(); ++k) {
    dims.push_back(interval_add((*x)[k], interval_scale(d[k], h)));
  }
  *x = Box(std::move(dims));
  return span;
}

}  // namespace

Flowpipe flow_continuous(const LinearAbstraction& la, const Box& start,
                         const PlantParams& params, double horizon, int n_substeps,
                         bool* exited_gamma, const Box* track_domain) {
  if (!la.gamma.contains(start)) {
    throw GeomError("reach_continuous: start box not inside the abstraction region");
  }
  const double h = horizon / n_substeps;
  auto deriv = [&](const Box& b) { return closed_loop_deriv(b, la.phi_range(b), params); };

  Flowpipe fp;
  fp.horizon = horizon;
  fp.steps.reserve(static_cast<std::size_t>(n_substeps) + 1);
  bool exited = false;
  Box x = start;
  for (int k = 0; k < n_substeps; ++k) {
    const Box span = substep_advance(&x, h, deriv);
    if (!la.gamma.contains(span)) exited = true;
    const auto clipped = box_intersect(span, la.gamma);
    fp.steps.push_back(FlowStep{k * h, (k + 1) * h, clipped ? *clipped : span});
    if (track_domain && !box_intersect(span, *track_domain)) {
      fp.absorbed = true;  // every solution has left the tracked domain
      break;
    }
    // solutions are constrained to the model's validity region; sound as
    // long as the containment check (exited flag) passes
    const auto xc = box_intersect(x, la.gamma);
    if (!xc) {
      exited = true;
      fp.steps.push_back(FlowStep{(k + 1) * h, horizon, span});
      break;
    }
    x = *xc;
    if (k + 1 == n_substeps) fp.steps.push_back(FlowStep{horizon, horizon, x});
  }
  if (exited_gamma) *exited_gamma = exited;
  return fp;
}

Flowpipe flow_zoh(const Interval& phi_range, const Box& start, const PlantParams& params,
                  double hold, int n_substeps) {
  const double h = hold / n_substeps;
  auto deriv = [&](const Box& b) { return closed_loop_deriv(b, phi_range, params); };
  Flowpipe fp;
  fp.horizon = hold;
  fp.steps.reserve(static_cast<std::size_t>(n_substeps) + 1);
  Box x = start;
  for (int k = 0; k < n_substeps; ++k) {
    const Box span = substep_advance(&x, h, deriv);
    fp.steps.push_back(FlowStep{k * h, (k + 1) * h, span});
  }
  fp.steps.push_back(FlowStep{hold, hold, x});
  return fp;
}

Flowpipe flow_fixed_chain(const LinearAbstraction& la, const Box& start,
                          const PlantParams& params, double horizon, double frequency,
                          int n_substeps_per_horizon, bool* exited_gamma,
                          const Box* track_domain) {
  if (!la.gamma.contains(start)) {
    throw GeomError("fixed-frequency reach: start box not inside the abstraction region");
  }
  const int holds = static_cast<int>(std::ceil(horizon * frequency - 1e-9));
  const double hold = horizon / holds;
  const int sub = std::max(4, static_cast<int>(std::lround(
                                  static_cast<double>(n_substeps_per_horizon) / holds)));
  bool exited = false;
  Box x = start;
  Flowpipe fp;
  fp.horizon = horizon;
  for (int k = 0; k < holds && !fp.absorbed; ++k) {
    if (!la.gamma.contains(x)) exited = true;
    // the hold samples the controller at the hold start: the model bounds
    // its output over wherever the state may be right now
    const Interval phi = la.phi_range(x);
    Flowpipe seg = flow_zoh(phi, x, params, hold, sub);
    const double t0 = k * hold;
    for (std::size_t i = 0; i + 1 < seg.steps.size(); ++i) {
      const auto& st = seg.steps[i];
      if (!la.gamma.contains(st.box)) exited = true;
      const auto clipped = box_intersect(st.box, la.gamma);
      fp.steps.push_back(FlowStep{t0 + st.t0, t0 + st.t1, clipped ? *clipped : st.box});
      if (track_domain && !box_intersect(st.box, *track_domain)) {
        fp.absorbed = true;
        break;
      }
    }
    if (fp.absorbed) break;
    x = seg.final_box();
    const auto xc = box_intersect(x, la.gamma);
    if (!xc) {
      exited = true;
      fp.steps.push_back(FlowStep{t0 + hold, horizon, fp.steps.back().box});
      break;
    }
    x = *xc;
    if (k + 1 == holds) fp.steps.push_back(FlowStep{horizon, horizon, x});
  }
  if (exited_gamma) *exited_gamma = exited;
  return fp;
}

void cells_touched(const Flowpipe& fp, const Partition& part,
                   std::vector<int64_t>* final_cells, std::vector<int64_t>* intermediate) {
  std::vector<int64_t> scratch;
  std::vector<int64_t> inter;
  for (const auto& step : fp.steps) {
    scratch.clear();
    part.cells_intersecting(step.box, &scratch);
    inter.insert(inter.end(), scratch.begin(), scratch.end());
  }
  std::sort(inter.begin(), inter.end());
  inter.erase(std::unique(inter.begin(), inter.end()), inter.end());

  scratch.clear();
  if (fp.absorbed) {
    scratch.push_back(part.num_cells());  // sink owns every absorbed solution
  } else {
    part.cells_intersecting(fp.final_box(), &scratch);
    std::sort(scratch.begin(), scratch.end());
    scratch.erase(std::unique(scratch.begin(), scratch.end()), scratch.end());
  }

  *final_cells = std::move(scratch);
  *intermediate = std::move(inter);
}

ReachResult reach_continuous(const LinearAbstraction& la, const Box& start,
                             const PlantParams& params, const Partition& part,
                             double horizon, int n_substeps) {
  ReachResult rr;
  rr.flowpipe = flow_continuous(la, start, params, horizon, n_substeps, &rr.exited_gamma);
  cells_touched(rr.flowpipe, part, &rr.final_cells, &rr.intermediate_cells);
  return rr;
}

ReachResult reach_zoh(const Interval& phi_range, const Box& start, const PlantParams& params,
                      const Partition& part, double hold, int n_substeps) {
  ReachResult rr;
  rr.flowpipe = flow_zoh(phi_range, start, params, hold, n_substeps);
  cells_touched(rr.flowpipe, part, &rr.final_cells, &rr.intermediate_cells);
  return rr;
}

void write_flowpipe_csv(const Flowpipe& fp, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write flowpipe csv " + path);
  out << "time_lo,time_hi,p_lo,p_hi,theta_lo,theta_hi\n";
  out.precision(17);
  for (const auto& s : fp.steps) {
    out << s.t0 << ',' << s.t1 << ',' << s.box[0].lo() << ',' << s.box[0].hi() << ','
        << s.box[1].lo() << ',' << s.box[1].hi() << '\n';
  }
}

}  // namespace cag
