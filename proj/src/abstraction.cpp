#include "cag/abstraction.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "cag/rng.hpp"

namespace cag {

namespace {

/* stream tags per cell so witness / fit / audit / escalation draws are
 * independent and unaffected by retries */
enum Phase : uint64_t { kStarts = 1, kLatents = 2, kFit = 3, kAudit = 4, kEscalate = 5 };

Rng cell_stream(const LinearizeConfig& cfg, const Partition& part, const CellId& cell,
                uint64_t phase) {
  return Rng(mix_seed(cfg.seed, static_cast<uint64_t>(part.linear(cell)), phase));
}

std::vector<double> draw_latent(const ControlSource& cs, Rng& rng) {
  std::vector<double> z;
  if (!cs.has_latents()) return z;
  const Box& lb = cs.latent_box();
  z.reserve(lb.dim());
  for (std::size_t d = 0; d < lb.dim(); ++d) z.push_back(rng.uniform(lb[d].lo(), lb[d].hi()));
  return z;
}

/* 3x3 linear solve with partial pivoting; returns false when near-singular. */
bool solve3(std::array<std::array<double, 3>, 3> m, std::array<double, 3> r,
            std::array<double, 3>* out) {
  std::array<int, 3> piv = {0, 1, 2};
  double scale = 0.0;
  for (const auto& row : m)
    for (double v : row) scale = std::max(scale, std::fabs(v));
  if (scale == 0.0) return false;
  for (int col = 0; col < 3; ++col) {
    int best = col;
    for (int row = col + 1; row < 3; ++row) {
      if (std::fabs(m[piv[row]][col]) > std::fabs(m[piv[best]][col])) best = row;
    }
    std::swap(piv[col], piv[best]);
    const double pivot = m[piv[col]][col];
    if (std::fabs(pivot) < 1e-12 * scale) return false;
    for (int row = col + 1; row < 3; ++row) {
      const double f = m[piv[row]][col] / pivot;
      for (int c2 = col; c2 < 3; ++c2) m[piv[row]][c2] -= f * m[piv[col]][c2];
      r[piv[row]] -= f * r[piv[col]];
    }
  }
  for (int col = 2; col >= 0; --col) {
    double acc = r[piv[col]];
    for (int c2 = col + 1; c2 < 3; ++c2) acc -= m[piv[col]][c2] * (*out)[c2];
    (*out)[col] = acc / m[piv[col]][col];
  }
  return true;
}

struct FitResult {
  double a_p, a_theta, b;
  bool degenerate;
};

/* Least squares phi ~ a.x + b over samples, centered on gamma's midpoint;
 * normal equations with a ridge fallback when near-singular. */
FitResult fit_linear(const std::vector<std::array<double, 3>>& samples, const Box& gamma) {
  const double cp = gamma[0].mid();
  const double ct = gamma[1].mid();
  std::array<std::array<double, 3>, 3> g{};
  std::array<double, 3> rhs{};
  for (const auto& s : samples) {
    const double dp = s[0] - cp, dt = s[1] - ct, y = s[2];
    const std::array<double, 3> f = {dp, dt, 1.0};
    for (int i = 0; i < 3; ++i) {
      rhs[i] += f[i] * y;
      for (int j = 0; j < 3; ++j) g[i][j] += f[i] * f[j];
    }
  }
  std::array<double, 3> w{};
  bool degenerate = false;
  if (!solve3(g, rhs, &w)) {
    degenerate = true;
    for (int i = 0; i < 3; ++i) g[i][i] += 1e-10 * std::max(1.0, g[i][i]);
    if (!solve3(g, rhs, &w)) w = {0.0, 0.0, rhs[2] / std::max(g[2][2], 1e-300)};
  }
  // un-center the offset
  return FitResult{w[0], w[1], w[2] - w[0] * cp - w[1] * ct, degenerate};
}

double eval_at(const ControlSource& cs, double p, double theta,
               std::span<const double> latent) {
  return cs.eval(State{p, theta}, latent);
}

/* Residual extremes of cs against the fitted model over a deterministic
 * probe set (gamma corners, center, cell corners) plus n random samples. */
Interval residual_extremes(const ControlSource& cs, const LinearAbstraction& la,
                           const Box& cell_box, std::size_t n, Rng& rng) {
  double lo = 0.0, hi = 0.0;  // residuals straddle zero by construction below
  bool first = true;
  auto probe = [&](double p, double theta, std::span<const double> latent) {
    const double r = eval_at(cs, p, theta, latent) - (la.a_p * p + la.a_theta * theta + la.b);
    if (first) {
      lo = hi = r;
      first = false;
    } else {
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
  };
  std::vector<double> latent = draw_latent(cs, rng);
  for (const auto& c : la.gamma.corners()) probe(c[0], c[1], latent);
  for (const auto& c : cell_box.corners()) probe(c[0], c[1], latent);
  const auto gc = la.gamma.center();
  probe(gc[0], gc[1], latent);
  for (std::size_t i = 0; i < n; ++i) {
    const double p = rng.uniform(la.gamma[0].lo(), la.gamma[0].hi());
    const double t = rng.uniform(la.gamma[1].lo(), la.gamma[1].hi());
    latent = draw_latent(cs, rng);
    probe(p, t, latent);
  }
  return Interval(lo, hi);
}

}  // namespace

Interval LinearAbstraction::phi_range(const Box& sbox) const {
  Interval acc = interval_scale(sbox[0], a_p);
  acc = interval_add(acc, interval_scale(sbox[1], a_theta));
  acc = interval_shift(acc, b);
  return interval_add(acc, u);
}

Interval apply_margin(const Interval& raw, double margin, double floor) {
  double lo = std::min(0.0, raw.lo());
  double hi = std::max(0.0, raw.hi());
  lo -= margin * std::fabs(lo) + floor;
  hi += margin * std::fabs(hi) + floor;
  return Interval(lo, hi);
}

CellWitness gather_witnesses(const ControlSource& cs, const Partition& part,
                             const CellId& cell, const LinearizeConfig& cfg,
                             const PlantParams& params) {
  const Box cell_box = part.cell_box(cell);
  Rng rng = cell_stream(cfg, part, cell, kStarts);
  Rng lrng = cell_stream(cfg, part, cell, kLatents);

  std::vector<State> starts;
  starts.reserve(cfg.n_start);
  for (const auto& c : cell_box.corners()) starts.push_back(State{c[0], c[1]});
  const auto center = cell_box.center();
  starts.push_back(State{center[0], center[1]});
  while (starts.size() < cfg.n_start) {
    starts.push_back(State{rng.uniform(cell_box[0].lo(), cell_box[0].hi()),
                           rng.uniform(cell_box[1].lo(), cell_box[1].hi())});
  }

  CellWitness w;
  double plo = cell_box[0].lo(), phi = cell_box[0].hi();
  double tlo = cell_box[1].lo(), thi = cell_box[1].hi();
  for (const State& s0 : starts) {
    const auto latent = draw_latent(cs, lrng);
    const Trajectory traj = simulate(s0, cs.as_fn(latent), cfg.horizon, cfg.sim_substep, params);
    w.saturated = w.saturated || traj.saturated;
    for (const auto& smp : traj.samples) {
      plo = std::min(plo, smp.x.p);
      phi = std::max(phi, smp.x.p);
      tlo = std::min(tlo, smp.x.theta);
      thi = std::max(thi, smp.x.theta);
      if (part.cell_of(smp.x).is_sink()) {
        // the sink absorbs this trajectory from here on; the hull keeps the
        // first outside sample so gamma reaches past the boundary
        w.left_domain = true;
        break;
      }
    }
  }
  w.hull = Box(Interval(plo, phi), Interval(tlo, thi));
  return w;
}

LinearAbstraction linearize_from_witness(const ControlSource& cs, const Partition& part,
                                         const CellId& cell, const CellWitness& witness,
                                         double bf, const LinearizeConfig& cfg) {
  if (bf < 0.0) throw NegativeFactor("negative bloating factor");
  const Box cell_box = part.cell_box(cell);

  LinearAbstraction la;
  la.gamma = box_bloat(witness.hull, bf);
  la.bf_used = bf;
  la.saturated = witness.saturated;
  la.left_domain = witness.left_domain;
  if (!la.gamma.contains(cell_box)) {
    throw GeomError("abstraction region does not contain its cell");  // unreachable
  }

  Rng frng = cell_stream(cfg, part, cell, kFit);
  std::vector<std::array<double, 3>> samples;
  samples.reserve(cfg.n_fit);
  for (std::size_t i = 0; i < cfg.n_fit; ++i) {
    const double p = frng.uniform(la.gamma[0].lo(), la.gamma[0].hi());
    const double t = frng.uniform(la.gamma[1].lo(), la.gamma[1].hi());
    const auto latent = draw_latent(cs, frng);
    samples.push_back({p, t, eval_at(cs, p, t, latent)});
  }
  const FitResult fit = fit_linear(samples, la.gamma);
  la.a_p = fit.a_p;
  la.a_theta = fit.a_theta;
  la.b = fit.b;
  la.degenerate_fit = fit.degenerate;
  la.n_samples = cfg.n_fit;

  Rng arng = cell_stream(cfg, part, cell, kAudit);
  la.u_raw = residual_extremes(cs, la, cell_box, cfg.n_audit, arng);
  la.u = apply_margin(la.u_raw, cfg.margin, cfg.u_floor);
  return la;
}

LinearAbstraction linearize(const ControlSource& cs, const Partition& part,
                            const CellId& cell, double bf, const LinearizeConfig& cfg,
                            const PlantParams& params) {
  const CellWitness w = gather_witnesses(cs, part, cell, cfg, params);
  return linearize_from_witness(cs, part, cell, w, bf, cfg);
}

int audit_and_escalate(const ControlSource& cs, LinearAbstraction* la,
                       const Partition& part, const CellId& cell,
                       const LinearizeConfig& cfg, int rounds) {
  const Box cell_box = part.cell_box(cell);
  double margin = cfg.margin;
  for (int round = 0; round < rounds; ++round) {
    Rng rng = cell_stream(cfg, part, cell, kEscalate + static_cast<uint64_t>(round) * 16);
    const Interval seen = residual_extremes(cs, *la, cell_box, cfg.n_audit, rng);
    if (la->u.contains(seen)) return round;
    margin *= 2.0;
    la->u_raw = interval_hull(la->u_raw, seen);
    la->u = apply_margin(la->u_raw, margin, cfg.u_floor);
  }
  return rounds;
}

}  // namespace cag
