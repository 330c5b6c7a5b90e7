#include "cag/properties.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

namespace cag {

namespace {

/* union of successor sets; handles succ_all and the sink self-loop */
std::vector<int64_t> image_of(const std::vector<int64_t>& s, const CellGraph& g) {
  const int64_t n = g.num_cells();
  std::vector<char> mark(static_cast<std::size_t>(n) + 1, 0);
  std::vector<int64_t> succ;
  bool everything = false;
  for (int64_t c : s) {
    if (c == n) {
      mark[static_cast<std::size_t>(n)] = 1;  // sink is absorbing
      continue;
    }
    const CellRecord& rec = g.cell(c);
    if (rec.succ_all) {
      everything = true;
      break;
    }
    for (int64_t x : rec.succ) mark[static_cast<std::size_t>(x)] = 1;
  }
  std::vector<int64_t> out;
  if (everything) {
    out.resize(static_cast<std::size_t>(n) + 1);
    for (int64_t i = 0; i <= n; ++i) out[static_cast<std::size_t>(i)] = i;
    return out;
  }
  for (int64_t i = 0; i <= n; ++i) {
    if (mark[static_cast<std::size_t>(i)]) out.push_back(i);
  }
  return out;
}

double percentage_of(const std::vector<int64_t>& cells, const CellGraph& g) {
  const int64_t n = g.num_cells();
  int64_t count = 0;
  for (int64_t c : cells) {
    if (c < n) ++count;
  }
  return 100.0 * static_cast<double>(count) / static_cast<double>(n);
}

std::vector<uint8_t> grid_of(const std::vector<int64_t>& cells, const CellGraph& g) {
  std::vector<uint8_t> grid(static_cast<std::size_t>(g.num_cells()), 0);
  for (int64_t c : cells) {
    if (c < g.num_cells()) grid[static_cast<std::size_t>(c)] = 1;
  }
  return grid;
}

}  // namespace

PropertyReport verify_p1(const CellGraph& g, double runway_halfwidth) {
  const Partition& part = g.partition();
  if (runway_halfwidth > 0.5 * part.domain().width(0) + 1e-12) {
    throw GraphError("runway half-width exceeds the partition domain");
  }
  const int64_t n = g.num_cells();

  std::vector<char> seed(static_cast<std::size_t>(n) + 1, 0);
  seed[static_cast<std::size_t>(n)] = 1;  // out-of-domain
  for (int64_t c = 0; c < n; ++c) {
    const Box b = part.cell_box(part.from_linear(c));
    if (b[0].hi() >= runway_halfwidth || b[0].lo() <= -runway_halfwidth) {
      seed[static_cast<std::size_t>(c)] = 1;
    }
  }
  // mid-step runway excursions: a cell whose intermediate sets touch a seed
  // is itself a seed
  for (int64_t c = 0; c < n; ++c) {
    if (seed[static_cast<std::size_t>(c)]) continue;
    const CellRecord& rec = g.cell(c);
    if (rec.succ_all) {
      seed[static_cast<std::size_t>(c)] = 1;
      continue;
    }
    for (int64_t x : rec.inter) {
      if (seed[static_cast<std::size_t>(x)]) {
        seed[static_cast<std::size_t>(c)] = 1;
        break;
      }
    }
  }
  std::vector<int64_t> seeds;
  for (int64_t c = 0; c <= n; ++c) {
    if (seed[static_cast<std::size_t>(c)]) seeds.push_back(c);
  }

  const std::vector<int64_t> unsafe = backward_reach(seeds, g);
  PropertyReport rep;
  rep.property = PropertyKind::kP1;
  rep.mode = g.mode();
  rep.frequency = g.frequency();
  std::vector<char> bad(static_cast<std::size_t>(n) + 1, 0);
  for (int64_t c : unsafe) bad[static_cast<std::size_t>(c)] = 1;
  for (int64_t c = 0; c < n; ++c) {
    if (!bad[static_cast<std::size_t>(c)]) rep.result_cells.push_back(c);
  }
  rep.percentage = percentage_of(rep.result_cells, g);
  rep.grid = grid_of(rep.result_cells, g);
  return rep;
}

PropertyReport verify_p2(const CellGraph& g, const std::vector<int64_t>& c0, int max_steps) {
  if (c0.empty()) throw GraphError("P2 needs a nonempty initial cell set");
  PropertyReport rep;
  rep.property = PropertyKind::kP2;
  rep.mode = g.mode();
  rep.frequency = g.frequency();

  std::vector<int64_t> cur(c0);
  std::sort(cur.begin(), cur.end());
  cur.erase(std::unique(cur.begin(), cur.end()), cur.end());
  rep.step_sets.push_back(cur);

  for (int step = 0; step <= max_steps; ++step) {
    std::vector<int64_t> img = image_of(cur, g);
    const bool invariant = std::includes(cur.begin(), cur.end(), img.begin(), img.end());
    rep.step_sets.push_back(img);
    if (invariant) {
      rep.converged_at = step;
      rep.result_cells = std::move(img);  // image of an invariant-closed set
      break;
    }
    cur = std::move(img);
  }
  if (!rep.converged_at) {
    rep.result_cells = cur;  // best effort; caller sees converged_at empty
  }
  rep.percentage = percentage_of(rep.result_cells, g);
  rep.grid = grid_of(rep.result_cells, g);

  const Partition& part = g.partition();
  for (int64_t c : rep.result_cells) {
    if (c >= g.num_cells()) continue;
    const Box b = part.cell_box(part.from_linear(c));
    rep.p_lo = rep.p_lo ? std::min(*rep.p_lo, b[0].lo()) : b[0].lo();
    rep.p_hi = rep.p_hi ? std::max(*rep.p_hi, b[0].hi()) : b[0].hi();
  }
  return rep;
}

std::vector<int64_t> cells_in_box(const Partition& part, const Box& b) {
  std::vector<int64_t> out;
  part.cells_intersecting(b, &out);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  // only real cells: the initial set lies inside the domain
  while (!out.empty() && out.back() >= part.num_cells()) out.pop_back();
  return out;
}

SweepMode parse_sweep_mode(const std::string& label) {
  SweepMode m;
  m.label = label;
  if (label == "inf" || label == "infU" || label == "inf+U" || label == "inf+u") {
    m.continuous = true;
    m.with_margin = label != "inf";
    m.label = m.with_margin ? "inf+U" : "inf";
    return m;
  }
  std::string num = label;
  if (num.size() > 2 && (num.substr(num.size() - 2) == "Hz" || num.substr(num.size() - 2) == "hz")) {
    num = num.substr(0, num.size() - 2);
  }
  try {
    m.frequency = std::stod(num);
  } catch (...) {
    throw GraphError("unknown sweep mode '" + label + "'");
  }
  if (!(m.frequency > 0.0)) throw GraphError("sweep frequency must be positive");
  m.label = num + "Hz";
  return m;
}

std::vector<SweepRow> frequency_sweep(const ControlSource& cs, const Partition& part,
                                      const std::vector<SweepMode>& modes,
                                      const CatConfig& base_cfg, double runway_halfwidth,
                                      int jobs) {
  if (modes.empty()) throw GraphError("sweep needs at least one mode");
  std::vector<SweepRow> rows;
  rows.reserve(modes.size());
  for (const SweepMode& m : modes) {
    SweepRow row;
    row.mode = m;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      CatConfig cfg = base_cfg;
      if (m.continuous) {
        cfg.mode = ActuationMode::kContinuous;
        cfg.frequency = 0.0;
        if (!m.with_margin) {
          cfg.lin.margin = 0.0;
          cfg.lin.u_floor = 0.0;
        }
      } else {
        cfg.mode = ActuationMode::kFixed;
        cfg.frequency = m.frequency;
      }
      const CellGraph g = cat(cs, part, cfg, jobs);
      for (const CellRecord& rec : g.cells()) {
        if (rec.unresolved) ++row.unresolved_cells;
      }
      row.report = verify_p1(g, runway_halfwidth);
      row.safe_percent = row.report->percentage;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    row.build_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_report_csv(const PropertyReport& rep, const Partition& part,
                      const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write report csv " + path);
  out << "ip,it,p_lo,p_hi,theta_lo,theta_hi,in_result\n";
  out.precision(17);
  for (int64_t c = 0; c < part.num_cells(); ++c) {
    const CellId id = part.from_linear(c);
    const Box b = part.cell_box(id);
    out << id.ip << ',' << id.it << ',' << b[0].lo() << ',' << b[0].hi() << ',' << b[1].lo()
        << ',' << b[1].hi() << ',' << int(rep.grid[static_cast<std::size_t>(c)]) << '\n';
  }
}

void write_report_text(const PropertyReport& rep, const CellGraph& g,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write report " + path);
  out << "property: " << (rep.property == PropertyKind::kP1 ? "P1" : "P2") << "\n";
  out << "mode: ";
  if (rep.mode == ActuationMode::kContinuous) {
    out << "continuous\n";
  } else {
    out << "fixed " << rep.frequency << " Hz\n";
  }
  out << "cells: " << g.num_cells() << "\n";
  out << "result cells: " << rep.result_cells.size() << "\n";
  out << "percentage: " << rep.percentage << "\n";
  if (rep.property == PropertyKind::kP2) {
    if (rep.converged_at) {
      out << "converged_at_steps: " << *rep.converged_at << "\n";
    } else {
      out << "converged_at_steps: none\n";
    }
    if (rep.p_lo) {
      out << "p_extent: [" << *rep.p_lo << ", " << *rep.p_hi << "]\n";
    }
  }
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write sweep csv " + path);
  out << "mode,safe_percent,unresolved_cells,build_seconds,error\n";
  for (const SweepRow& r : rows) {
    out << r.mode.label << ',' << r.safe_percent << ',' << r.unresolved_cells << ','
        << r.build_seconds << ',' << r.error << '\n';
  }
}

}  // namespace cag
