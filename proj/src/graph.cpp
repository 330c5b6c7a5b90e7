#include "cag/graph.hpp"

#include <omp.h>

#include <algorithm>
#include <charconv>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cag/rng.hpp"

namespace cag {

void CatConfig::validate() const {
  if (!(bf0 >= 0.0)) throw GraphError("bf0 must be >= 0");
  if (!(inc > 1.0)) throw GraphError("inc must be > 1");
  if (max_retries < 0) throw GraphError("max_retries must be >= 0");
  if (n_substeps < 1) throw GraphError("n_substeps must be >= 1");
  if (reach_subdiv < 1) throw GraphError("reach_subdiv must be >= 1");
  if (mode == ActuationMode::kFixed && !(frequency > 0.0)) {
    throw GraphError("fixed mode needs a positive frequency");
  }
  plant.validate();
}

CellGraph::CellGraph(Partition part, std::vector<CellRecord> cells, uint64_t controller_hash,
                     uint64_t config_hash, double horizon, ActuationMode mode,
                     double frequency)
    : part_(std::move(part)),
      cells_(std::move(cells)),
      controller_hash_(controller_hash),
      config_hash_(config_hash),
      horizon_(horizon),
      mode_(mode),
      frequency_(frequency) {
  if (cells_.size() != static_cast<std::size_t>(part_.num_cells())) {
    throw GraphError("cell record count does not match the partition");
  }
}

void CellGraph::successors(int64_t idx, std::vector<int64_t>* out) const {
  out->clear();
  if (idx == sink_id()) {
    out->push_back(sink_id());  // absorbing
    return;
  }
  const CellRecord& rec = cells_[static_cast<std::size_t>(idx)];
  if (rec.succ_all) {
    out->reserve(static_cast<std::size_t>(num_cells()) + 1);
    for (int64_t i = 0; i <= num_cells(); ++i) out->push_back(i);
    return;
  }
  *out = rec.succ;
}

namespace {

/* Cover the cell with subdiv x subdiv closed sub-boxes, reach each one and
 * union the touched cells; each sub-flowpipe must stay inside gamma. */
bool subdivided_reach(const ControlSource&, const LinearAbstraction& la, const Box& start,
                      const Partition& part, const CatConfig& cfg, std::vector<int64_t>* fin,
                      std::vector<int64_t>* inter, bool* exited) {
  const int k = cfg.reach_subdiv;
  std::vector<int64_t> f_all, i_all, f, i;
  auto edge = [&](const Interval& iv, int j) {
    return j == 0 ? iv.lo() : (j == k ? iv.hi() : iv.lo() + iv.width() * j / k);
  };
  for (int a = 0; a < k; ++a) {
    for (int bidx = 0; bidx < k; ++bidx) {
      const Box sub(Interval(edge(start[0], a), edge(start[0], a + 1)),
                    Interval(edge(start[1], bidx), edge(start[1], bidx + 1)));
      bool sub_exited = false;
      Flowpipe fp;
      const Box& domain = part.domain();
      try {
        if (cfg.mode == ActuationMode::kContinuous) {
          fp = flow_continuous(la, sub, cfg.plant, cfg.lin.horizon, cfg.n_substeps,
                               &sub_exited, &domain);
        } else {
          fp = flow_fixed_chain(la, sub, cfg.plant, cfg.lin.horizon, cfg.frequency,
                                cfg.n_substeps, &sub_exited, &domain);
        }
      } catch (const EnclosureDiverged&) {
        *exited = true;
        return false;
      }
      if (sub_exited) *exited = true;
      cells_touched(fp, part, &f, &i);
      f_all.insert(f_all.end(), f.begin(), f.end());
      i_all.insert(i_all.end(), i.begin(), i.end());
    }
  }
  std::sort(f_all.begin(), f_all.end());
  f_all.erase(std::unique(f_all.begin(), f_all.end()), f_all.end());
  std::sort(i_all.begin(), i_all.end());
  i_all.erase(std::unique(i_all.begin(), i_all.end()), i_all.end());
  *fin = std::move(f_all);
  *inter = std::move(i_all);
  return true;
}

}  // namespace

CellRecord cat_cell(const ControlSource& cs, const Partition& part, const CellId& cell,
                    const CatConfig& cfg) {
  const Box start = part.cell_box(cell);
  const CellWitness witness = gather_witnesses(cs, part, cell, cfg.lin, cfg.plant);

  CellRecord rec;
  std::vector<int64_t> acc_succ, acc_inter;
  double bf = cfg.bf0;
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    rec.retries = attempt;
    LinearAbstraction la = linearize_from_witness(cs, part, cell, witness, bf, cfg.lin);
    rec.escalations = audit_and_escalate(cs, &la, part, cell, cfg.lin);
    bool exited = false;
    std::vector<int64_t> fin, inter;
    const bool ok = subdivided_reach(cs, la, start, part, cfg, &fin, &inter, &exited);
    rec.la = la;
    if (ok) {
      if (cfg.accumulate_retry_edges) {
        acc_succ.insert(acc_succ.end(), fin.begin(), fin.end());
        acc_inter.insert(acc_inter.end(), inter.begin(), inter.end());
      }
      if (!exited) {
        if (cfg.accumulate_retry_edges) {
          std::sort(acc_succ.begin(), acc_succ.end());
          acc_succ.erase(std::unique(acc_succ.begin(), acc_succ.end()), acc_succ.end());
          std::sort(acc_inter.begin(), acc_inter.end());
          acc_inter.erase(std::unique(acc_inter.begin(), acc_inter.end()), acc_inter.end());
          rec.succ = std::move(acc_succ);
          rec.inter = std::move(acc_inter);
        } else {
          // only the final, containment-verified attempt is valid
          rec.succ = std::move(fin);
          rec.inter = std::move(inter);
        }
        return rec;
      }
    }
    bf *= cfg.inc;
  }
  // conservative give-up: the cell may go anywhere, including out of domain
  rec.unresolved = true;
  rec.succ_all = true;
  rec.succ.clear();
  rec.inter.clear();
  return rec;
}

namespace {

CellGraph assemble(const ControlSource& cs, const Partition& part, const CatConfig& cfg,
                   std::vector<CellRecord> cells) {
  uint64_t ch = cs.fingerprint();
  uint64_t cfg_h = fnv64_str("cat-v1");
  const double nums[] = {cfg.bf0,
                         cfg.inc,
                         static_cast<double>(cfg.max_retries),
                         static_cast<double>(cfg.n_substeps),
                         static_cast<double>(cfg.reach_subdiv),
                         cfg.mode == ActuationMode::kFixed ? cfg.frequency : -1.0,
                         cfg.accumulate_retry_edges ? 1.0 : 0.0,
                         static_cast<double>(cfg.lin.n_start),
                         static_cast<double>(cfg.lin.n_fit),
                         static_cast<double>(cfg.lin.n_audit),
                         cfg.lin.horizon,
                         cfg.lin.sim_substep,
                         cfg.lin.margin,
                         cfg.lin.u_floor,
                         static_cast<double>(cfg.lin.seed),
                         cfg.plant.v,
                         cfg.plant.L,
                         cfg.plant.phi_limit};
  cfg_h = fnv64(nums, sizeof nums, cfg_h);
  cfg_h = fnv64_str(std::to_string(part.fingerprint()), cfg_h);
  return CellGraph(part, std::move(cells), ch, cfg_h, cfg.lin.horizon, cfg.mode,
                   cfg.frequency);
}

}  // namespace

CellGraph cat_serial(const ControlSource& cs, const Partition& part, const CatConfig& cfg) {
  cfg.validate();
  const int64_t n = part.num_cells();
  std::vector<CellRecord> cells(static_cast<std::size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    cells[static_cast<std::size_t>(i)] = cat_cell(cs, part, part.from_linear(i), cfg);
  }
  return assemble(cs, part, cfg, std::move(cells));
}

CellGraph cat(const ControlSource& cs, const Partition& part, const CatConfig& cfg,
              int jobs) {
  cfg.validate();
  const int64_t n = part.num_cells();
  std::vector<CellRecord> cells(static_cast<std::size_t>(n));
  const int threads = jobs > 0 ? jobs : omp_get_max_threads();
  // per-cell work is pure with per-cell seed streams, so the schedule cannot
  // change the result, only the wall time
#pragma omp parallel for schedule(dynamic, 8) num_threads(threads)
  for (int64_t i = 0; i < n; ++i) {
    cells[static_cast<std::size_t>(i)] = cat_cell(cs, part, part.from_linear(i), cfg);
  }
  return assemble(cs, part, cfg, std::move(cells));
}

TrajectoryCells trajectory_cells(const Trajectory& traj, const Partition& part) {
  TrajectoryCells out;
  const int64_t sink = part.num_cells();
  for (const auto& smp : traj.samples) {
    const CellId c = part.cell_of(smp.x);
    if (c.is_sink()) {
      out.absorbed = true;
      out.intermediate.push_back(sink);
      break;
    }
    out.intermediate.push_back(part.linear(c));
  }
  out.endpoint = out.absorbed ? sink : out.intermediate.back();
  std::sort(out.intermediate.begin(), out.intermediate.end());
  out.intermediate.erase(std::unique(out.intermediate.begin(), out.intermediate.end()),
                         out.intermediate.end());
  return out;
}

ForwardReachResult forward_reach(const std::vector<int64_t>& c0, const CellGraph& g) {
  const int64_t n_total = g.num_cells() + 1;  // + sink
  std::vector<char> visited(static_cast<std::size_t>(n_total), 0);
  std::vector<int64_t> frontier;
  for (int64_t c : c0) {
    if (c < 0 || c > g.num_cells()) throw GraphError("initial cell id out of range");
    if (!visited[static_cast<std::size_t>(c)]) {
      visited[static_cast<std::size_t>(c)] = 1;
      frontier.push_back(c);
    }
  }
  ForwardReachResult res;
  std::vector<int64_t> next, succ;
  while (!frontier.empty()) {
    ++res.iterations;
    next.clear();
    for (int64_t c : frontier) {
      g.successors(c, &succ);
      for (int64_t s : succ) {
        if (!visited[static_cast<std::size_t>(s)]) {
          visited[static_cast<std::size_t>(s)] = 1;
          next.push_back(s);
        }
      }
    }
    frontier.swap(next);
  }
  for (int64_t i = 0; i < n_total; ++i) {
    if (visited[static_cast<std::size_t>(i)]) res.reachable.push_back(i);
  }
  return res;
}

std::vector<int64_t> backward_reach(const std::vector<int64_t>& unsafe_seed,
                                    const CellGraph& g) {
  const int64_t n = g.num_cells();
  const int64_t n_total = n + 1;
  if (unsafe_seed.empty()) return {};

  // reversed adjacency; cells with succ_all are predecessors of every node
  std::vector<std::vector<int64_t>> preds(static_cast<std::size_t>(n_total));
  std::vector<int64_t> go_anywhere;
  for (int64_t c = 0; c < n; ++c) {
    const CellRecord& rec = g.cell(c);
    if (rec.succ_all) {
      go_anywhere.push_back(c);
      continue;
    }
    for (int64_t s : rec.succ) preds[static_cast<std::size_t>(s)].push_back(c);
  }
  preds[static_cast<std::size_t>(n)].push_back(n);  // sink self-loop

  std::vector<char> visited(static_cast<std::size_t>(n_total), 0);
  std::vector<int64_t> stack;
  auto push = [&](int64_t c) {
    if (!visited[static_cast<std::size_t>(c)]) {
      visited[static_cast<std::size_t>(c)] = 1;
      stack.push_back(c);
    }
  };
  for (int64_t c : unsafe_seed) {
    if (c < 0 || c > n) throw GraphError("seed cell id out of range");
    push(c);
  }
  // a "may go anywhere" cell reaches any nonempty seed in one step
  for (int64_t c : go_anywhere) push(c);
  while (!stack.empty()) {
    const int64_t c = stack.back();
    stack.pop_back();
    for (int64_t p : preds[static_cast<std::size_t>(c)]) push(p);
  }
  std::vector<int64_t> out;
  for (int64_t i = 0; i < n_total; ++i) {
    if (visited[static_cast<std::size_t>(i)]) out.push_back(i);
  }
  return out;
}

namespace {

constexpr uint32_t kFlagSaturated = 1;
constexpr uint32_t kFlagDegenerate = 2;
constexpr uint32_t kFlagLeftDomain = 4;
constexpr uint32_t kFlagUnresolved = 8;
constexpr uint32_t kFlagSuccAll = 16;

void put_double(std::string* s, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  s->append(buf);
}

void put_ids(std::string* s, const std::vector<int64_t>& ids, int64_t sink) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%zu", ids.size());
  s->append(buf);
  for (int64_t id : ids) {
    std::snprintf(buf, sizeof buf, " %" PRId64, id == sink ? int64_t{-1} : id);
    s->append(buf);
  }
}

}  // namespace

void save_graph(const CellGraph& g, const std::string& path) {
  std::string body;
  body.reserve(1 << 20);
  char buf[256];

  std::snprintf(buf, sizeof buf, "meta controller %016" PRIx64 " config %016" PRIx64 "\n",
                g.controller_hash(), g.config_hash());
  body += buf;
  body += "mode ";
  if (g.mode() == ActuationMode::kContinuous) {
    body += "continuous";
  } else {
    body += "fixed ";
    put_double(&body, g.frequency());
  }
  body += "\nhorizon ";
  put_double(&body, g.horizon());
  const Partition& part = g.partition();
  body += "\ndomain";
  for (std::size_t d = 0; d < 2; ++d) {
    body += ' ';
    put_double(&body, part.domain()[d].lo());
    body += ' ';
    put_double(&body, part.domain()[d].hi());
  }
  std::snprintf(buf, sizeof buf, "\nbins %d %d\ncells %" PRId64 "\n", part.bins(0),
                part.bins(1), g.num_cells());
  body += buf;

  const int64_t sink = g.sink_id();
  for (int64_t i = 0; i < g.num_cells(); ++i) {
    const CellRecord& rec = g.cell(i);
    uint32_t flags = 0;
    if (rec.la.saturated) flags |= kFlagSaturated;
    if (rec.la.degenerate_fit) flags |= kFlagDegenerate;
    if (rec.la.left_domain) flags |= kFlagLeftDomain;
    if (rec.unresolved) flags |= kFlagUnresolved;
    if (rec.succ_all) flags |= kFlagSuccAll;
    std::snprintf(buf, sizeof buf, "c %" PRId64 " f %u r %d e %d bf ", i, flags, rec.retries,
                  rec.escalations);
    body += buf;
    put_double(&body, rec.la.bf_used);
    body += " u ";
    put_double(&body, rec.la.u.lo());
    body += ' ';
    put_double(&body, rec.la.u.hi());
    body += " uraw ";
    put_double(&body, rec.la.u_raw.lo());
    body += ' ';
    put_double(&body, rec.la.u_raw.hi());
    body += " a ";
    put_double(&body, rec.la.a_p);
    body += ' ';
    put_double(&body, rec.la.a_theta);
    body += " b ";
    put_double(&body, rec.la.b);
    body += " g ";
    for (std::size_t d = 0; d < 2; ++d) {
      put_double(&body, rec.la.gamma[d].lo());
      body += ' ';
      put_double(&body, rec.la.gamma[d].hi());
      body += d == 0 ? " " : "";
    }
    body += " s ";
    put_ids(&body, rec.succ, sink);
    body += " i ";
    put_ids(&body, rec.inter, sink);
    body += '\n';
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write graph file " + path);
  out << "CAGv1\n" << body;
  std::snprintf(buf, sizeof buf, "check %016" PRIx64 "\n", fnv64_str(body));
  out << buf;
  if (!out) throw IoError("short write on graph file " + path);
}

namespace {

struct Tokens {
  std::istringstream in;
  int line_no;

  std::string next() {
    std::string t;
    if (!(in >> t)) throw IoError("graph file: truncated line " + std::to_string(line_no));
    return t;
  }
  double next_double() {
    const std::string t = next();
    try {
      return std::stod(t);
    } catch (...) {
      throw IoError("graph file: bad number '" + t + "' on line " + std::to_string(line_no));
    }
  }
  int64_t next_i64() {
    const std::string t = next();
    int64_t v = 0;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size()) {
      throw IoError("graph file: bad id '" + t + "' on line " + std::to_string(line_no));
    }
    return v;
  }
  void expect(const std::string& tag) {
    const std::string t = next();
    if (t != tag) {
      throw IoError("graph file: expected '" + tag + "', got '" + t + "' on line " +
                    std::to_string(line_no));
    }
  }
};

}  // namespace

CellGraph load_graph(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open graph file " + path);
  std::string version;
  std::getline(in, version);
  if (version != "CAGv1") throw FormatVersionMismatch("unsupported graph format: " + version);

  std::string body, line;
  std::vector<std::string> lines;
  std::optional<uint64_t> declared_check;
  while (std::getline(in, line)) {
    if (line.rfind("check ", 0) == 0) {
      declared_check = std::stoull(line.substr(6), nullptr, 16);
      break;
    }
    body += line;
    body += '\n';
    lines.push_back(line);
  }
  if (!declared_check) throw IoError("graph file missing checksum line");
  if (*declared_check != fnv64_str(body)) {
    throw HashMismatch("graph file checksum mismatch: edited or corrupted file");
  }

  uint64_t controller_hash = 0, config_hash = 0;
  double horizon = 1.0, frequency = 0.0;
  ActuationMode mode = ActuationMode::kContinuous;
  double dom[4] = {0, 0, 0, 0};
  int bins[2] = {0, 0};
  int64_t n_cells = -1;
  std::vector<CellRecord> cells;
  std::optional<Partition> part;

  int line_no = 1;
  for (const std::string& l : lines) {
    ++line_no;
    Tokens tok{std::istringstream(l), line_no};
    const std::string tag = tok.next();
    if (tag == "meta") {
      tok.expect("controller");
      controller_hash = std::stoull(tok.next(), nullptr, 16);
      tok.expect("config");
      config_hash = std::stoull(tok.next(), nullptr, 16);
    } else if (tag == "mode") {
      const std::string m = tok.next();
      if (m == "continuous") {
        mode = ActuationMode::kContinuous;
      } else if (m == "fixed") {
        mode = ActuationMode::kFixed;
        frequency = tok.next_double();
      } else {
        throw IoError("graph file: unknown mode " + m);
      }
    } else if (tag == "horizon") {
      horizon = tok.next_double();
    } else if (tag == "domain") {
      for (double& v : dom) v = tok.next_double();
    } else if (tag == "bins") {
      bins[0] = static_cast<int>(tok.next_i64());
      bins[1] = static_cast<int>(tok.next_i64());
    } else if (tag == "cells") {
      n_cells = tok.next_i64();
      part = Partition(Box(Interval(dom[0], dom[1]), Interval(dom[2], dom[3])), bins[0],
                       bins[1]);
      if (part->num_cells() != n_cells) throw IoError("graph file: cell count mismatch");
      cells.reserve(static_cast<std::size_t>(n_cells));
    } else if (tag == "c") {
      if (!part) throw IoError("graph file: cell line before header");
      const int64_t idx = tok.next_i64();
      if (idx != static_cast<int64_t>(cells.size())) {
        throw IoError("graph file: cell lines out of order");
      }
      CellRecord rec;
      tok.expect("f");
      const auto flags = static_cast<uint32_t>(tok.next_i64());
      tok.expect("r");
      rec.retries = static_cast<int>(tok.next_i64());
      tok.expect("e");
      rec.escalations = static_cast<int>(tok.next_i64());
      tok.expect("bf");
      rec.la.bf_used = tok.next_double();
      tok.expect("u");
      {
        const double lo = tok.next_double(), hi = tok.next_double();
        rec.la.u = Interval(lo, hi);
      }
      tok.expect("uraw");
      {
        const double lo = tok.next_double(), hi = tok.next_double();
        rec.la.u_raw = Interval(lo, hi);
      }
      tok.expect("a");
      rec.la.a_p = tok.next_double();
      rec.la.a_theta = tok.next_double();
      tok.expect("b");
      rec.la.b = tok.next_double();
      tok.expect("g");
      {
        const double plo = tok.next_double(), phi = tok.next_double();
        const double tlo = tok.next_double(), thi = tok.next_double();
        rec.la.gamma = Box(Interval(plo, phi), Interval(tlo, thi));
      }
      rec.la.saturated = flags & kFlagSaturated;
      rec.la.degenerate_fit = flags & kFlagDegenerate;
      rec.la.left_domain = flags & kFlagLeftDomain;
      rec.unresolved = flags & kFlagUnresolved;
      rec.succ_all = flags & kFlagSuccAll;
      const int64_t sink = part->num_cells();
      tok.expect("s");
      const int64_t ns = tok.next_i64();
      rec.succ.reserve(static_cast<std::size_t>(ns));
      for (int64_t k = 0; k < ns; ++k) {
        const int64_t id = tok.next_i64();
        rec.succ.push_back(id < 0 ? sink : id);
      }
      tok.expect("i");
      const int64_t ni = tok.next_i64();
      rec.inter.reserve(static_cast<std::size_t>(ni));
      for (int64_t k = 0; k < ni; ++k) {
        const int64_t id = tok.next_i64();
        rec.inter.push_back(id < 0 ? sink : id);
      }
      cells.push_back(std::move(rec));
    } else {
      throw IoError("graph file: unknown line tag " + tag);
    }
  }
  if (!part || n_cells < 0 || static_cast<int64_t>(cells.size()) != n_cells) {
    throw IoError("graph file: incomplete cell table");
  }
  return CellGraph(*part, std::move(cells), controller_hash, config_hash, horizon, mode,
                   frequency);
}

}  // namespace cag
