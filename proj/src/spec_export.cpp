#include "cag/spec_export.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cag/rng.hpp"

namespace cag {

Network build_skip_network(const Network& net) {
  const std::size_t n = net.input_dim();
  const auto& layers = net.layers();

  if (layers.size() == 1) {
    // purely affine net: prepend identity rows directly
    Layer out;
    out.act = Activation::kIdentity;
    const Layer& last = layers.back();
    const std::size_t rows = n + last.out_dim();
    out.weights.assign(rows * n, 0.0);
    out.bias.assign(rows, 0.0);
    for (std::size_t i = 0; i < n; ++i) out.weights[i * n + i] = 1.0;
    for (std::size_t r = 0; r < last.out_dim(); ++r) {
      for (std::size_t c = 0; c < n; ++c) {
        out.weights[(n + r) * n + c] = last.weights[r * n + c];
      }
      out.bias[n + r] = last.bias[r];
    }
    return Network(n, {out});
  }

  const std::size_t carry = 2 * n;  // (pos_i, neg_i) pairs
  std::vector<Layer> widened;
  widened.reserve(layers.size());
  for (std::size_t li = 0; li + 1 < layers.size(); ++li) {
    const Layer& src = layers[li];
    Layer dst;
    dst.act = src.act;
    const std::size_t in = li == 0 ? n : carry + src.in_dim();
    const std::size_t out = carry + src.out_dim();
    dst.weights.assign(out * in, 0.0);
    dst.bias.assign(out, 0.0);
    if (li == 0) {
      for (std::size_t i = 0; i < n; ++i) {
        dst.weights[(2 * i) * in + i] = 1.0;       // pos_i = act(+x_i)
        dst.weights[(2 * i + 1) * in + i] = -1.0;  // neg_i = act(-x_i)
      }
      for (std::size_t r = 0; r < src.out_dim(); ++r) {
        for (std::size_t c = 0; c < n; ++c) {
          dst.weights[(carry + r) * in + c] = src.weights[r * n + c];
        }
        dst.bias[carry + r] = src.bias[r];
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        if (src.act == Activation::kRelu) {
          // pos' = ReLU(pos - neg), neg' = ReLU(neg - pos): keeps the pair
          // invariant pos - neg = x exactly
          dst.weights[(2 * i) * in + 2 * i] = 1.0;
          dst.weights[(2 * i) * in + 2 * i + 1] = -1.0;
          dst.weights[(2 * i + 1) * in + 2 * i] = -1.0;
          dst.weights[(2 * i + 1) * in + 2 * i + 1] = 1.0;
        } else {
          dst.weights[(2 * i) * in + 2 * i] = 1.0;
          dst.weights[(2 * i + 1) * in + 2 * i + 1] = 1.0;
        }
      }
      for (std::size_t r = 0; r < src.out_dim(); ++r) {
        for (std::size_t c = 0; c < src.in_dim(); ++c) {
          dst.weights[(carry + r) * in + carry + c] = src.weights[r * src.in_dim() + c];
        }
        dst.bias[carry + r] = src.bias[r];
      }
    }
    widened.push_back(std::move(dst));
  }

  const Layer& last = layers.back();
  Layer out;
  out.act = Activation::kIdentity;
  const std::size_t in = carry + last.in_dim();
  const std::size_t rows = n + last.out_dim();
  out.weights.assign(rows * in, 0.0);
  out.bias.assign(rows, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    out.weights[i * in + 2 * i] = 1.0;       // x_i = pos_i - neg_i
    out.weights[i * in + 2 * i + 1] = -1.0;
  }
  for (std::size_t r = 0; r < last.out_dim(); ++r) {
    for (std::size_t c = 0; c < last.in_dim(); ++c) {
      out.weights[(n + r) * in + carry + c] = last.weights[r * last.in_dim() + c];
    }
    out.bias[n + r] = last.bias[r];
  }
  widened.push_back(std::move(out));
  return Network(n, std::move(widened));
}

namespace {

const char* dir_name(ConformanceQuery::Direction d) {
  return d == ConformanceQuery::Direction::kUpper ? "upper" : "lower";
}

}  // namespace

void write_query(const ConformanceQuery& q, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write query file " + path);
  out.precision(17);
  const std::size_t n = q.input_region.dim();
  out << "CAGQ1\n";
  out << "cell " << q.cell.ip << ' ' << q.cell.it << "\n";
  out << "direction " << dir_name(q.dir) << "\n";
  out << "inputs " << n << "\n";
  for (std::size_t d = 0; d < n; ++d) {
    out << "input " << d << ' ' << q.input_region[d].lo() << ' ' << q.input_region[d].hi()
        << "\n";
  }
  out << "outputs " << n + 1 << "\n";
  out << "model a " << q.a_p << ' ' << q.a_theta << " b " << q.b << " u " << q.u.lo() << ' '
      << q.u.hi() << "\n";
  // negated property over the skip network outputs y = (x, phi):
  // exists x in the input box with sum(coeffs . y) > rhs
  out << "violation coeffs ";
  if (q.dir == ConformanceQuery::Direction::kUpper) {
    out << -q.a_p << ' ' << -q.a_theta;
    for (std::size_t d = 2; d < n; ++d) out << " 0";
    out << " 1 rhs " << q.b + q.u.hi() << "\n";
  } else {
    out << q.a_p << ' ' << q.a_theta;
    for (std::size_t d = 2; d < n; ++d) out << " 0";
    out << " -1 rhs " << -(q.b + q.u.lo()) << "\n";
  }
}

ConformanceQuery parse_query(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open query file " + path);
  std::string tag;
  in >> tag;
  if (tag != "CAGQ1") throw FormatVersionMismatch("unsupported query format: " + tag);
  ConformanceQuery q;
  std::size_t n = 0;
  std::vector<Interval> dims;
  while (in >> tag) {
    if (tag == "cell") {
      in >> q.cell.ip >> q.cell.it;
    } else if (tag == "direction") {
      std::string d;
      in >> d;
      q.dir = d == "upper" ? ConformanceQuery::Direction::kUpper
                           : ConformanceQuery::Direction::kLower;
    } else if (tag == "inputs") {
      in >> n;
      dims.resize(n, Interval());
    } else if (tag == "input") {
      std::size_t d;
      double lo, hi;
      in >> d >> lo >> hi;
      if (d >= n) throw IoError("query file: input index out of range");
      dims[d] = Interval(lo, hi);
    } else if (tag == "outputs") {
      std::size_t o;
      in >> o;
      if (o != n + 1) throw IoError("query file: outputs must equal inputs + 1");
    } else if (tag == "model") {
      std::string sub;
      double ulo, uhi;
      in >> sub >> q.a_p >> q.a_theta >> sub >> q.b >> sub >> ulo >> uhi;
      q.u = Interval(ulo, uhi);
    } else if (tag == "violation") {
      // redundant with the model line; skip the rest of the line
      std::string rest;
      std::getline(in, rest);
    } else {
      throw IoError("query file: unknown tag " + tag);
    }
  }
  if (n < 2) throw IoError("query file: missing input declarations");
  q.input_region = Box(std::move(dims));
  return q;
}

int64_t export_queries(const CellGraph& g, const ControlSource& cs,
                       const std::string& dir_path) {
  if (cs.is_analytic()) {
    throw GraphError("query export needs a network controller");
  }
  if (cs.fingerprint() != g.controller_hash()) {
    throw HashMismatch("graph was not built from this controller");
  }
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir_path, ec);
  if (ec) throw IoError("cannot create query directory " + dir_path);

  save_network(build_skip_network(cs.network()), dir_path + "/skip_network.json");

  int64_t count = 0;
  for (int64_t i = 0; i < g.num_cells(); ++i) {
    const CellId id = g.partition().from_linear(i);
    const CellRecord& rec = g.cell(i);
    std::vector<Interval> dims = rec.la.gamma.dims();
    if (cs.has_latents()) {
      for (std::size_t d = 0; d < cs.latent_box().dim(); ++d) {
        dims.push_back(cs.latent_box()[d]);
      }
    }
    ConformanceQuery q;
    q.cell = id;
    q.input_region = Box(dims);
    q.a_p = rec.la.a_p;
    q.a_theta = rec.la.a_theta;
    q.b = rec.la.b;
    q.u = rec.la.u;
    std::ostringstream base;
    base << dir_path << "/q_" << id.ip << '_' << id.it << '_';
    for (auto dir : {ConformanceQuery::Direction::kUpper, ConformanceQuery::Direction::kLower}) {
      q.dir = dir;
      write_query(q, base.str() + dir_name(dir) + ".cagq");
      ++count;
    }
  }
  return count;
}

FalsifyResult falsify(const ConformanceQuery& q, const ControlSource& cs, std::size_t n,
                      uint64_t seed) {
  if (n < 1) throw GraphError("falsify needs at least one sample");
  const Box& region = q.input_region;
  const bool upper = q.dir == ConformanceQuery::Direction::kUpper;
  const double bound = upper ? q.u.hi() : q.u.lo();

  FalsifyResult res;
  bool first = true;
  std::vector<double> best;
  auto probe = [&](const std::vector<double>& x) {
    const State s{x[0], x[1]};
    const std::span<const double> latent(x.data() + 2, x.size() - 2);
    const double r = cs.eval(s, latent) - (q.a_p * x[0] + q.a_theta * x[1] + q.b);
    const bool worse = first || (upper ? r > res.worst_residual : r < res.worst_residual);
    if (worse) {
      res.worst_residual = r;
      best = x;
      first = false;
    }
  };

  for (const auto& c : region.corners()) probe(c);
  Rng rng(mix_seed(seed, 0xFA15, upper ? 1 : 2));
  std::vector<double> x(region.dim());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < region.dim(); ++d) {
      x[d] = rng.uniform(region[d].lo(), region[d].hi());
    }
    probe(x);
  }

  const double denom = upper ? bound : -bound;  // positive when U straddles 0
  const double excess = upper ? res.worst_residual : -res.worst_residual;
  if (denom > 0.0) {
    res.max_ratio = excess / denom;
  } else {
    // degenerate bound: call it violated exactly when the residual passes it
    res.max_ratio = excess > -denom ? 2.0 : 0.0;
  }
  const bool violated = upper ? res.worst_residual > bound : res.worst_residual < bound;
  if (violated) res.counterexample = best;
  return res;
}

void write_falsify_csv(const std::vector<FalsifySummaryRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write falsification summary " + path);
  out << "ip,it,direction,max_ratio,verdict\n";
  for (const auto& r : rows) {
    out << r.cell.ip << ',' << r.cell.it << ',' << dir_name(r.dir) << ',' << r.max_ratio
        << ',' << (r.falsified ? "falsified" : "consistent") << '\n';
  }
}

}  // namespace cag
