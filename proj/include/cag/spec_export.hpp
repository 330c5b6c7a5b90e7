/*
 * spec_export.hpp
 *
 * Conformance checking support for external open-loop verifiers: build the
 * skip-connection network that carries the inputs into the output space,
 * emit per-cell query files asserting the controller stays inside the
 * per-cell linear envelope, and falsify queries by sampling.
 */
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cag/controller.hpp"
#include "cag/graph.hpp"

namespace cag {

/* Network with outputs (x_1, ..., x_n, net(x)); identity carries are
 * realized through ReLU layers as the pair ReLU(x) - ReLU(-x). */
Network build_skip_network(const Network& net);

struct ConformanceQuery {
  enum class Direction { kUpper, kLower };

  CellId cell;
  Box input_region;  // gamma, with latent bounds appended when present
  double a_p = 0.0, a_theta = 0.0, b = 0.0;
  Interval u;
  Direction dir = Direction::kUpper;
};

void write_query(const ConformanceQuery& q, const std::string& path);
ConformanceQuery parse_query(const std::string& path);

/* Two query files per cell plus the skip-network weight file; returns the
 * number of query files written. Throws HashMismatch when the graph was not
 * built from this controller. */
int64_t export_queries(const CellGraph& g, const ControlSource& cs,
                       const std::string& dir_path);

struct FalsifyResult {
  std::optional<std::vector<double>> counterexample;  // worst violator input
  double max_ratio = 0.0;      // residual / bound; >= 1 iff counterexample
  double worst_residual = 0.0;
};

/* Sample n points uniformly in the input region plus its corners; return
 * the worst violator of the query bound, if any. */
FalsifyResult falsify(const ConformanceQuery& q, const ControlSource& cs, std::size_t n,
                      uint64_t seed);

struct FalsifySummaryRow {
  CellId cell;
  ConformanceQuery::Direction dir;
  double max_ratio = 0.0;
  bool falsified = false;
};

void write_falsify_csv(const std::vector<FalsifySummaryRow>& rows, const std::string& path);

}  // namespace cag
