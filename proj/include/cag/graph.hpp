/*
 * graph.hpp
 *
 * The cell abstraction graph: per-cell transition computation (linearize ->
 * reach -> containment-checked retries with a growing bloating factor),
 * forward/backward fixpoints, and a versioned text persistence format.
 *
 * The per-cell computation is a data-parallel kernel: cat() runs it under
 * OpenMP, cat_serial() is the reference implementation kept for testing and
 * benchmarking. Both produce bit-identical graphs.
 */
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cag/abstraction.hpp"
#include "cag/controller.hpp"
#include "cag/partition.hpp"
#include "cag/reach.hpp"

namespace cag {

struct GraphError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : GraphError {
  using GraphError::GraphError;
};
struct FormatVersionMismatch : GraphError {
  using GraphError::GraphError;
};
struct HashMismatch : GraphError {
  using GraphError::GraphError;
};

enum class ActuationMode { kContinuous, kFixed };

struct CatConfig {
  LinearizeConfig lin;
  double bf0 = 0.1;      // initial bloating factor
  double inc = 2.0;      // growth on containment failure
  int max_retries = 8;   // attempts beyond the first
  int n_substeps = kDefaultSubsteps;
  /* Start-box subdivision per dimension: the cell is covered by k x k
   * sub-boxes reached independently and unioned. Cuts the wrapping effect
   * roughly by 1/k at negligible cost next to the witness simulations. */
  int reach_subdiv = 4;
  ActuationMode mode = ActuationMode::kContinuous;
  double frequency = 0.0;  // fixed mode only [Hz]
  /* Keep edges from every retry attempt (the printed form of the transition
   * algorithm) instead of only the final, containment-verified one. */
  bool accumulate_retry_edges = false;
  PlantParams plant;

  void validate() const;
};

struct CellRecord {
  LinearAbstraction la;
  int retries = 0;
  int escalations = 0;
  bool unresolved = false;  // containment never passed: successors = everything
  bool succ_all = false;    // conservative "may go anywhere" edge set
  std::vector<int64_t> succ;   // sorted linear ids; sink id = num_cells
  std::vector<int64_t> inter;  // sorted; cells touched at intermediate times
};

class CellGraph {
 public:
  CellGraph() = default;
  CellGraph(Partition part, std::vector<CellRecord> cells, uint64_t controller_hash,
            uint64_t config_hash, double horizon, ActuationMode mode, double frequency);

  const Partition& partition() const { return part_; }
  int64_t num_cells() const { return part_.num_cells(); }
  int64_t sink_id() const { return part_.num_cells(); }
  const CellRecord& cell(int64_t idx) const { return cells_[static_cast<std::size_t>(idx)]; }
  const std::vector<CellRecord>& cells() const { return cells_; }

  uint64_t controller_hash() const { return controller_hash_; }
  uint64_t config_hash() const { return config_hash_; }
  double horizon() const { return horizon_; }
  ActuationMode mode() const { return mode_; }
  double frequency() const { return frequency_; }

  /* Successors of a linear id (sink self-loops); out is overwritten. */
  void successors(int64_t idx, std::vector<int64_t>* out) const;

 private:
  Partition part_;
  std::vector<CellRecord> cells_;
  uint64_t controller_hash_ = 0;
  uint64_t config_hash_ = 0;
  double horizon_ = 1.0;
  ActuationMode mode_ = ActuationMode::kContinuous;
  double frequency_ = 0.0;
};

/* One cell of the transition computation; exposed for tests. */
CellRecord cat_cell(const ControlSource& cs, const Partition& part, const CellId& cell,
                    const CatConfig& cfg);

/* Compute Abstract Transitions over every cell. jobs <= 0 uses all cores. */
CellGraph cat(const ControlSource& cs, const Partition& part, const CatConfig& cfg,
              int jobs = 0);

/* Serial reference implementation (no OpenMP), kept for testing. */
CellGraph cat_serial(const ControlSource& cs, const Partition& part, const CatConfig& cfg);

/* A simulated trajectory mapped onto the partition with the same absorbing
 * convention the graph uses: once a sample leaves the domain the sink owns
 * the trajectory, including its endpoint. The oracle side of the
 * simulation-containment soundness checks. */
struct TrajectoryCells {
  int64_t endpoint = -1;               // linear id; sink id when absorbed
  std::vector<int64_t> intermediate;   // sorted, samples up to absorption
  bool absorbed = false;
};

TrajectoryCells trajectory_cells(const Trajectory& traj, const Partition& part);

struct ForwardReachResult {
  std::vector<int64_t> reachable;  // sorted linear ids
  int iterations = 0;
};

/* Least fixpoint containing C0 and closed under successors. */
ForwardReachResult forward_reach(const std::vector<int64_t>& c0, const CellGraph& g);

/* All cells that can reach a seed via the reversed transition relation. */
std::vector<int64_t> backward_reach(const std::vector<int64_t>& unsafe_seed,
                                    const CellGraph& g);

void save_graph(const CellGraph& g, const std::string& path);
CellGraph load_graph(const std::string& path);

}  // namespace cag
