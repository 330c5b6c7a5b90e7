/*
 * partition.hpp
 *
 * Uniform grid over the 2-D state domain with a bijection between integer
 * cell indices and boxes, plus a distinguished out-of-domain sink cell.
 */
#pragma once

#include <cstdint>
#include <vector>

#include "cag/geom.hpp"
#include "cag/plant.hpp"

namespace cag {

struct CellId {
  int32_t ip = -1;
  int32_t it = -1;

  bool is_sink() const { return ip < 0; }
  static CellId sink() { return CellId{}; }

  friend bool operator==(const CellId&, const CellId&) = default;
};

class Partition {
 public:
  Partition();  // default AATS domain, 128 x 128 bins
  Partition(Box domain, int32_t bins_p, int32_t bins_theta);

  const Box& domain() const { return domain_; }
  int32_t bins(std::size_t d) const { return d == 0 ? bins_p_ : bins_theta_; }
  int64_t num_cells() const { return int64_t{bins_p_} * bins_theta_; }

  double cell_width(std::size_t d) const;

  /* Containing cell: lower-closed, upper-open bins, top edge belongs to the
   * last bin. Out-of-domain states map to the sink. */
  CellId cell_of(const State& s) const;

  Box cell_box(const CellId& c) const;

  /* Linear index in [0, num_cells); the sink maps to num_cells. */
  int64_t linear(const CellId& c) const;
  CellId from_linear(int64_t idx) const;

  /* All cells whose box intersects b (closed-set intersection); appends the
   * sink when b is not contained in the domain. */
  void cells_intersecting(const Box& b, std::vector<int64_t>* out) const;

  uint64_t fingerprint() const;

 private:
  Box domain_;
  int32_t bins_p_ = 0;
  int32_t bins_theta_ = 0;
};

}  // namespace cag
