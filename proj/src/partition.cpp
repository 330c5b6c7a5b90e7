#include "cag/partition.hpp"

#include <algorithm>
#include <cmath>

#include "cag/rng.hpp"

namespace cag {

namespace {
constexpr double kDeg = 3.14159265358979323846 / 180.0;
}

Partition::Partition()
    : Partition(Box(Interval(-10.0, 10.0), Interval(-30.0 * kDeg, 30.0 * kDeg)), 128, 128) {}

Partition::Partition(Box domain, int32_t bins_p, int32_t bins_theta)
    : domain_(std::move(domain)), bins_p_(bins_p), bins_theta_(bins_theta) {
  if (domain_.dim() != 2) throw DimMismatch("partition domain must be 2-dimensional");
  if (bins_p_ < 1 || bins_theta_ < 1) throw GeomError("bins per dimension must be >= 1");
  if (!(domain_.width(0) > 0.0) || !(domain_.width(1) > 0.0)) {
    throw GeomError("partition domain must have positive width");
  }
}

double Partition::cell_width(std::size_t d) const {
  return domain_.width(d) / static_cast<double>(bins(d));
}

CellId Partition::cell_of(const State& s) const {
  const double x[2] = {s.p, s.theta};
  int32_t idx[2];
  for (std::size_t d = 0; d < 2; ++d) {
    if (x[d] < domain_[d].lo() || x[d] > domain_[d].hi()) return CellId::sink();
    const double rel = (x[d] - domain_[d].lo()) / cell_width(d);
    int32_t i = static_cast<int32_t>(std::floor(rel));
    i = std::clamp(i, 0, bins(d) - 1);  // top edge belongs to the last bin
    idx[d] = i;
  }
  return CellId{idx[0], idx[1]};
}

Box Partition::cell_box(const CellId& c) const {
  if (c.is_sink()) throw GeomError("the sink cell has no box");
  const double wp = cell_width(0), wt = cell_width(1);
  const double plo = domain_[0].lo() + wp * c.ip;
  const double tlo = domain_[1].lo() + wt * c.it;
  return Box(Interval(plo, plo + wp), Interval(tlo, tlo + wt));
}

int64_t Partition::linear(const CellId& c) const {
  if (c.is_sink()) return num_cells();
  return int64_t{c.ip} * bins_theta_ + c.it;
}

CellId Partition::from_linear(int64_t idx) const {
  if (idx < 0 || idx >= num_cells()) return CellId::sink();
  return CellId{static_cast<int32_t>(idx / bins_theta_),
                static_cast<int32_t>(idx % bins_theta_)};
}

void Partition::cells_intersecting(const Box& b, std::vector<int64_t>* out) const {
  if (b.dim() != 2) throw DimMismatch("cells_intersecting expects a 2-d box");
  bool outside = false;
  int32_t lo_idx[2], hi_idx[2];
  for (std::size_t d = 0; d < 2; ++d) {
    if (b[d].lo() < domain_[d].lo() || b[d].hi() > domain_[d].hi()) outside = true;
    // empty overlap with the domain in this dimension: sink only
    if (b[d].hi() < domain_[d].lo() || b[d].lo() > domain_[d].hi()) {
      out->push_back(num_cells());
      return;
    }
    const double w = cell_width(d);
    const double rel_lo = (std::max(b[d].lo(), domain_[d].lo()) - domain_[d].lo()) / w;
    const double rel_hi = (std::min(b[d].hi(), domain_[d].hi()) - domain_[d].lo()) / w;
    // cell boxes are closed, so a box ending exactly on a bin boundary
    // touches both neighbours
    double fl = std::floor(rel_lo);
    if (fl == rel_lo && fl > 0.0) fl -= 1.0;
    lo_idx[d] = std::clamp(static_cast<int32_t>(fl), 0, bins(d) - 1);
    hi_idx[d] = std::clamp(static_cast<int32_t>(std::floor(rel_hi)), 0, bins(d) - 1);
  }
  for (int32_t i = lo_idx[0]; i <= hi_idx[0]; ++i) {
    for (int32_t j = lo_idx[1]; j <= hi_idx[1]; ++j) {
      out->push_back(int64_t{i} * bins_theta_ + j);
    }
  }
  if (outside) out->push_back(num_cells());
}

uint64_t Partition::fingerprint() const {
  uint64_t h = fnv64_str("partition-v1");
  const double vals[4] = {domain_[0].lo(), domain_[0].hi(), domain_[1].lo(), domain_[1].hi()};
  h = fnv64(vals, sizeof vals, h);
  h = fnv64(&bins_p_, sizeof bins_p_, h);
  h = fnv64(&bins_theta_, sizeof bins_theta_, h);
  return h;
}

}  // namespace cag
