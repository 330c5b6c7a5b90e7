#include "cag/geom.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cag {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kHalfPi = 0.5 * kPi;
constexpr double kTwoPi = 2.0 * kPi;

/* Outward widening by the soundness slack, relative with an absolute floor
 * of the same magnitude near zero. */
Interval widened(double lo, double hi) {
  const double pad_lo = kSoundnessSlack * std::max(1.0, std::fabs(lo));
  const double pad_hi = kSoundnessSlack * std::max(1.0, std::fabs(hi));
  return Interval(lo - pad_lo, hi + pad_hi);
}

/* Does [lo, hi] contain a point x = anchor + 2*pi*k for integer k? */
bool contains_mod_2pi(double lo, double hi, double anchor) {
  const double k = std::ceil((lo - anchor) / kTwoPi);
  return anchor + kTwoPi * k <= hi;
}

}  // namespace

Interval::Interval(double lo, double hi) : lo_(lo), hi_(hi) {
  if (!(lo <= hi)) {
    throw GeomError("inverted interval bounds [" + std::to_string(lo) + ", " +
                    std::to_string(hi) + "]");
  }
}

Interval interval_add(const Interval& a, const Interval& b) {
  return widened(a.lo() + b.lo(), a.hi() + b.hi());
}

Interval interval_sub(const Interval& a, const Interval& b) {
  return widened(a.lo() - b.hi(), a.hi() - b.lo());
}

Interval interval_scale(const Interval& a, double k) {
  if (k >= 0.0) return widened(k * a.lo(), k * a.hi());
  return widened(k * a.hi(), k * a.lo());
}

Interval interval_shift(const Interval& a, double c) {
  return widened(a.lo() + c, a.hi() + c);
}

Interval interval_hull(const Interval& a, const Interval& b) {
  return Interval(std::min(a.lo(), b.lo()), std::max(a.hi(), b.hi()));
}

std::optional<Interval> interval_intersect(const Interval& a, const Interval& b) {
  const double lo = std::max(a.lo(), b.lo());
  const double hi = std::min(a.hi(), b.hi());
  if (lo > hi) return std::nullopt;
  return Interval(lo, hi);
}

Interval interval_sin(const Interval& a) {
  if (a.width() >= kTwoPi) return Interval(-1.0, 1.0);
  double lo = std::min(std::sin(a.lo()), std::sin(a.hi()));
  double hi = std::max(std::sin(a.lo()), std::sin(a.hi()));
  if (contains_mod_2pi(a.lo(), a.hi(), kHalfPi)) hi = 1.0;
  if (contains_mod_2pi(a.lo(), a.hi(), -kHalfPi)) lo = -1.0;
  const Interval w = widened(lo, hi);
  return Interval(std::max(w.lo(), -1.0), std::min(w.hi(), 1.0));
}

Interval interval_tan(const Interval& a, double guard) {
  const double edge = kHalfPi - guard;
  if (a.lo() < -edge || a.hi() > edge) {
    throw DomainError("interval_tan: input [" + std::to_string(a.lo()) + ", " +
                      std::to_string(a.hi()) + "] leaves the steering model domain");
  }
  // tan is monotone increasing on (-pi/2, pi/2)
  return widened(std::tan(a.lo()), std::tan(a.hi()));
}

Interval interval_clamp(const Interval& a, double limit) {
  const double lo = std::clamp(a.lo(), -limit, limit);
  const double hi = std::clamp(a.hi(), -limit, limit);
  return Interval(lo, hi);
}

Box::Box(std::vector<Interval> dims) : dims_(std::move(dims)) {
  if (dims_.empty()) throw EmptyInput("box with no dimensions");
}

std::vector<double> Box::center() const {
  std::vector<double> c(dims_.size());
  for (std::size_t d = 0; d < dims_.size(); ++d) c[d] = dims_[d].mid();
  return c;
}

bool Box::contains(const Box& inner) const {
  if (inner.dim() != dim()) throw DimMismatch("box dimension mismatch");
  for (std::size_t d = 0; d < dims_.size(); ++d) {
    if (!dims_[d].contains(inner.dims_[d])) return false;
  }
  return true;
}

bool Box::contains_point(std::span<const double> x) const {
  if (x.size() != dim()) throw DimMismatch("point dimension mismatch");
  for (std::size_t d = 0; d < dims_.size(); ++d) {
    if (!dims_[d].contains(x[d])) return false;
  }
  return true;
}

std::vector<std::vector<double>> Box::corners() const {
  const std::size_t n = dims_.size();
  std::vector<std::vector<double>> out;
  out.reserve(std::size_t{1} << n);
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    std::vector<double> pt(n);
    for (std::size_t d = 0; d < n; ++d) {
      pt[d] = (mask >> d) & 1 ? dims_[d].hi() : dims_[d].lo();
    }
    out.push_back(std::move(pt));
  }
  return out;
}

std::string Box::to_string() const {
  std::ostringstream os;
  for (std::size_t d = 0; d < dims_.size(); ++d) {
    if (d) os << " x ";
    os << "[" << dims_[d].lo() << ", " << dims_[d].hi() << "]";
  }
  return os.str();
}

Box box_hull(std::span<const Box> boxes) {
  if (boxes.empty()) throw EmptyInput("box_hull of empty list");
  std::vector<Interval> dims(boxes.front().dims());
  for (const Box& b : boxes.subspan(1)) {
    if (b.dim() != dims.size()) throw DimMismatch("box_hull dimension mismatch");
    for (std::size_t d = 0; d < dims.size(); ++d) {
      dims[d] = interval_hull(dims[d], b[d]);
    }
  }
  return Box(std::move(dims));
}

Box box_hull_points(std::span<const std::vector<double>> points) {
  if (points.empty()) throw EmptyInput("box_hull_points of empty list");
  const std::size_t n = points.front().size();
  std::vector<double> lo(points.front());
  std::vector<double> hi(points.front());
  for (const auto& p : points.subspan(1)) {
    if (p.size() != n) throw DimMismatch("point dimension mismatch");
    for (std::size_t d = 0; d < n; ++d) {
      lo[d] = std::min(lo[d], p[d]);
      hi[d] = std::max(hi[d], p[d]);
    }
  }
  std::vector<Interval> dims;
  dims.reserve(n);
  for (std::size_t d = 0; d < n; ++d) dims.emplace_back(lo[d], hi[d]);
  return Box(std::move(dims));
}

Box box_bloat(const Box& b, double factor) {
  if (factor < 0.0) throw NegativeFactor("negative bloating factor");
  std::vector<Interval> dims;
  dims.reserve(b.dim());
  for (std::size_t d = 0; d < b.dim(); ++d) {
    const double half = 0.5 * (1.0 + factor) * b[d].width();
    const double c = b[d].mid();
    // hull with the input so bloat(b, f) contains b exactly, also under fp rounding
    dims.emplace_back(std::min(c - half, b[d].lo()), std::max(c + half, b[d].hi()));
  }
  return Box(std::move(dims));
}

bool box_contains(const Box& outer, const Box& inner) { return outer.contains(inner); }

std::optional<Box> box_intersect(const Box& a, const Box& b) {
  if (a.dim() != b.dim()) throw DimMismatch("box_intersect dimension mismatch");
  std::vector<Interval> dims;
  dims.reserve(a.dim());
  for (std::size_t d = 0; d < a.dim(); ++d) {
    auto iv = interval_intersect(a[d], b[d]);
    if (!iv) return std::nullopt;
    dims.push_back(*iv);
  }
  return Box(std::move(dims));
}

}  // namespace cag
