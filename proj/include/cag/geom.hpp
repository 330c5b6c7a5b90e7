/*
 * geom.hpp
 *
 * Interval arithmetic and axis-aligned box operations. Boxes are the only
 * set representation used by the toolkit.
 */
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cag {

/* Relative outward widening applied to every interval operation, used in
 * place of directed rounding. Documented soundness constant. */
inline constexpr double kSoundnessSlack = 1e-12;

/* Guard margin for interval_tan: inputs closer than this to +-pi/2 are a
 * hard error (default 5 degrees). */
inline constexpr double kTanGuardMargin = 5.0 * 3.14159265358979323846 / 180.0;

struct GeomError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DomainError : GeomError {
  using GeomError::GeomError;
};
struct EmptyInput : GeomError {
  using GeomError::GeomError;
};
struct DimMismatch : GeomError {
  using GeomError::GeomError;
};
struct NegativeFactor : GeomError {
  using GeomError::GeomError;
};

/// Closed real interval [lo, hi]. Construction rejects inverted bounds.
class Interval {
 public:
  Interval() = default;
  Interval(double lo, double hi);

  static Interval point(double x) { return Interval(x, x); }

  double lo() const { return lo_; }
  double hi() const { return hi_; }
  double width() const { return hi_ - lo_; }
  double mid() const { return 0.5 * (lo_ + hi_); }

  bool contains(double x) const { return lo_ <= x && x <= hi_; }
  bool contains(const Interval& o) const { return lo_ <= o.lo_ && o.hi_ <= hi_; }
  bool intersects(const Interval& o) const { return lo_ <= o.hi_ && o.lo_ <= hi_; }

  Interval operator-() const { return Interval(-hi_, -lo_); }

 private:
  double lo_ = 0.0;
  double hi_ = 0.0;
};

/* Exact-endpoint constructors (no slack); arithmetic below applies slack. */
Interval interval_add(const Interval& a, const Interval& b);
Interval interval_sub(const Interval& a, const Interval& b);
Interval interval_scale(const Interval& a, double k);
Interval interval_shift(const Interval& a, double c);
Interval interval_hull(const Interval& a, const Interval& b);
std::optional<Interval> interval_intersect(const Interval& a, const Interval& b);

/* sin over an interval; monotone-piece analysis, result within [-1, 1]. */
Interval interval_sin(const Interval& a);

/* tan over an interval strictly inside (-pi/2, pi/2); throws DomainError if
 * the input crosses the guard margin around the poles. */
Interval interval_tan(const Interval& a, double guard = kTanGuardMargin);

/* Clamp an interval into [-limit, limit]; collapses to the nearer bound when
 * the input lies entirely outside. Exact (saturation is exact in fp). */
Interval interval_clamp(const Interval& a, double limit);

inline Interval operator+(const Interval& a, const Interval& b) { return interval_add(a, b); }
inline Interval operator-(const Interval& a, const Interval& b) { return interval_sub(a, b); }
inline Interval operator*(double k, const Interval& a) { return interval_scale(a, k); }

/// Axis-aligned hyperrectangle; dimension order is fixed (p then theta for
/// the AATS state space, latent dimensions appended when present).
class Box {
 public:
  Box() = default;
  explicit Box(std::vector<Interval> dims);
  Box(const Interval& d0, const Interval& d1) : dims_{d0, d1} {}

  std::size_t dim() const { return dims_.size(); }
  const Interval& operator[](std::size_t d) const { return dims_[d]; }
  const std::vector<Interval>& dims() const { return dims_; }

  double width(std::size_t d) const { return dims_[d].width(); }
  std::vector<double> center() const;

  bool contains(const Box& inner) const;
  bool contains_point(std::span<const double> x) const;

  /* All 2^dim corner points, lexicographic in (lo, hi) choices. */
  std::vector<std::vector<double>> corners() const;

  std::string to_string() const;

 private:
  std::vector<Interval> dims_;
};

/* Smallest box containing every input box. Throws EmptyInput on empty list. */
Box box_hull(std::span<const Box> boxes);
Box box_hull_points(std::span<const std::vector<double>> points);

/* Width of every dimension multiplied by (1 + factor), center preserved. */
Box box_bloat(const Box& b, double factor);

bool box_contains(const Box& outer, const Box& inner);

std::optional<Box> box_intersect(const Box& a, const Box& b);

}  // namespace cag
