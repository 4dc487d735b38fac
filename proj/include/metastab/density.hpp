#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace metastab {

// Half-open [lo, hi) unless stated otherwise; measure-zero endpoint choices
// never matter to the quantities computed from it.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double length() const { return hi > lo ? hi - lo : 0.0; }
  bool empty() const { return !(hi > lo); }
  bool contains(double x) const { return x >= lo && x < hi; }
  Interval intersect(const Interval& o) const;

  friend bool operator==(const Interval&, const Interval&) = default;
};

enum class Side { left, right };

enum class DensitySource { analytic, ulam, empirical };
std::string to_string(DensitySource s);

// A density on [0, 1] that is constant on each of `values.size()` uniform
// cells. Used both for analytic reference densities (few cells) and for
// Ulam or histogram output (many cells).
struct CellDensity {
  std::vector<double> values;
  DensitySource source = DensitySource::analytic;

  std::size_t cells() const { return values.size(); }
  double width() const { return 1.0 / static_cast<double>(values.size()); }
  // One-sided value at x; at a cell edge `left` reads the cell to the left.
  double value_at(double x, Side side = Side::right) const;
  // Exact integral over [a, b] ∩ [0, 1].
  double integral(const Interval& iv) const;
  double total_mass() const { return integral({0.0, 1.0}); }
  // L1 distance to another cell density; the grids need not match.
  double l1_distance(const CellDensity& other) const;
  // Re-express on a finer uniform grid whose cell count is a multiple.
  CellDensity refined(std::size_t cells) const;
};

// Constant density over each interval, scaled so each block integrates to
// the given weight (weights need not sum to 1).
CellDensity piecewise_uniform(std::size_t cells, const std::vector<Interval>& blocks,
                              const std::vector<double>& weights);

} // namespace metastab
