#include "metastab/density.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace metastab {

Interval Interval::intersect(const Interval& o) const {
  Interval r{std::max(lo, o.lo), std::min(hi, o.hi)};
  if (r.hi < r.lo) r.hi = r.lo;
  return r;
}

std::string to_string(DensitySource s) {
  switch (s) {
  case DensitySource::analytic: return "analytic";
  case DensitySource::ulam: return "ulam";
  case DensitySource::empirical: return "empirical";
  }
  return "unknown";
}

double CellDensity::value_at(double x, Side side) const {
  const auto n = static_cast<double>(values.size());
  const double scaled = x * n;
  long k = static_cast<long>(std::floor(scaled));
  if (side == Side::left && scaled == std::floor(scaled)) --k;
  k = std::clamp<long>(k, 0, static_cast<long>(values.size()) - 1);
  return values[static_cast<std::size_t>(k)];
}

double CellDensity::integral(const Interval& iv) const {
  const double a = std::max(iv.lo, 0.0), b = std::min(iv.hi, 1.0);
  if (!(b > a)) return 0.0;
  const double n = static_cast<double>(values.size());
  const double h = 1.0 / n;
  auto first = static_cast<std::size_t>(std::clamp(std::floor(a * n), 0.0, n - 1));
  auto last = static_cast<std::size_t>(std::clamp(std::ceil(b * n) - 1, 0.0, n - 1));
  double sum = 0.0;
  for (std::size_t k = first; k <= last; ++k) {
    const double c0 = static_cast<double>(k) * h, c1 = static_cast<double>(k + 1) * h;
    const double overlap = std::min(b, c1) - std::max(a, c0);
    if (overlap > 0) sum += values[k] * overlap;
  }
  return sum;
}

double CellDensity::l1_distance(const CellDensity& other) const {
  const std::size_t na = cells(), nb = other.cells();
  std::size_t i = 0, j = 0;
  double x = 0.0, total = 0.0;
  // Walk the merged grid; edges of both grids are k/n, computed independently.
  while (i < na && j < nb) {
    const double ea = static_cast<double>(i + 1) / static_cast<double>(na);
    const double eb = static_cast<double>(j + 1) / static_cast<double>(nb);
    const double next = std::min(ea, eb);
    total += std::abs(values[i] - other.values[j]) * (next - x);
    x = next;
    if (ea <= next) ++i;
    if (eb <= next) ++j;
  }
  return total;
}

CellDensity CellDensity::refined(std::size_t n) const {
  if (n % cells() != 0) throw std::invalid_argument("CellDensity::refined: cell count must be a multiple");
  CellDensity out;
  out.source = source;
  out.values.resize(n);
  const std::size_t f = n / cells();
  for (std::size_t k = 0; k < n; ++k) out.values[k] = values[k / f];
  return out;
}

CellDensity piecewise_uniform(std::size_t cells, const std::vector<Interval>& blocks,
                              const std::vector<double>& weights) {
  if (blocks.size() != weights.size()) throw std::invalid_argument("piecewise_uniform: size mismatch");
  CellDensity d;
  d.values.assign(cells, 0.0);
  const double h = 1.0 / static_cast<double>(cells);
  for (std::size_t k = 0; k < cells; ++k) {
    const Interval cell{static_cast<double>(k) * h, static_cast<double>(k + 1) * h};
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      const double len = blocks[b].length();
      if (len <= 0) continue;
      d.values[k] += weights[b] / len * cell.intersect(blocks[b]).length() / h;
    }
  }
  return d;
}

} // namespace metastab
