#include <algorithm>
#include <cmath>

#include "metastab/kernels.hpp"
#include "ulam_detail.hpp"

namespace metastab::kernels {

namespace detail {

void append_branch_cell(const Branch& br, std::uint32_t cell, const UlamLayout& layout, SparseRow& row) {
  const double n = static_cast<double>(layout.n);
  const Interval c{cell / n, (cell + 1) / n};
  const Interval piece = br.domain().intersect(c);
  if (piece.empty()) return;
  const double h = 1.0 / n;
  const auto last_cell = static_cast<long>(layout.n) - 1;
  if (br.is_affine()) {
    // Work in cell units measured from the first image cell, so the overlaps
    // telescope to the image length without absolute-coordinate rounding.
    const double s = br.slope(), b = br.intercept(), slope = std::abs(s);
    const double width = (piece.hi - piece.lo) * n;
    const double start = ((s > 0 ? s * piece.lo : s * piece.hi) + b) * n;
    const double base = std::floor(start);
    const double t0 = start - base, t1 = t0 + slope * width;
    for (long i = 0; i < t1; ++i) {
      const long l = static_cast<long>(base) + i;
      const double overlap = std::min(t1, static_cast<double>(i + 1)) - std::max(t0, static_cast<double>(i));
      if (l < 0 || l > last_cell || !(overlap > 0)) continue;
      const std::int32_t local = layout.local_of[static_cast<std::size_t>(l)];
      if (local >= 0) row.emplace_back(static_cast<std::uint32_t>(local), overlap / slope);
    }
    return;
  }
  const double fa = br(piece.lo), fb = br(piece.hi);
  const double y0 = std::min(fa, fb), y1 = std::max(fa, fb);
  const long l0 = std::clamp(static_cast<long>(std::floor(y0 * n)), 0L, last_cell);
  const long l1 = std::clamp(static_cast<long>(std::ceil(y1 * n)) - 1, 0L, last_cell);
  for (long l = l0; l <= l1; ++l) {
    const std::int32_t local = layout.local_of[static_cast<std::size_t>(l)];
    if (local < 0) continue;
    const Interval pre = br.preimage({l / n, (l + 1) / n}, piece);
    if (pre.length() > 0) row.emplace_back(static_cast<std::uint32_t>(local), pre.length() / h);
  }
}

void finish_row(SparseRow& row) {
  std::stable_sort(row.begin(), row.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  SparseRow merged;
  merged.reserve(row.size());
  for (const auto& e : row) {
    if (!merged.empty() && merged.back().first == e.first)
      merged.back().second += e.second;
    else
      merged.push_back(e);
  }
  row = std::move(merged);
}

} // namespace detail

std::vector<SparseRow> ulam_rows_reference(const BranchTable& table, const UlamLayout& layout) {
  std::vector<SparseRow> rows(layout.cells.size());
  const double n = static_cast<double>(layout.n);
  for (const auto& br : table.branches()) {
    const auto first = static_cast<std::size_t>(std::floor(br.domain().lo * n));
    const auto last = std::min(static_cast<std::size_t>(std::ceil(br.domain().hi * n)), layout.n);
    for (std::size_t g = first; g < last; ++g) {
      const std::int32_t local = layout.local_of[g];
      if (local < 0) continue;
      detail::append_branch_cell(br, static_cast<std::uint32_t>(g), layout, rows[static_cast<std::size_t>(local)]);
    }
  }
  for (auto& row : rows) detail::finish_row(row);
  return rows;
}

std::vector<std::uint64_t> histogram_reference(std::size_t chunks, std::size_t cells,
                                               const std::function<void(std::size_t, std::vector<std::uint64_t>&)>& fill) {
  std::vector<std::uint64_t> hist(cells, 0);
  for (std::size_t c = 0; c < chunks; ++c) fill(c, hist);
  return hist;
}

} // namespace metastab::kernels
