#include <cmath>

#include <omp.h>

#include "metastab/kernels.hpp"
#include "ulam_detail.hpp"

namespace metastab::kernels {

void set_threads(int n) {
  if (n > 0) omp_set_num_threads(n);
}

int max_threads() { return omp_get_max_threads(); }

std::vector<SparseRow> ulam_rows_parallel(const BranchTable& table, const UlamLayout& layout) {
  std::vector<SparseRow> rows(layout.cells.size());
  const auto& branches = table.branches();
  const double n = static_cast<double>(layout.n);
  const auto count = static_cast<std::int64_t>(rows.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t k = 0; k < count; ++k) {
    const std::uint32_t g = layout.cells[static_cast<std::size_t>(k)];
    const Interval cell{g / n, (g + 1) / n};
    auto& row = rows[static_cast<std::size_t>(k)];
    for (const auto& br : branches)
      if (!br.domain().intersect(cell).empty()) detail::append_branch_cell(br, g, layout, row);
    detail::finish_row(row);
  }
  return rows;
}

void for_each_index(std::size_t n, const std::function<void(std::size_t)>& fn, Exec exec) {
  if (exec == Exec::serial) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t i = 0; i < count; ++i) fn(static_cast<std::size_t>(i));
}

std::vector<std::uint64_t> histogram_parallel(std::size_t chunks, std::size_t cells,
                                              const std::function<void(std::size_t, std::vector<std::uint64_t>&)>& fill) {
  std::vector<std::uint64_t> hist(cells, 0);
  const auto count = static_cast<std::int64_t>(chunks);
#pragma omp parallel
  {
    std::vector<std::uint64_t> local(cells, 0);
#pragma omp for schedule(dynamic, 1)
    for (std::int64_t c = 0; c < count; ++c) fill(static_cast<std::size_t>(c), local);
#pragma omp critical(metastab_histogram_merge)
    for (std::size_t k = 0; k < cells; ++k) hist[k] += local[k];
  }
  return hist;
}

} // namespace metastab::kernels
