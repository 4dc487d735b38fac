#pragma once

// Data-parallel inner loops. Each kernel has a serial reference version and
// an OpenMP version; the two must agree bit for bit, whatever the thread count.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "metastab/map_model.hpp"

namespace metastab::kernels {

enum class Exec { serial, parallel };

void set_threads(int n);
int max_threads();

using SparseRow = std::vector<std::pair<std::uint32_t, double>>;

// Cells of a uniform n-grid that take part in an operator, with the map
// between global cell index and local row/column index (-1: excluded).
struct UlamLayout {
  std::size_t n = 0;
  std::vector<std::uint32_t> cells;
  std::vector<std::int32_t> local_of;
};

// Row k holds Leb(cell_k ∩ T^{-1} cell_l) / Leb(cell_k) for every retained l,
// sorted by l. Transitions to excluded cells are dropped.
//
// Reference: branch-major sweep, one thread.
std::vector<SparseRow> ulam_rows_reference(const BranchTable& table, const UlamLayout& layout);
// Row-major sweep, rows distributed over OpenMP threads.
std::vector<SparseRow> ulam_rows_parallel(const BranchTable& table, const UlamLayout& layout);

// fn(i) for i in [0, n). With Exec::parallel, iterations run on OpenMP
// threads with dynamic scheduling; fn must only write to slot i.
void for_each_index(std::size_t n, const std::function<void(std::size_t)>& fn, Exec exec);

// Occupation counts over `cells` bins accumulated by `chunks` independent
// work items. fill(chunk, hist) adds that chunk's counts into hist.
// Parallel version keeps one histogram per thread and merges by cell index.
std::vector<std::uint64_t> histogram_reference(std::size_t chunks, std::size_t cells,
                                               const std::function<void(std::size_t, std::vector<std::uint64_t>&)>& fill);
std::vector<std::uint64_t> histogram_parallel(std::size_t chunks, std::size_t cells,
                                              const std::function<void(std::size_t, std::vector<std::uint64_t>&)>& fill);

} // namespace metastab::kernels
