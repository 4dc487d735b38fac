#pragma once

#include "metastab/kernels.hpp"

namespace metastab::kernels::detail {

// Appends the contributions of one branch restricted to one cell.
void append_branch_cell(const Branch& br, std::uint32_t cell, const UlamLayout& layout, SparseRow& row);
// Sorts by column (stable, so duplicate columns sum in append order) and merges.
void finish_row(SparseRow& row);

} // namespace metastab::kernels::detail
