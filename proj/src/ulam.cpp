#include <cmath>
#include <iomanip>

#include "metastab/error.hpp"
#include "metastab/transfer_operator.hpp"

namespace metastab {

CsrMatrix CsrMatrix::from_rows(const std::vector<kernels::SparseRow>& rows, std::size_t cols) {
  CsrMatrix a;
  a.rows = rows.size();
  a.cols = cols;
  a.row_ptr.assign(rows.size() + 1, 0);
  for (std::size_t r = 0; r < rows.size(); ++r) a.row_ptr[r + 1] = a.row_ptr[r] + rows[r].size();
  a.col.reserve(a.row_ptr.back());
  a.val.reserve(a.row_ptr.back());
  for (const auto& row : rows)
    for (const auto& [c, v] : row) {
      a.col.push_back(c);
      a.val.push_back(v);
    }
  return a;
}

CsrMatrix CsrMatrix::transposed() const {
  CsrMatrix t;
  t.rows = cols;
  t.cols = rows;
  t.row_ptr.assign(cols + 1, 0);
  for (auto c : col) ++t.row_ptr[c + 1];
  for (std::size_t r = 0; r < cols; ++r) t.row_ptr[r + 1] += t.row_ptr[r];
  t.col.resize(nnz());
  t.val.resize(nnz());
  std::vector<std::size_t> fill(t.row_ptr.begin(), t.row_ptr.end() - 1);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
      const std::size_t dst = fill[col[k]]++;
      t.col[dst] = static_cast<std::uint32_t>(r);
      t.val[dst] = val[k];
    }
  return t;
}

double CsrMatrix::row_sum(std::size_t r) const {
  double s = 0.0;
  for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) s += val[k];
  return s;
}

void CsrMatrix::multiply(std::span<const double> x, std::span<double> y) const {
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) s += val[k] * x[col[k]];
    y[r] = s;
  }
}

void UlamOperator::push_forward(std::span<const double> d, std::span<double> out) const {
  transpose_.multiply(d, out);
}

void UlamOperator::pull_back(std::span<const double> u, std::span<double> out) const { forward_.multiply(u, out); }

std::vector<double> UlamOperator::row_sums() const {
  std::vector<double> out(size());
  for (std::size_t r = 0; r < size(); ++r) out[r] = forward_.row_sum(r);
  return out;
}

CellDensity UlamOperator::embed(std::span<const double> local, DensitySource source) const {
  CellDensity d;
  d.source = source;
  d.values.assign(n(), 0.0);
  for (std::size_t k = 0; k < size(); ++k) d.values[layout_.cells[k]] = local[k];
  return d;
}

std::vector<double> UlamOperator::restrict_density(const CellDensity& d) const {
  std::vector<double> out(size());
  const double h = 1.0 / static_cast<double>(n());
  for (std::size_t k = 0; k < size(); ++k) {
    const double g = layout_.cells[k];
    out[k] = d.integral({g * h, (g + 1) * h}) / h;
  }
  return out;
}

std::vector<double> UlamOperator::restrict_observable(const Observable& a) const {
  std::vector<double> out(size());
  const double h = 1.0 / static_cast<double>(n());
  for (std::size_t k = 0; k < size(); ++k) {
    const double g = layout_.cells[k];
    out[k] = a.integral({g * h, (g + 1) * h}) / h;
  }
  return out;
}

void UlamOperator::write_triplets(std::ostream& os) const {
  os << "# ulam_operator n=" << n() << " kind=" << (kind_ == OperatorKind::full ? "full" : "hole")
     << " block=" << (block_ >= 0 ? block_ + 1 : 0) << " eps=" << std::setprecision(17) << eps_
     << " size=" << size() << " nnz=" << forward_.nnz() << "\n";
  os << "# row col value (global cell indices, 0-based)\n";
  for (std::size_t r = 0; r < forward_.rows; ++r)
    for (std::size_t k = forward_.row_ptr[r]; k < forward_.row_ptr[r + 1]; ++k)
      os << layout_.cells[r] << ' ' << layout_.cells[forward_.col[k]] << ' ' << forward_.val[k] << '\n';
}

UlamOperator build_ulam(const MapFamily& family, double eps, std::size_t n, OperatorKind kind, int block,
                        kernels::Exec exec) {
  family.check_eps(eps);
  const int m = family.m();
  if (n < static_cast<std::size_t>(2 * m) || n % static_cast<std::size_t>(2 * m) != 0)
    throw ConfigError("build_ulam: n must be a positive multiple of 2m = " + std::to_string(2 * m));
  if (n > (std::size_t{1} << 31)) throw ConfigError("build_ulam: too many cells");
  if (kind == OperatorKind::hole) {
    if (block < 0 || block >= m) throw ConfigError("build_ulam: hole kind needs a valid interval index");
    if (eps > 0 && static_cast<double>(n) * eps < 10.0)
      throw ResolutionError("build_ulam: n*eps = " + std::to_string(static_cast<double>(n) * eps) +
                            " < 10; hole operators need n*eps >= 10 so holes span several cells");
  } else {
    block = -1;
  }

  UlamOperator op;
  op.eps_ = eps;
  op.kind_ = kind;
  op.block_ = block;
  op.layout_.n = n;
  op.layout_.local_of.assign(n, -1);
  for (std::size_t g = 0; g < n; ++g) {
    const double mid = (static_cast<double>(g) + 0.5) / static_cast<double>(n);
    const int state = family.state_of(mid);
    if (kind == OperatorKind::hole && state != block) continue;
    op.layout_.local_of[g] = static_cast<std::int32_t>(op.layout_.cells.size());
    op.layout_.cells.push_back(static_cast<std::uint32_t>(g));
    op.cell_states_.push_back(state);
  }
  const BranchTable table(family, eps);
  const auto rows = exec == kernels::Exec::parallel ? kernels::ulam_rows_parallel(table, op.layout_)
                                                    : kernels::ulam_rows_reference(table, op.layout_);
  op.forward_ = CsrMatrix::from_rows(rows, op.layout_.cells.size());
  op.transpose_ = op.forward_.transposed();
  return op;
}

} // namespace metastab
