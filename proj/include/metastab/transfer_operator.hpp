#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "metastab/density.hpp"
#include "metastab/kernels.hpp"
#include "metastab/map_model.hpp"
#include "metastab/observable.hpp"

namespace metastab {

// Compressed sparse rows.
struct CsrMatrix {
  std::size_t rows = 0, cols = 0;
  std::vector<std::size_t> row_ptr;
  std::vector<std::uint32_t> col;
  std::vector<double> val;

  static CsrMatrix from_rows(const std::vector<kernels::SparseRow>& rows, std::size_t cols);
  CsrMatrix transposed() const;
  std::size_t nnz() const { return val.size(); }
  double row_sum(std::size_t r) const;
  // y = A x
  void multiply(std::span<const double> x, std::span<double> y) const;
};

enum class OperatorKind { full, hole };

// Ulam discretization on n uniform cells. Densities are pushed forward by
// right-multiplying row vectors: d' = d M. For hole kind only the cells of
// one interval (assigned by midpoint) are kept, and so are only transitions
// that stay inside it.
class UlamOperator {
public:
  std::size_t n() const { return layout_.n; }
  double eps() const { return eps_; }
  OperatorKind kind() const { return kind_; }
  int block() const { return block_; } // 0-based interval for hole kind, -1 for full
  std::size_t size() const { return layout_.cells.size(); }
  const kernels::UlamLayout& layout() const { return layout_; }
  const CsrMatrix& matrix() const { return forward_; }
  // Interval index of every local cell.
  const std::vector<int>& cell_states() const { return cell_states_; }

  // d M (pushes a density forward).
  void push_forward(std::span<const double> d, std::span<double> out) const;
  // M u (pulls an observable back).
  void pull_back(std::span<const double> u, std::span<double> out) const;

  std::vector<double> row_sums() const;
  // Local vector -> density on the full grid (zero outside the operator's cells).
  CellDensity embed(std::span<const double> local, DensitySource source = DensitySource::ulam) const;
  // Cell averages of a density restricted to the operator's cells.
  std::vector<double> restrict_density(const CellDensity& d) const;
  std::vector<double> restrict_observable(const Observable& a) const;

  // Sparse triplet dump: header lines then "row col value" per entry.
  void write_triplets(std::ostream& os) const;

private:
  friend UlamOperator build_ulam(const MapFamily&, double, std::size_t, OperatorKind, int, kernels::Exec);
  kernels::UlamLayout layout_;
  double eps_ = 0.0;
  OperatorKind kind_ = OperatorKind::full;
  int block_ = -1;
  CsrMatrix forward_, transpose_;
  std::vector<int> cell_states_;
};

// Requires n >= 2m; for hole kind with ε > 0 also n·ε >= 10.
UlamOperator build_ulam(const MapFamily& family, double eps, std::size_t n, OperatorKind kind, int block = -1,
                        kernels::Exec exec = kernels::Exec::parallel);

struct PowerOptions {
  double tol = 1e-12;           // successive-iterate L1 change
  double eigen_tol = 1e-13;     // eigenvalue change
  std::size_t max_iter = 1'000'000;
  bool damped = false;          // iterate (I + M)/2 instead of M
  std::uint64_t seed = 0x5eed;  // start vector for the second eigenvalue
};

// Stationary density of a full operator. At ε = 0 there is one per
// invariant interval; otherwise a single density.
std::vector<CellDensity> invariant_densities(const UlamOperator& op, const PowerOptions& opts = {});
CellDensity invariant_density(const UlamOperator& op, const PowerOptions& opts = {});

// Perron triple of a (hole) operator: λ, φ with φ M = λ φ and ∫φ = 1, and
// ν with M ν = λ ν normalised so that ∫ ν φ = 1.
struct SpectralTriple {
  double lambda = 0.0;
  std::vector<double> right; // density values on the operator's cells
  std::vector<double> left;  // functional values on the operator's cells
  double residual = 0.0;
  std::size_t iterations = 0;
  double cell_width = 0.0;

  // ν(A) = Σ ν_k A_k h for A given by cell values.
  double functional(std::span<const double> a) const;
};

SpectralTriple leading_eigen(const UlamOperator& op, const PowerOptions& opts = {});

struct GapEntry {
  double eps = 0.0;
  double second_modulus = 0.0;
  double second_value = 0.0; // real part estimate (Rayleigh quotient)
  double gap = 0.0;
  bool complex_pair = false;
  std::size_t iterations = 0;
};

GapEntry second_gap(const UlamOperator& op, const PowerOptions& opts = {});

struct GapReport {
  std::vector<GapEntry> table; // sorted by ε
  double slope = 0.0;          // gap ≈ slope · ε
  double r_squared = 0.0;
  double kappa = 0.0;          // 1 / slope: relaxation time in rescaled units
  double eta = 0.0;            // e^{-1}: decay per κ/ε steps implied by the fit
};

GapReport gap_report(std::vector<GapEntry> entries);

struct DecayProfile {
  std::vector<double> values; // ‖λ^{-n} A M^n - target‖_1, n = 0..n_max
  bool truncated = false;     // λ^{-n} would overflow
  double theta = 0.0;         // fitted geometric rate
};

DecayProfile decay_profile(const UlamOperator& op, std::span<const double> a, double lambda,
                           std::span<const double> target, std::size_t n_max);
// target = ν(A) φ from the Perron triple.
DecayProfile decay_profile(const UlamOperator& op, std::span<const double> a, const SpectralTriple& triple,
                           std::size_t n_max);

// Geometric rate from a log-linear fit, ignoring values below `floor`.
double fit_geometric_rate(std::span<const double> values, double floor = 1e-13);

// (PA)(x) = (∫_{I_j} A) φ_j(x) on I_j.
Observable project_P(const Observable& a, const std::vector<CellDensity>& block_densities,
                     const std::vector<Interval>& intervals);

} // namespace metastab
