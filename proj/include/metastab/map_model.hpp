#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>
#include <json.hpp>

#include "metastab/density.hpp"

namespace metastab {

using Rational = boost::multiprecision::cpp_rational;

// One monotone piece of a piecewise expanding map: either x -> s*x + c, or a
// user-supplied C^2 function with its derivative.
class Branch {
public:
  using Fn = std::function<double(double)>;

  Branch(Interval domain, double slope, double intercept);
  Branch(Interval domain, Fn value, Fn derivative);

  const Interval& domain() const { return domain_; }
  bool is_affine() const { return std::holds_alternative<Affine>(map_); }
  // Affine coefficients; only meaningful when is_affine().
  double slope() const;
  double intercept() const;

  double operator()(double x) const;
  double derivative(double x) const;
  bool increasing() const;

  // Minimum |T'| on the closed domain. Exact for affine branches, sampled on
  // `samples` points otherwise.
  double min_expansion(int samples = 2001) const;
  // Image of the closed domain.
  Interval image() const;
  // { x in domain ∩ restrict : target.lo <= T(x) < target.hi }. Smooth branches
  // are inverted by bisection to 1e-14.
  Interval preimage(const Interval& target, const Interval& restrict) const;

private:
  struct Affine {
    double slope, intercept;
  };
  struct Smooth {
    Fn value, derivative;
  };
  Interval domain_;
  std::variant<Affine, Smooth> map_;
};

// Exact ε = 0 data for affine families, used by the orbit check.
struct ExactBranch {
  Rational lo, hi, slope, intercept;
};

struct ExactDescription {
  std::vector<ExactBranch> branches; // at ε = 0
  std::vector<Rational> boundaries;
};

// An ε-parametrized piecewise expanding map of [0, 1] with declared
// metastable intervals I_j = [b_{j-1}, b_j].
class MapFamily {
public:
  using BranchBuilder = std::function<std::vector<Branch>(double eps)>;

  MapFamily(std::string name, nlohmann::json params, std::vector<double> boundaries, Interval eps_range,
            BranchBuilder builder, bool builtin);

  const std::string& name() const { return name_; }
  const nlohmann::json& params() const { return params_; }
  bool builtin() const { return builtin_; }
  // Closed range [lo, hi] of admissible ε.
  const Interval& eps_range() const { return eps_range_; }
  int m() const { return static_cast<int>(boundaries_.size()) + 1; }
  const std::vector<double>& boundaries() const { return boundaries_; }
  // I_1 .. I_m as half-open intervals (the last one closed at 1).
  std::vector<Interval> intervals() const;
  Interval interval(int j) const;
  // 0-based index of the interval containing x; boundary points belong to
  // the interval on their right.
  int state_of(double x) const;

  // Throws ConfigError outside eps_range().
  std::vector<Branch> branches(double eps) const;
  void check_eps(double eps) const;

  MapFamily& with_exact(ExactDescription exact);
  const std::optional<ExactDescription>& exact() const { return exact_; }
  // Analytic ε = 0 invariant densities φ_j, one per interval, if known.
  MapFamily& with_reference_densities(std::vector<CellDensity> densities);
  const std::vector<CellDensity>& reference_densities() const { return reference_densities_; }

  nlohmann::json to_json() const;

private:
  std::string name_;
  nlohmann::json params_;
  std::vector<double> boundaries_;
  Interval eps_range_;
  BranchBuilder builder_;
  bool builtin_;
  std::optional<ExactDescription> exact_;
  std::vector<CellDensity> reference_densities_;
};

// Branches resolved at one ε, laid out for tight evaluation loops.
class BranchTable {
public:
  BranchTable(const MapFamily& family, double eps);

  double operator()(double x, Side side = Side::right) const;
  const std::vector<Branch>& branches() const { return branches_; }
  std::size_t branch_index(double x, Side side) const;
  std::vector<double> breakpoints() const;
  double eps() const { return eps_; }

private:
  std::vector<Branch> branches_;
  std::vector<double> right_edges_;
  std::vector<double> slope_, intercept_;
  bool all_affine_ = true;
  double eps_;
};

// --- built-in and serializable families -----------------------------------

MapFamily two_cell();
MapFamily three_cell();

// Affine family given as a table. Every coefficient is linear in ε:
// value(ε) = v0 + v1 * ε.
struct AffineTableBranch {
  double lo0, lo1, hi0, hi1;
  double slope0, slope1;
  double intercept0, intercept1;
};
MapFamily affine_table(std::string name, std::vector<double> boundaries, std::vector<AffineTableBranch> branches,
                       Interval eps_range);

MapFamily builtin_family(const std::string& name);
MapFamily family_from_json(const nlohmann::json& j);

// git-style blob hash: SHA-1 of "blob <len>\0<content>", lowercase hex.
std::string git_blob_hash(const std::string& content);
// git_blob_hash of the family's canonical JSON text.
std::string family_content_hash(const MapFamily& family);

// --- operations -------------------------------------------------------------

// One-sided value T_ε(x±).
double eval_map(const MapFamily& family, double eps, double x, Side side);

struct HoleSet {
  double eps = 0.0;
  int m = 0;
  // intervals[i][j]: H_{ij} as disjoint subintervals of I_i (empty for i == j).
  std::vector<std::vector<std::vector<Interval>>> intervals;
  // measures[i][j] = μ_i(H_{ij}).
  std::vector<std::vector<double>> measures;

  const std::vector<Interval>& holes(int i, int j) const { return intervals[i][j]; }
  double measure(int i, int j) const { return measures[i][j]; }
  double total_measure(int i) const;
  double lebesgue(int i, int j) const;
};

// Hole intervals H_{ij,ε} = I_i ∩ T_ε^{-1}(I_j) and their masses under the
// supplied ε = 0 densities (one per interval, each integrating to 1).
HoleSet compute_holes(const MapFamily& family, double eps, const std::vector<CellDensity>& densities);

// Points of H_0 = T_0^{-1}(B) \ B, using one-sided limits at breakpoints.
std::vector<double> infinitesimal_holes(const MapFamily& family);

enum class CheckStatus { pass, fail, asserted, skipped };
std::string to_string(CheckStatus s);

struct CheckResult {
  std::string id;    // "I", "II", ..., "expansion"
  std::string title;
  CheckStatus status;
  std::string detail;
};

struct ValidationReport {
  std::string family;
  std::vector<CheckResult> checks;
  bool passed() const;
  const CheckResult& check(const std::string& id) const;
  nlohmann::json to_json() const;
};

struct ValidationOptions {
  int orbit_depth = 50;
  // Optional ε = 0 densities; defaults to the family's analytic ones.
  std::vector<CellDensity> densities;
};

ValidationReport validate_assumptions(const MapFamily& family, const std::vector<double>& eps_grid,
                                      const ValidationOptions& options = {});

} // namespace metastab
