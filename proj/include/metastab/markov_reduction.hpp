#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "metastab/density.hpp"
#include "metastab/map_model.hpp"
#include "metastab/observable.hpp"

namespace metastab {

// Per-pair record of the μ_i(H_ij,ε)/ε = β_ij + slope·ε extrapolation.
struct RateFit {
  int from = 0, to = 0;
  double intercept = 0.0;
  double slope = 0.0;
  std::vector<double> eps;
  std::vector<double> ratios; // μ/ε at each ε
  std::vector<double> residuals;
};

struct RateMatrix {
  Eigen::MatrixXd beta; // zero diagonal
  std::vector<RateFit> fits;
  std::vector<std::string> warnings;

  int m() const { return static_cast<int>(beta.rows()); }
  Eigen::VectorXd exit_rates() const; // β_j = Σ_k β_jk
  bool irreducible() const;
};

RateMatrix rate_matrix(const Eigen::MatrixXd& beta);

// Least-squares extrapolation of hole masses to ε → 0. Needs >= 3 positive ε.
RateMatrix estimate_beta(const MapFamily& family, const std::vector<double>& eps_list,
                         const std::vector<CellDensity>& densities);

// Strongly connected as a directed graph on off-diagonal positive entries.
bool irreducible(const Eigen::MatrixXd& rates);

struct Generator {
  Eigen::MatrixXd G;
  explicit Generator(const RateMatrix& rates);
  explicit Generator(Eigen::MatrixXd g);
  int m() const { return static_cast<int>(G.rows()); }
};

// pG = 0, Σp = 1.
Eigen::RowVectorXd stationary(const Generator& gen);

struct Propagator {
  Eigen::MatrixXd P;
  // e^{tG} was replaced by its t → ∞ limit 1·p.
  bool stationary_limit = false;
};

// e^{tG} by scaling and squaring around a degree-18 Taylor core.
Propagator transition_matrix(const Generator& gen, double t);

// 𝐀(j) = ∫_{I_j} A φ_j dx.
Eigen::VectorXd aggregate_observable(const Observable& a, const std::vector<CellDensity>& densities,
                                     const std::vector<Interval>& intervals);

struct MarkovDiffusion {
  double quadrature = 0.0;     // ∫_0^∞ Σ p_j Ā_j p_jk(t) Ā_k dt
  double solve = 0.0;          // Σ p_j Ā_j y_j with G y = -Ā, p·y = 0
  double paper_display = 0.0;  // <pĀ, G^{-1} Ā> on the zero-mean subspace
  double truncation_time = 0.0;
  double value() const { return solve; }
  double two_sided() const { return 2.0 * solve; }
};

// Throws ConsistencyError if the two methods differ by more than 1e-6.
MarkovDiffusion markov_diffusion(const Generator& gen, const Eigen::RowVectorXd& p, const Eigen::VectorXd& centered);

struct ReducedChain {
  RateMatrix rates;
  Generator generator;
  Eigen::RowVectorXd p;
  Eigen::VectorXd aggregated; // 𝐀
  Eigen::VectorXd centered;   // Ā = 𝐀 - p·𝐀
  MarkovDiffusion diffusion;
  std::string density_source;

  nlohmann::json to_json() const;
};

ReducedChain reduce(const RateMatrix& rates, const Eigen::VectorXd& aggregated, std::string density_source);

struct ChainJump {
  double holding_time = 0.0;
  int state = 0; // state entered
};

struct ChainPath {
  int initial_state = 0;
  std::vector<ChainJump> jumps; // all jumps with t_k <= horizon
};

ChainPath sample_chain(const Generator& gen, int initial_state, double horizon, std::uint64_t seed,
                       std::uint64_t path_index = 0);

// ∫_0^T Ā(X_t) dt along a path (censored at T).
double path_integral(const ChainPath& path, const Eigen::VectorXd& values, double horizon);

} // namespace metastab
