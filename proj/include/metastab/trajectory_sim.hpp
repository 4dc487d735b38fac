#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "metastab/density.hpp"
#include "metastab/kernels.hpp"
#include "metastab/map_model.hpp"
#include "metastab/markov_reduction.hpp"
#include "metastab/observable.hpp"
#include "metastab/stats.hpp"

namespace metastab {

// Double-precision orbits of integer-slope maps lose one bit per step and
// collapse onto dyadic (or triadic) cycles within ~60 steps. Before every
// step the point is moved by (u - 1/2)·2^-52, u uniform on [0, 1) and
// reflected at 0 and 1. This keeps the low-order bits random without
// changing the law at any visible scale.
struct Dither {
  std::uint64_t seed = 0;
  std::uint64_t index = 0; // one stream per trajectory
};

enum class OrbitRecord { positions, jumps_only };

struct OrbitJump {
  std::uint64_t step = 0; // x_step is the first point in the new interval
  int from = 0, to = 0;
  double pre_jump_x = 0.0; // x_{step-1}
};

struct OrbitData {
  int initial_state = 0;
  std::vector<double> positions; // x_0 .. x_N when recorded
  std::vector<OrbitJump> jumps;
  double final_x = 0.0;
};

// x_{k+1} = T_ε(x_k) with the right-side convention, N times. Jumps are
// changes of z(x) between successive points.
OrbitData iterate_orbit(const MapFamily& family, double eps, double x0, std::uint64_t steps,
                        OrbitRecord record = OrbitRecord::jumps_only,
                        const std::optional<Dither>& dither = std::nullopt);

enum class InitialLaw { lebesgue, mu_j, mu_eps };
std::string to_string(InitialLaw law);
InitialLaw initial_law_from_string(const std::string& s);

struct SimConfig {
  double eps = 0.0;
  std::size_t n_traj = 1;
  double horizon_S = 1.0;       // orbit length ⌈S/ε⌉ steps
  std::uint64_t burn_in = 0;    // mu_eps only
  std::uint64_t seed = 0;
  InitialLaw initial_law = InitialLaw::lebesgue;
  int initial_state = 0;        // 0-based j for mu_j
  // Density to sample mu_j from; defaults to the family's analytic φ_j.
  std::optional<CellDensity> initial_density;
  bool dither = true;
  kernels::Exec exec = kernels::Exec::parallel;

  std::uint64_t horizon_steps() const;
  void validate() const;
  nlohmann::json to_json() const;
};

struct Jump {
  std::uint64_t holding_steps = 0; // 𝒯_k
  double rescaled = 0.0;           // ε 𝒯_k
  int state_after = 0;             // z_k
  double pre_jump_x = 0.0;
};

struct JumpRecord {
  double x0 = 0.0; // point at which counting starts (after burn-in)
  int initial_state = 0;
  std::uint64_t horizon_steps = 0;
  std::vector<Jump> jumps;
};

struct JumpSimulation {
  SimConfig config;
  std::vector<JumpRecord> records;
  std::vector<std::string> warnings;
  std::size_t without_jump = 0;
};

// Draws x from the density restricted to I_j by inverting its cumulative
// distribution function.
class IntervalSampler {
public:
  IntervalSampler(const CellDensity& density, const Interval& iv);
  double operator()(double u) const;

private:
  std::vector<double> lo_, hi_, cdf_;
};

// max_jumps = 0 keeps every jump up to the horizon.
JumpSimulation simulate_jumps(const MapFamily& family, const SimConfig& cfg, std::size_t max_jumps);

// Markov paths as jump records. Rescaled holding times stay exact; the step
// counts place each jump at step ⌈t/ε⌉.
std::vector<JumpRecord> records_from_chain_paths(const std::vector<ChainPath>& paths, double eps,
                                                 double horizon_S);

struct TransitionFrequency {
  int to = 0;
  std::size_t count = 0;
  double frequency = 0.0;
  double expected = 0.0;
  double std_error = 0.0;
};

struct StateLaw {
  int state = 0;
  std::size_t samples = 0;
  bool skipped = false;
  double rate = 0.0;        // β_j
  double ks = 0.0;          // vs Exp(β_j)
  double ks_critical = 0.0; // 1.36/√n
  std::vector<TransitionFrequency> targets;
  // max_k |freq_k(short half) - freq_k(long half)| and its standard error
  double independence_split = 0.0;
  double independence_se = 0.0;
};

struct JumpLawReport {
  std::vector<StateLaw> states;
  double holding_correlation = 0.0; // consecutive holding times, each scaled by its exit rate
  std::size_t holding_pairs = 0;

  const StateLaw& state(int j) const;
  nlohmann::json to_json() const;
};

// Holding times are grouped by the state they were spent in.
JumpLawReport jump_law_test(const std::vector<JumpRecord>& records, const ReducedChain& chain,
                            std::size_t min_samples = 1000);

struct ProbabilityEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t trials = 0;
};

// Fraction of records with some k >= 0 such that t_k <= S/ε and
// 𝒯_{k+1} <= σ/ε (t_0 = 0), in rescaled time.
ProbabilityEstimate double_jump_stat(const std::vector<JumpRecord>& records, double S, double sigma);

struct DiffusionEstimate {
  std::string method; // "batch_means" or "green_kubo"
  double value = 0.0; // D̂_ε (not multiplied by ε)
  double std_error = 0.0;
  std::uint64_t N = 0;        // steps per trajectory (batch means) or truncation lag
  std::size_t n_traj = 0;     // trajectories or orbits
  double truncation_S = 0.0;
  std::uint64_t orbit_length = 0; // green_kubo only
};

struct DiffusionOptions {
  std::size_t gk_orbits = 32;
  std::uint64_t gk_orbit_length = 1'000'000;
  std::uint64_t pilot_steps = 10'000'000;
  double plateau_tolerance = 0.1; // relative change allowed between N and 2N
};

struct DiffusionResult {
  double pilot_mean = 0.0;
  double pilot_se = 0.0;
  DiffusionEstimate batch_means;    // N = ⌈S/ε⌉
  DiffusionEstimate batch_means_2N; // plateau check
  DiffusionEstimate green_kubo;
  std::vector<double> autocorrelation;    // Ĉ(n), n = 0..N, orbit average
  std::vector<double> autocorrelation_se;
  std::vector<std::string> warnings;

  // |BM - GK| / sqrt(se_BM² + se_GK²)
  double estimator_z() const;
};

// cfg.initial_law must be mu_eps.
DiffusionResult estimate_diffusion(const MapFamily& family, double eps, const Observable& a, const SimConfig& cfg,
                                   const DiffusionOptions& opts = {});

struct EmpiricalDensityOptions {
  std::uint64_t burn_in = 10'000;
  std::size_t chunks = 64;
  std::optional<int> start_state; // sample x0 uniformly on I_j instead of [0, 1]
  bool dither = true;
  kernels::Exec exec = kernels::Exec::parallel;
};

struct EmpiricalDensity {
  CellDensity histogram; // integrates to 1
  std::vector<double> interval_masses;
  std::vector<double> interval_mass_se; // from the spread over chunks
  std::uint64_t total_steps = 0;
  std::optional<double> l1_to_limit;
  std::optional<double> l1_to_ulam;
};

EmpiricalDensity empirical_density(const MapFamily& family, double eps, std::size_t n_cells, std::uint64_t total_steps,
                                   std::uint64_t seed, const std::optional<CellDensity>& limit,
                                   const std::optional<CellDensity>& ulam, const EmpiricalDensityOptions& opts = {});

// One row per trajectory; holding steps and states as ';'-separated lists.
void write_jump_csv(std::ostream& os, const std::vector<JumpRecord>& records);
// One row per lag.
void write_autocorrelation_csv(std::ostream& os, const DiffusionResult& result, double eps);

} // namespace metastab
