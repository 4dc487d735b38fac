#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "metastab/map_model.hpp"
#include "metastab/markov_reduction.hpp"
#include "metastab/observable.hpp"

namespace metastab::experiments {

namespace fs = std::filesystem;

enum class ExitCode : int { ok = 0, check_failed = 1, config_error = 2 };

// Acceptance tolerances; every default can be overridden in the config.
struct Tolerances {
  double escape_rate_deviation = 0.1; // |(1-λ)/ε - β_j| / β_j at the smallest ε
  double gap_relative = 0.2;          // |gap - g ε| / (g ε), g = generator gap
  double gap_r_squared = 0.9;
  double density_l1 = 0.1;            // ‖φ_ε - φ_0‖₁ at the smallest ε
  double ks = 0.02;
  double target_frequency = 0.01;
  double independence_split = 0.02;
  double holding_correlation = 0.02;
  double diffusion_relative = 0.2;    // |ε D̂ - 2 D^M| / (2 D^M)
  double estimator_z = 2.0;           // batch means vs Green-Kubo
  double mass_z = 3.0;                // interval masses vs p
  double double_jump_z = 2.0;         // map vs chain
  double dual_method = 1e-8;          // D^M quadrature vs solve

  nlohmann::json to_json() const;
};

struct UlamSettings {
  std::size_t n = 4096;
  std::size_t decay_steps = 60;
};

struct JumpSettings {
  std::vector<double> eps_grid; // KS trend; the last entry carries the checks
  std::size_t n_traj = 100'000;
  double horizon_S = 30.0;
  int start_state = 0;          // 0-based
  std::size_t max_jumps = 3;
  bool ulam_initial_density = false;
};

struct DoubleJumpSettings {
  double eps = 0.01;
  double S = 1.0;
  std::vector<double> sigmas{0.2, 0.1, 0.05, 0.01};
  std::size_t n_traj = 100'000;
  int start_state = 0;
};

struct DiffusionSettings {
  double eps = 0.01;
  double S = 20.0;
  std::size_t n_traj = 10'000;
  std::uint64_t burn_in = 2'000;
  std::size_t gk_orbits = 32;
  std::uint64_t gk_orbit_length = 1'000'000;
  std::uint64_t pilot_steps = 10'000'000;
};

struct DensitySettings {
  std::size_t cells = 4096;
  std::uint64_t total_steps = 10'000'000;
  std::uint64_t burn_in = 10'000;
  std::size_t chunks = 64;
  std::vector<double> eps_grid; // histogram trend; defaults to the Ulam grid
};

const std::vector<std::string>& all_suites();

struct ExperimentConfig {
  nlohmann::json family_json;   // {"name": ...} or a full affine table
  std::vector<double> eps_grid; // strictly decreasing, positive
  nlohmann::json observable_json;
  std::string density_source = "analytic"; // ε = 0 densities: analytic | ulam
  UlamSettings ulam;
  JumpSettings jumps;
  DoubleJumpSettings double_jump;
  DiffusionSettings diffusion;
  DensitySettings density;
  Tolerances tolerances;
  std::uint64_t seed = 1;
  std::string output_dir;            // empty: derived from METASTAB_OUT
  std::vector<std::string> suites;   // suites the report aggregates
  int validation_orbit_depth = 50;

  nlohmann::json to_json() const; // fully resolved, including defaults
};

// Throws ConfigError with the offending key.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const fs::path& path);

// Observable spec; "interval_values" assigns one value per interval I_j.
Observable observable_from_json(const nlohmann::json& j, const MapFamily& family);

// Shared derived objects (family, densities, chain), built deterministically.
struct Context {
  ExperimentConfig config;
  MapFamily family;
  Observable observable;
  std::vector<CellDensity> densities; // ε = 0, one per interval
  fs::path out_dir;
};

Context make_context(const ExperimentConfig& config, const fs::path& out_dir);
ReducedChain build_chain(const Context& ctx);

struct Check {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  std::string relation; // "<=", ">=", "decreasing", ...
  bool passed = false;
  std::string detail;

  nlohmann::json to_json() const;
};

struct SuiteResult {
  std::string suite;
  std::vector<std::string> files; // relative to the output directory
  std::vector<Check> checks;
  std::vector<std::string> warnings;
  bool passed() const;
};

SuiteResult run_validate(const Context& ctx);
SuiteResult run_ulam(const Context& ctx);
SuiteResult run_rates(const Context& ctx);
SuiteResult run_jumps(const Context& ctx);
SuiteResult run_diffusion(const Context& ctx);
// Throws MissingSuiteError if a configured suite has not produced its summary.
SuiteResult run_report(const Context& ctx);

class MissingSuiteError : public std::runtime_error {
public:
  explicit MissingSuiteError(const std::string& suite)
      : std::runtime_error("report: suite '" + suite + "' has not been run (missing outputs)"), suite_(suite) {}
  const std::string& suite() const { return suite_; }

private:
  std::string suite_;
};

// manifest.json in the output directory: resolved config, seed, input
// hashes, and per suite its files (with hashes), timings and checks.
class Manifest {
public:
  static Manifest load_or_create(const fs::path& out_dir);
  void set_run_info(const ExperimentConfig& config, const MapFamily& family);
  void record_suite(const SuiteResult& result, double wall_seconds, const std::string& started_utc);
  std::optional<nlohmann::json> suite(const std::string& name) const;
  void save() const;
  const nlohmann::json& json() const { return doc_; }

private:
  fs::path path_;
  fs::path dir_;
  nlohmann::json doc_;
};

// Writes the text atomically enough for our purposes (temp file + rename).
void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);

// Default output directory: $METASTAB_OUT (or ./metastab_out) / family name.
fs::path resolve_output_dir(const ExperimentConfig& config, const std::optional<std::string>& cli_out);

// Full CLI entry point; returns the process exit code.
int run_cli(int argc, char** argv);

} // namespace metastab::experiments
