#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "metastab/error.hpp"
#include "metastab/experiments.hpp"
#include "metastab/transfer_operator.hpp"

namespace metastab::experiments {
namespace {

using json = nlohmann::json;

// Reads j[key] as T if present. Type mismatches name the full key.
template <class T>
void read(const json& j, const char* key, T& out, const std::string& prefix) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config: key '" + prefix + key + "' has the wrong type (" + e.what() + ")");
  }
}

const json& section(const json& j, const char* key) {
  static const json empty = json::object();
  if (!j.contains(key)) return empty;
  if (!j.at(key).is_object()) throw ConfigError(std::string("config: '") + key + "' must be an object");
  return j.at(key);
}

void check_known_keys(const json& j, const std::vector<std::string>& known, const std::string& where) {
  for (const auto& [k, v] : j.items())
    if (std::find(known.begin(), known.end(), k) == known.end())
      throw ConfigError("config: unknown key '" + where + k + "'");
}

int read_state(const json& j, const char* key, int fallback, const std::string& prefix) {
  int one_based = fallback + 1;
  read(j, key, one_based, prefix);
  if (one_based < 1) throw ConfigError("config: '" + prefix + key + "' is 1-based and must be >= 1");
  return one_based - 1;
}

void require_decreasing(const std::vector<double>& grid, const std::string& key) {
  if (grid.empty()) throw ConfigError("config: '" + key + "' must not be empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0)) throw ConfigError("config: '" + key + "' entries must be positive");
    if (i > 0 && !(grid[i] < grid[i - 1])) throw ConfigError("config: '" + key + "' must be strictly decreasing");
  }
}

} // namespace

const std::vector<std::string>& all_suites() {
  static const std::vector<std::string> s{"validate", "ulam", "rates", "jumps", "diffusion"};
  return s;
}

nlohmann::json Tolerances::to_json() const {
  return {{"escape_rate_deviation", escape_rate_deviation},
          {"gap_relative", gap_relative},
          {"gap_r_squared", gap_r_squared},
          {"density_l1", density_l1},
          {"ks", ks},
          {"target_frequency", target_frequency},
          {"independence_split", independence_split},
          {"holding_correlation", holding_correlation},
          {"diffusion_relative", diffusion_relative},
          {"estimator_z", estimator_z},
          {"mass_z", mass_z},
          {"double_jump_z", double_jump_z},
          {"dual_method", dual_method}};
}

nlohmann::json ExperimentConfig::to_json() const {
  return {{"family", family_json},
          {"eps_grid", eps_grid},
          {"observable", observable_json},
          {"density_source", density_source},
          {"ulam", {{"n", ulam.n}, {"decay_steps", ulam.decay_steps}}},
          {"jumps",
           {{"eps_grid", jumps.eps_grid},
            {"n_traj", jumps.n_traj},
            {"horizon_S", jumps.horizon_S},
            {"start_state", jumps.start_state + 1},
            {"max_jumps", jumps.max_jumps},
            {"initial_density", jumps.ulam_initial_density ? "ulam" : "analytic"}}},
          {"double_jump",
           {{"eps", double_jump.eps},
            {"S", double_jump.S},
            {"sigmas", double_jump.sigmas},
            {"n_traj", double_jump.n_traj},
            {"start_state", double_jump.start_state + 1}}},
          {"diffusion",
           {{"eps", diffusion.eps},
            {"S", diffusion.S},
            {"n_traj", diffusion.n_traj},
            {"burn_in", diffusion.burn_in},
            {"gk_orbits", diffusion.gk_orbits},
            {"gk_orbit_length", diffusion.gk_orbit_length},
            {"pilot_steps", diffusion.pilot_steps}}},
          {"density",
           {{"cells", density.cells},
            {"total_steps", density.total_steps},
            {"burn_in", density.burn_in},
            {"chunks", density.chunks},
            {"eps_grid", density.eps_grid}}},
          {"tolerances", tolerances.to_json()},
          {"seed", seed},
          {"output_dir", output_dir},
          {"suites", suites},
          {"validation_orbit_depth", validation_orbit_depth}};
}

ExperimentConfig parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  check_known_keys(j,
                   {"family", "eps_grid", "observable", "density_source", "ulam", "jumps", "double_jump", "diffusion",
                    "density", "tolerances", "seed", "output_dir", "suites", "validation_orbit_depth"},
                   "");
  ExperimentConfig c;
  if (!j.contains("family")) throw ConfigError("config: missing key 'family'");
  c.family_json = j.at("family").is_string() ? json{{"name", j.at("family")}} : j.at("family");
  read(j, "eps_grid", c.eps_grid, "");
  require_decreasing(c.eps_grid, "eps_grid");
  if (c.eps_grid.size() < 3) throw ConfigError("config: 'eps_grid' needs at least 3 values for the rate fit");
  c.observable_json = j.value("observable", json{{"type", "interval_values"}});
  read(j, "density_source", c.density_source, "");
  if (c.density_source != "analytic" && c.density_source != "ulam")
    throw ConfigError("config: 'density_source' must be 'analytic' or 'ulam'");
  read(j, "seed", c.seed, "");
  read(j, "output_dir", c.output_dir, "");
  read(j, "validation_orbit_depth", c.validation_orbit_depth, "");
  c.suites = all_suites();
  read(j, "suites", c.suites, "");
  for (const auto& s : c.suites)
    if (std::find(all_suites().begin(), all_suites().end(), s) == all_suites().end())
      throw ConfigError("config: unknown suite '" + s + "' in 'suites'");

  const auto& u = section(j, "ulam");
  check_known_keys(u, {"n", "decay_steps"}, "ulam.");
  read(u, "n", c.ulam.n, "ulam.");
  read(u, "decay_steps", c.ulam.decay_steps, "ulam.");

  const auto& jm = section(j, "jumps");
  check_known_keys(jm, {"eps_grid", "n_traj", "horizon_S", "start_state", "max_jumps", "initial_density"}, "jumps.");
  c.jumps.eps_grid = c.eps_grid;
  read(jm, "eps_grid", c.jumps.eps_grid, "jumps.");
  require_decreasing(c.jumps.eps_grid, "jumps.eps_grid");
  read(jm, "n_traj", c.jumps.n_traj, "jumps.");
  read(jm, "horizon_S", c.jumps.horizon_S, "jumps.");
  c.jumps.start_state = read_state(jm, "start_state", 0, "jumps.");
  read(jm, "max_jumps", c.jumps.max_jumps, "jumps.");
  std::string init = "analytic";
  read(jm, "initial_density", init, "jumps.");
  if (init != "analytic" && init != "ulam") throw ConfigError("config: 'jumps.initial_density' must be analytic or ulam");
  c.jumps.ulam_initial_density = init == "ulam";

  const auto& dj = section(j, "double_jump");
  check_known_keys(dj, {"eps", "S", "sigmas", "n_traj", "start_state"}, "double_jump.");
  read(dj, "eps", c.double_jump.eps, "double_jump.");
  read(dj, "S", c.double_jump.S, "double_jump.");
  read(dj, "sigmas", c.double_jump.sigmas, "double_jump.");
  require_decreasing(c.double_jump.sigmas, "double_jump.sigmas");
  read(dj, "n_traj", c.double_jump.n_traj, "double_jump.");
  c.double_jump.start_state = read_state(dj, "start_state", 0, "double_jump.");

  const auto& df = section(j, "diffusion");
  check_known_keys(df, {"eps", "S", "n_traj", "burn_in", "gk_orbits", "gk_orbit_length", "pilot_steps"}, "diffusion.");
  read(df, "eps", c.diffusion.eps, "diffusion.");
  read(df, "S", c.diffusion.S, "diffusion.");
  read(df, "n_traj", c.diffusion.n_traj, "diffusion.");
  read(df, "burn_in", c.diffusion.burn_in, "diffusion.");
  read(df, "gk_orbits", c.diffusion.gk_orbits, "diffusion.");
  read(df, "gk_orbit_length", c.diffusion.gk_orbit_length, "diffusion.");
  read(df, "pilot_steps", c.diffusion.pilot_steps, "diffusion.");

  const auto& dn = section(j, "density");
  check_known_keys(dn, {"cells", "total_steps", "burn_in", "chunks", "eps_grid"}, "density.");
  read(dn, "cells", c.density.cells, "density.");
  read(dn, "total_steps", c.density.total_steps, "density.");
  read(dn, "burn_in", c.density.burn_in, "density.");
  read(dn, "chunks", c.density.chunks, "density.");
  c.density.eps_grid = c.eps_grid;
  read(dn, "eps_grid", c.density.eps_grid, "density.");
  require_decreasing(c.density.eps_grid, "density.eps_grid");

  const auto& t = section(j, "tolerances");
  auto& tol = c.tolerances;
  check_known_keys(t,
                   {"escape_rate_deviation", "gap_relative", "gap_r_squared", "density_l1", "ks", "target_frequency",
                    "independence_split", "holding_correlation", "diffusion_relative", "estimator_z", "mass_z",
                    "double_jump_z", "dual_method"},
                   "tolerances.");
  read(t, "escape_rate_deviation", tol.escape_rate_deviation, "tolerances.");
  read(t, "gap_relative", tol.gap_relative, "tolerances.");
  read(t, "gap_r_squared", tol.gap_r_squared, "tolerances.");
  read(t, "density_l1", tol.density_l1, "tolerances.");
  read(t, "ks", tol.ks, "tolerances.");
  read(t, "target_frequency", tol.target_frequency, "tolerances.");
  read(t, "independence_split", tol.independence_split, "tolerances.");
  read(t, "holding_correlation", tol.holding_correlation, "tolerances.");
  read(t, "diffusion_relative", tol.diffusion_relative, "tolerances.");
  read(t, "estimator_z", tol.estimator_z, "tolerances.");
  read(t, "mass_z", tol.mass_z, "tolerances.");
  read(t, "double_jump_z", tol.double_jump_z, "tolerances.");
  read(t, "dual_method", tol.dual_method, "tolerances.");

  if (c.ulam.n < 16) throw ConfigError("config: 'ulam.n' must be at least 16");
  if (c.jumps.n_traj < 1 || c.double_jump.n_traj < 1 || c.diffusion.n_traj < 2)
    throw ConfigError("config: trajectory counts must be positive (diffusion needs >= 2)");
  if (!(c.jumps.horizon_S > 0) || !(c.diffusion.S > 0) || !(c.double_jump.S > 0))
    throw ConfigError("config: horizons must be positive");
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

Observable observable_from_json(const json& j, const MapFamily& family) {
  try {
    if (j.value("type", "") == "interval_values") {
      std::vector<double> values;
      if (j.contains("values")) {
        values = j.at("values").get<std::vector<double>>();
      } else if (family.m() == 2) {
        values = {1.0, -1.0};
      } else {
        throw ConfigError("observable: 'interval_values' needs 'values' for m != 2");
      }
      if (static_cast<int>(values.size()) != family.m())
        throw ConfigError("observable: 'interval_values' needs one value per interval");
      std::vector<double> edges{0.0};
      for (double b : family.boundaries()) edges.push_back(b);
      edges.push_back(1.0);
      return Observable::step(edges, values);
    }
    return Observable::from_json(j);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("observable: malformed definition (") + e.what() + ")");
  }
}

fs::path resolve_output_dir(const ExperimentConfig& config, const std::optional<std::string>& cli_out) {
  if (cli_out) return fs::path(*cli_out);
  if (!config.output_dir.empty()) return fs::path(config.output_dir);
  const char* root = std::getenv("METASTAB_OUT");
  const fs::path base = root && *root ? fs::path(root) : fs::path("metastab_out");
  return base / config.family_json.value("name", "family");
}

Context make_context(const ExperimentConfig& config, const fs::path& out_dir) {
  MapFamily family = family_from_json(config.family_json);
  for (double e : config.eps_grid) family.check_eps(e);
  const auto m = static_cast<std::size_t>(family.m());
  if (config.ulam.n % (2 * m) != 0)
    throw ConfigError("config: 'ulam.n' must be a multiple of 2m = " + std::to_string(2 * m));
  for (int s : {config.jumps.start_state, config.double_jump.start_state})
    if (s >= family.m()) throw ConfigError("config: start state exceeds the number of intervals");

  std::vector<CellDensity> densities;
  if (config.density_source == "analytic") {
    densities = family.reference_densities();
    if (densities.empty())
      throw ConfigError("config: family '" + family.name() + "' has no analytic densities; use density_source = ulam");
  } else {
    densities = invariant_densities(build_ulam(family, 0.0, config.ulam.n, OperatorKind::full));
  }
  Observable obs = observable_from_json(config.observable_json, family);

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  const fs::path probe = out_dir / ".write_probe";
  {
    std::ofstream f(probe);
    if (!f) throw ConfigError("output directory '" + out_dir.string() + "' is not writable");
  }
  fs::remove(probe, ec);
  return Context{config, std::move(family), std::move(obs), std::move(densities), out_dir};
}

ReducedChain build_chain(const Context& ctx) {
  const auto rates = estimate_beta(ctx.family, ctx.config.eps_grid, ctx.densities);
  const auto agg = aggregate_observable(ctx.observable, ctx.densities, ctx.family.intervals());
  return reduce(rates, agg, ctx.config.density_source);
}

void write_text(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    out << text;
  }
  fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

} // namespace metastab::experiments
