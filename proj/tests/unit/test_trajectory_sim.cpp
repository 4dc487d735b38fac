#include <doctest.h>

#include <set>
#include <sstream>

#include "../oracles/oracles.hpp"
#include "metastab/error.hpp"
#include "metastab/trajectory_sim.hpp"

using namespace metastab;

namespace {

SimConfig from_state(double eps, int state, std::size_t n_traj, double S, std::uint64_t seed) {
  SimConfig c;
  c.eps = eps;
  c.n_traj = n_traj;
  c.horizon_S = S;
  c.seed = seed;
  c.initial_law = InitialLaw::mu_j;
  c.initial_state = state;
  return c;
}

std::vector<double> first_jumps(const JumpSimulation& sim) {
  std::vector<double> out;
  for (const auto& r : sim.records)
    if (!r.jumps.empty()) out.push_back(r.jumps.front().rescaled);
  return out;
}

bool same(const std::vector<JumpRecord>& a, const std::vector<JumpRecord>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].x0 != b[i].x0 || a[i].jumps.size() != b[i].jumps.size()) return false;
    for (std::size_t k = 0; k < a[i].jumps.size(); ++k)
      if (a[i].jumps[k].holding_steps != b[i].jumps[k].holding_steps ||
          a[i].jumps[k].pre_jump_x != b[i].jumps[k].pre_jump_x || a[i].jumps[k].state_after != b[i].jumps[k].state_after)
        return false;
  }
  return true;
}

ReducedChain chain_of(const MapFamily& f) {
  const auto rates = estimate_beta(f, {0.04, 0.02, 0.01}, f.reference_densities());
  return reduce(rates, Eigen::VectorXd::Zero(f.m()), "analytic");
}

} // namespace

TEST_CASE("orbit examples") {
  const auto f = two_cell();
  const auto o = iterate_orbit(f, 0.0, 0.3, 100, OrbitRecord::positions);
  REQUIRE(o.positions.size() == 101);
  for (double x : o.positions) CHECK(f.state_of(x) == 0);
  CHECK(o.jumps.empty());

  const auto j = iterate_orbit(f, 0.01, 0.248, 1, OrbitRecord::positions);
  CHECK(j.positions[1] == doctest::Approx(0.506).epsilon(1e-15));
  REQUIRE(j.jumps.size() == 1);
  CHECK(j.jumps[0].step == 1);
  CHECK(j.jumps[0].from == 0);
  CHECK(j.jumps[0].to == 1);
  CHECK(j.jumps[0].pre_jump_x == 0.248);
}

TEST_CASE("undithered orbits collapse, dithered ones do not") {
  const auto f = two_cell();
  const auto plain = iterate_orbit(f, 0.0, 0.1234567, 200, OrbitRecord::positions);
  const double end = plain.final_x;
  CHECK((end == 0.0 || end == 0.5 || end == 1.0));
  const auto d = iterate_orbit(f, 0.0, 0.1234567, 2000, OrbitRecord::positions, Dither{5, 0});
  std::set<double> distinct(d.positions.begin(), d.positions.end());
  CHECK(distinct.size() > 1900);
  for (double x : d.positions) CHECK(f.state_of(x) == 0);
  const auto again = iterate_orbit(f, 0.0, 0.1234567, 2000, OrbitRecord::positions, Dither{5, 0});
  CHECK(again.positions == d.positions);
}

TEST_CASE("simulation is deterministic across schedules and thread counts") {
  auto cfg = from_state(0.02, 0, 2000, 10.0, 99);
  cfg.exec = kernels::Exec::serial;
  const auto serial = simulate_jumps(two_cell(), cfg, 0);
  cfg.exec = kernels::Exec::parallel;
  kernels::set_threads(1);
  const auto one = simulate_jumps(two_cell(), cfg, 0);
  kernels::set_threads(4);
  const auto four = simulate_jumps(two_cell(), cfg, 0);
  kernels::set_threads(0);
  CHECK(same(serial.records, one.records));
  CHECK(same(serial.records, four.records));
  cfg.seed = 100;
  CHECK_FALSE(same(serial.records, simulate_jumps(two_cell(), cfg, 0).records));
}

TEST_CASE("exponential first jumps from mu_1") {
  const auto f = two_cell();
  std::vector<double> ks;
  for (double eps : {0.04, 0.02, 0.01}) {
    const auto sim = simulate_jumps(f, from_state(eps, 0, 100000, 30.0, 1), 1);
    const auto t = first_jumps(sim);
    CHECK(t.size() >= 99000);
    ks.push_back(stats::ks_distance_exponential(t, 1.0));
  }
  MESSAGE("KS distances " << ks[0] << " " << ks[1] << " " << ks[2]);
  CHECK(ks[2] <= 0.02);
  CHECK(ks[1] < ks[0]);
  CHECK(ks[2] < ks[1]);
}

TEST_CASE("jump law from the middle interval of three_cell") {
  const auto f = three_cell();
  const auto sim = simulate_jumps(f, from_state(0.01, 1, 100000, 30.0, 2), 1);
  const auto law = jump_law_test(sim.records, chain_of(f));
  const auto& s = law.state(1);
  REQUIRE_FALSE(s.skipped);
  REQUIRE(s.targets.size() == 2);
  for (const auto& t : s.targets) CHECK(std::abs(t.frequency - 0.5) <= 0.01);
  CHECK(s.independence_split <= 0.02);
}

TEST_CASE("consecutive holding times are uncorrelated") {
  const auto f = two_cell();
  const auto sim = simulate_jumps(f, from_state(0.01, 0, 50000, 60.0, 3), 3);
  const auto law = jump_law_test(sim.records, chain_of(f));
  CHECK(law.holding_pairs > 90000);
  CHECK(std::abs(law.holding_correlation) <= 0.02);
}

TEST_CASE("jumps leave through the holes") {
  const auto f = three_cell();
  const double eps = 0.01;
  const auto holes = compute_holes(f, eps, f.reference_densities());
  const auto sim = simulate_jumps(f, from_state(eps, 1, 500, 20.0, 4), 0);
  std::size_t checked = 0;
  for (const auto& r : sim.records) {
    int z = r.initial_state;
    for (const auto& j : r.jumps) {
      bool inside = false;
      for (const auto& iv : holes.holes(z, j.state_after)) inside = inside || (j.pre_jump_x >= iv.lo && j.pre_jump_x <= iv.hi);
      CHECK(inside);
      z = j.state_after;
      if (++checked >= 1000) break;
    }
    if (checked >= 1000) break;
  }
  CHECK(checked == 1000);
}

TEST_CASE("chain paths pass their own jump-law test") {
  const auto chain = chain_of(three_cell());
  std::vector<ChainPath> paths;
  // First three jumps of long paths, so the horizon does not censor them.
  for (std::uint64_t i = 0; i < 20000; ++i) {
    auto p = sample_chain(chain.generator, 1, 60.0, 8, i);
    p.jumps.resize(std::min<std::size_t>(p.jumps.size(), 3));
    paths.push_back(std::move(p));
  }
  const auto records = records_from_chain_paths(paths, 0.01, 60.0);
  const auto law = jump_law_test(records, chain);
  for (const auto& s : law.states) {
    REQUIRE_FALSE(s.skipped);
    CHECK(s.ks <= s.ks_critical);
  }
}

TEST_CASE("double-jump statistic") {
  const auto f = two_cell();
  const auto sim = simulate_jumps(f, from_state(0.01, 0, 20000, 1.2, 6), 0);
  CHECK(double_jump_stat(sim.records, 1.0, 0.0).value == 0.0);
  double prev = 1.0;
  for (double sigma : {0.2, 0.1, 0.05, 0.01}) {
    const double v = double_jump_stat(sim.records, 1.0, sigma).value;
    CHECK(v < prev);
    prev = v;
  }

  // Chain estimate against the renewal equation.
  const auto chain = chain_of(f);
  std::vector<ChainPath> paths;
  for (std::uint64_t i = 0; i < 100000; ++i) paths.push_back(sample_chain(chain.generator, 0, 1.2, 12, i));
  const auto records = records_from_chain_paths(paths, 0.01, 1.2);
  for (double sigma : {0.2, 0.1, 0.05}) {
    const auto est = double_jump_stat(records, 1.0, sigma);
    const double exact = oracle::double_jump_renewal(1.0, 1.0, sigma);
    CHECK(std::abs(est.value - exact) <= 3 * est.std_error);
  }
}

TEST_CASE("diffusion of a constant observable vanishes") {
  SimConfig c;
  c.eps = 0.02;
  c.n_traj = 200;
  c.horizon_S = 5;
  c.burn_in = 500;
  c.seed = 7;
  c.initial_law = InitialLaw::mu_eps;
  DiffusionOptions o;
  o.gk_orbits = 4;
  o.gk_orbit_length = 100000;
  o.pilot_steps = 100000;
  const auto r = estimate_diffusion(two_cell(), 0.02, Observable::constant(3.0), c, o);
  CHECK(std::abs(r.batch_means.value) <= 1e-12);
  CHECK(std::abs(r.green_kubo.value) <= 1e-12);
  c.initial_law = InitialLaw::mu_j;
  CHECK_THROWS_AS(estimate_diffusion(two_cell(), 0.02, Observable::constant(3.0), c, o), ConfigError);
}

TEST_CASE("occupation histograms") {
  const auto f = two_cell();
  EmpiricalDensityOptions o;
  o.burn_in = 1000;
  o.chunks = 16;
  const auto h = empirical_density(f, 0.01, 256, 2'000'000, 3, CellDensity{{1.0}}, std::nullopt, o);
  CHECK(h.histogram.total_mass() == doctest::Approx(1.0).epsilon(1e-14));
  for (int j = 0; j < 2; ++j) CHECK(std::abs(h.interval_masses[static_cast<std::size_t>(j)] - 0.5) <= 3 * h.interval_mass_se[static_cast<std::size_t>(j)]);
  REQUIRE(h.l1_to_limit);
  CHECK(*h.l1_to_limit < 0.2);

  o.start_state = 0;
  const auto h0 = empirical_density(f, 0.0, 256, 1'000'000, 3, f.reference_densities()[0], std::nullopt, o);
  for (std::size_t k = 128; k < 256; ++k) CHECK(h0.histogram.values[k] == 0.0);
  CHECK(*h0.l1_to_limit < 0.05);
}

TEST_CASE("jump CSV layout") {
  JumpRecord r;
  r.x0 = 0.1;
  r.initial_state = 0;
  r.horizon_steps = 100;
  r.jumps = {{10, 0.1, 1, 0.24}, {20, 0.2, 0, 0.76}};
  std::ostringstream os;
  write_jump_csv(os, {r});
  std::istringstream is(os.str());
  std::string header, row;
  std::getline(is, header);
  std::getline(is, row);
  CHECK(header == "trajectory,x0,initial_state,horizon_steps,n_jumps,holding_steps,rescaled_holding,states_after");
  CHECK(row == "0,0.10000000000000001,1,100,2,10;20,0.10000000000000001;0.20000000000000001,2;1");
}

TEST_CASE("configuration errors") {
  SimConfig c;
  c.eps = 0.0;
  CHECK_THROWS_AS(simulate_jumps(two_cell(), c, 0), ConfigError);
  CHECK(initial_law_from_string(to_string(InitialLaw::mu_eps)) == InitialLaw::mu_eps);
  CHECK_THROWS_AS(initial_law_from_string("gaussian"), ConfigError);
}
