#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "metastab/error.hpp"
#include "metastab/experiments.hpp"
#include "metastab/transfer_operator.hpp"
#include "metastab/trajectory_sim.hpp"

namespace metastab::experiments {
namespace {

using json = nlohmann::json;

std::string num(double v) { return fmt::format("{:.17g}", v); }

Check at_most(std::string name, double value, double tol, std::string detail = {}) {
  return {std::move(name), value, tol, "<=", value <= tol, std::move(detail)};
}

Check at_least(std::string name, double value, double tol, std::string detail = {}) {
  return {std::move(name), value, tol, ">=", value >= tol, std::move(detail)};
}

// Largest increase along the sequence. Steps below the round-off floor count
// as flat, so exact families (deviation ~1e-13) do not fail on noise.
Check non_increasing(std::string name, const std::vector<double>& values, bool strict = false) {
  constexpr double kFloor = 1e-10;
  double worst = -std::numeric_limits<double>::infinity();
  std::string seq;
  for (std::size_t i = 0; i < values.size(); ++i) {
    seq += (i ? ", " : "") + fmt::format("{:.6g}", values[i]);
    if (i > 0) worst = std::max(worst, values[i] - values[i - 1]);
  }
  if (values.size() < 2) worst = 0.0;
  bool flat = true;
  for (double v : values) flat = flat && std::abs(v) <= kFloor;
  const bool ok = flat || (strict ? worst < 0 : worst <= kFloor);
  return {std::move(name), worst, strict ? 0.0 : kFloor, strict ? "decreasing" : "non-increasing", ok,
          "sequence: " + seq};
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  // splitmix64 finaliser
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void put(const Context& ctx, SuiteResult& res, const std::string& name, const std::string& text) {
  write_text(ctx.out_dir / name, text);
  res.files.push_back(name);
}

// Σ p_j φ_j averaged over n uniform cells.
CellDensity limit_density(const std::vector<CellDensity>& densities, const Eigen::RowVectorXd& p, std::size_t n) {
  CellDensity d;
  d.values.assign(n, 0.0);
  const double h = 1.0 / static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t j = 0; j < densities.size(); ++j)
      d.values[k] += p(static_cast<Eigen::Index>(j)) * densities[j].integral({k * h, (k + 1) * h}) / h;
  return d;
}

// Smallest nonzero |Re λ| of the generator: the chain's relaxation rate.
double generator_gap(const Generator& gen) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(gen.G);
  double gap = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double re = std::abs(es.eigenvalues()(i).real());
    if (re > 1e-9) gap = std::min(gap, re);
  }
  return gap;
}

std::string eps_tag(double eps) { return fmt::format("{:g}", eps); }

} // namespace

SuiteResult run_validate(const Context& ctx) {
  SuiteResult res;
  res.suite = "validate";
  ValidationOptions opts;
  opts.orbit_depth = ctx.config.validation_orbit_depth;
  opts.densities = ctx.densities;
  const auto report = validate_assumptions(ctx.family, ctx.config.eps_grid, opts);
  put(ctx, res, "validation.json", report.to_json().dump(2) + "\n");
  for (const auto& c : report.checks) {
    Check k;
    k.name = "assumption " + c.id + ": " + c.title;
    k.relation = "status";
    k.value = c.status == CheckStatus::fail ? 0.0 : 1.0;
    k.tolerance = 1.0;
    k.passed = c.status != CheckStatus::fail;
    k.detail = to_string(c.status) + (c.detail.empty() ? "" : "; " + c.detail);
    res.checks.push_back(k);
  }
  return res;
}

SuiteResult run_ulam(const Context& ctx) {
  SuiteResult res;
  res.suite = "ulam";
  const auto& cfg = ctx.config;
  const auto& tol = cfg.tolerances;
  const std::size_t n = cfg.ulam.n;
  const int m = ctx.family.m();
  const auto chain = build_chain(ctx);
  const Eigen::VectorXd beta = chain.rates.exit_rates();
  const double g = generator_gap(chain.generator);
  const CellDensity phi0 = limit_density(ctx.densities, chain.p, n);

  // ε = 0 block densities.
  const auto blocks = invariant_densities(build_ulam(ctx.family, 0.0, n, OperatorKind::full));
  double block_err = 0.0;
  for (int j = 0; j < m; ++j) {
    const auto& ref = ctx.densities[static_cast<std::size_t>(j)];
    const double h = 1.0 / static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k)
      block_err = std::max(block_err, std::abs(blocks[static_cast<std::size_t>(j)].values[k] -
                                               ref.integral({k * h, (k + 1) * h}) / h));
  }

  std::string escape = "eps,interval,lambda,escape_rate,beta,relative_deviation,l1_qsd_to_block,sup_hole_cells,"
                       "nu_of_indicator,iterations,residual\n";
  std::string gaps = "eps,second_modulus,second_value,gap,complex_pair,target,ratio,iterations\n";
  std::vector<std::vector<double>> dev(static_cast<std::size_t>(m)), l1q(static_cast<std::size_t>(m)),
      supq(static_cast<std::size_t>(m)), nu1(static_cast<std::size_t>(m));
  std::vector<double> l1_limit;
  std::vector<GapEntry> entries;
  std::vector<CellDensity> phis;
  std::string decay = "interval,step,l1_distance\n";
  json decay_fit = json::array();

  for (std::size_t e = 0; e < cfg.eps_grid.size(); ++e) {
    const double eps = cfg.eps_grid[e];
    const auto full = build_ulam(ctx.family, eps, n, OperatorKind::full);
    const auto phi = invariant_density(full);
    l1_limit.push_back(phi.l1_distance(phi0));
    phis.push_back(phi);
    const auto gap = second_gap(full);
    entries.push_back(gap);
    gaps += fmt::format("{},{},{},{},{},{},{},{}\n", num(eps), num(gap.second_modulus), num(gap.second_value),
                        num(gap.gap), gap.complex_pair ? 1 : 0, num(g * eps), num(gap.gap / (g * eps)), gap.iterations);

    for (int j = 0; j < m; ++j) {
      const auto hole = build_ulam(ctx.family, eps, n, OperatorKind::hole, j);
      const auto t = leading_eigen(hole);
      const double rate = (1.0 - t.lambda) / eps;
      const double b = beta(j);
      const double rel = b > 0 ? std::abs(rate - b) / b : std::abs(rate);
      const CellDensity qsd = hole.embed(t.right);
      const auto& ref = ctx.densities[static_cast<std::size_t>(j)];
      const double l1 = qsd.l1_distance(ref);
      const auto rows = hole.row_sums();
      double sup = 0.0;
      const double h = 1.0 / static_cast<double>(n);
      for (std::size_t k = 0; k < hole.size(); ++k) {
        if (rows[k] > 1.0 - 1e-12) continue;
        const double g0 = hole.layout().cells[k];
        sup = std::max(sup, std::abs(t.right[k] - ref.integral({g0 * h, (g0 + 1) * h}) / h));
      }
      const double nu = t.functional(std::vector<double>(hole.size(), 1.0));
      const auto js = static_cast<std::size_t>(j);
      dev[js].push_back(rel);
      l1q[js].push_back(l1);
      supq[js].push_back(sup);
      nu1[js].push_back(std::abs(nu - ctx.family.intervals()[js].length()));
      escape += fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", num(eps), j + 1, num(t.lambda), num(rate), num(b),
                            num(rel), num(l1), num(sup), num(nu), t.iterations, num(t.residual));

      if (e + 1 == cfg.eps_grid.size()) {
        const std::vector<double> a(hole.size(), 1.0);
        const auto prof = decay_profile(hole, a, t, cfg.ulam.decay_steps);
        for (std::size_t s = 0; s < prof.values.size(); ++s)
          decay += fmt::format("{},{},{}\n", j + 1, s, num(prof.values[s]));
        decay_fit.push_back({{"interval", j + 1}, {"eps", eps}, {"theta", prof.theta}, {"truncated", prof.truncated}});
      }
    }
  }
  const auto rep = gap_report(entries);

  std::string dens = "cell,x_mid";
  for (int j = 0; j < m; ++j) dens += fmt::format(",phi0_block{}", j + 1);
  for (double eps : cfg.eps_grid) dens += ",phi_eps_" + eps_tag(eps);
  dens += "\n";
  for (std::size_t k = 0; k < n; ++k) {
    dens += fmt::format("{},{}", k, num((k + 0.5) / static_cast<double>(n)));
    for (int j = 0; j < m; ++j) dens += "," + num(blocks[static_cast<std::size_t>(j)].values[k]);
    for (const auto& p : phis) dens += "," + num(p.values[k]);
    dens += "\n";
  }

  put(ctx, res, "ulam_escape.csv", escape);
  put(ctx, res, "ulam_gap.csv", gaps);
  put(ctx, res, "ulam_densities.csv", dens);
  put(ctx, res, "ulam_decay.csv", decay);

  const double eps_min = cfg.eps_grid.back();
  for (int j = 0; j < m; ++j) {
    const auto js = static_cast<std::size_t>(j);
    if (!(beta(j) > 0)) continue;
    res.checks.push_back(at_most(fmt::format("escape rate of I_{} at eps={}: |(1-lambda)/eps - beta|/beta", j + 1,
                                             eps_tag(eps_min)),
                                 dev[js].back(), tol.escape_rate_deviation));
    res.checks.push_back(non_increasing(fmt::format("escape-rate deviation of I_{} along the eps grid", j + 1), dev[js]));
    res.checks.push_back(
        non_increasing(fmt::format("L1 distance of the I_{} quasi-stationary density to phi_{}", j + 1, j + 1), l1q[js]));
    res.checks.push_back(non_increasing(fmt::format("sup over hole cells of |phi_{0},eps - phi_{0}|", j + 1), supq[js]));
    res.checks.push_back(non_increasing(fmt::format("|nu_{0},eps(1 on I_{0}) - Leb(I_{0})| along the eps grid (weak-sense)", j + 1), nu1[js]));
  }
  for (const auto& e : rep.table) {
    const double rel = std::abs(e.gap - g * e.eps) / (g * e.eps);
    res.checks.push_back(at_most(fmt::format("gap at eps={}: |gap - {:g} eps| / ({:g} eps)", eps_tag(e.eps), g, g), rel,
                                 tol.gap_relative, fmt::format("gap {:.6g}", e.gap)));
  }
  res.checks.push_back(at_least("gap vs eps fit through the origin: R^2", rep.r_squared, tol.gap_r_squared,
                                fmt::format("slope {:.6g}, kappa_hat {:.6g}", rep.slope, rep.kappa)));
  res.checks.push_back(at_most(fmt::format("L1 distance of phi_eps to sum_j p_j phi_j at eps={}", eps_tag(eps_min)),
                               l1_limit.back(), tol.density_l1));
  res.checks.push_back(non_increasing("L1 distance of phi_eps to the limit along the eps grid", l1_limit, true));
  res.checks.push_back(at_most("eps=0 block densities vs reference densities (max abs)", block_err, 1e-10,
                               "reference source: " + cfg.density_source));

  json summary{{"n", n},
               {"generator_gap", g},
               {"gap_fit", {{"slope", rep.slope}, {"r_squared", rep.r_squared}, {"kappa_hat", rep.kappa},
                            {"eta_hat", rep.eta}, {"note", "fitted from gap scaling; not a witness of a norm bound"}}},
               {"nu_check", "weak-sense verification: nu_eps evaluated on indicator test observables only"},
               {"decay", decay_fit},
               {"block_density_error", block_err},
               {"l1_to_limit", l1_limit}};
  put(ctx, res, "ulam_summary.json", summary.dump(2) + "\n");
  return res;
}

SuiteResult run_rates(const Context& ctx) {
  SuiteResult res;
  res.suite = "rates";
  const auto& tol = ctx.config.tolerances;
  const auto chain = build_chain(ctx);
  json doc = chain.to_json();
  json holes = json::array();
  std::string fits = "from,to,eps,mu_over_eps,residual,intercept,slope\n";
  for (const auto& f : chain.rates.fits)
    for (std::size_t i = 0; i < f.eps.size(); ++i)
      fits += fmt::format("{},{},{},{},{},{},{}\n", f.from + 1, f.to + 1, num(f.eps[i]), num(f.ratios[i]),
                          num(f.residuals[i]), num(f.intercept), num(f.slope));
  for (double eps : ctx.config.eps_grid) {
    const auto hs = compute_holes(ctx.family, eps, ctx.densities);
    json h = json::array();
    for (int i = 0; i < hs.m; ++i)
      for (int j = 0; j < hs.m; ++j) {
        if (i == j) continue;
        json ivs = json::array();
        for (const auto& iv : hs.holes(i, j)) ivs.push_back({iv.lo, iv.hi});
        h.push_back({{"from", i + 1}, {"to", j + 1}, {"intervals", ivs}, {"measure", hs.measure(i, j)}});
      }
    holes.push_back({{"eps", eps}, {"holes", h}});
  }
  doc["holes"] = holes;
  doc["generator_gap"] = generator_gap(chain.generator);
  put(ctx, res, "rates.json", doc.dump(2) + "\n");
  put(ctx, res, "rates_fits.csv", fits);

  for (const auto& w : chain.rates.warnings) res.warnings.push_back(w);
  res.checks.push_back({"rate matrix irreducible", chain.rates.irreducible() ? 1.0 : 0.0, 1.0, "status",
                        chain.rates.irreducible(), ""});
  const double dual = std::abs(chain.diffusion.quadrature - chain.diffusion.solve);
  res.checks.push_back(at_most("D^M quadrature vs linear solve", dual, tol.dual_method,
                               fmt::format("D^M = {:.12g}, 2 D^M = {:.12g}", chain.diffusion.solve,
                                           chain.diffusion.two_sided())));
  const double resid = (chain.p * chain.generator.G).cwiseAbs().maxCoeff();
  res.checks.push_back(at_most("stationary law residual max|pG|", resid, 1e-10));
  return res;
}

SuiteResult run_jumps(const Context& ctx) {
  SuiteResult res;
  res.suite = "jumps";
  const auto& cfg = ctx.config;
  const auto& tol = cfg.tolerances;
  const auto chain = build_chain(ctx);
  const int j0 = cfg.jumps.start_state;
  const double rate0 = chain.rates.exit_rates()(j0);

  std::optional<CellDensity> init;
  if (cfg.jumps.ulam_initial_density)
    init = invariant_densities(build_ulam(ctx.family, 0.0, cfg.ulam.n, OperatorKind::full))[static_cast<std::size_t>(j0)];

  std::string table = "eps,trajectories,first_jump_samples,ks_first_jump,ks_critical_95,state,target,frequency,"
                      "expected,std_error,independence_split,independence_se,holding_correlation\n";
  std::vector<double> ks_first;
  JumpLawReport last;
  std::vector<JumpRecord> last_records;
  for (std::size_t e = 0; e < cfg.jumps.eps_grid.size(); ++e) {
    const double eps = cfg.jumps.eps_grid[e];
    SimConfig sc;
    sc.eps = eps;
    sc.n_traj = cfg.jumps.n_traj;
    sc.horizon_S = cfg.jumps.horizon_S;
    sc.seed = derive_seed(cfg.seed, 100 + e);
    sc.initial_law = InitialLaw::mu_j;
    sc.initial_state = j0;
    sc.initial_density = init;
    auto sim = simulate_jumps(ctx.family, sc, cfg.jumps.max_jumps);
    for (const auto& w : sim.warnings) res.warnings.push_back(fmt::format("eps={}: {}", eps_tag(eps), w));
    std::vector<double> first;
    for (const auto& r : sim.records)
      if (!r.jumps.empty()) first.push_back(r.jumps.front().rescaled);
    const double ks = stats::ks_distance_exponential(first, rate0);
    ks_first.push_back(ks);
    const auto law = jump_law_test(sim.records, chain);
    const auto& s = law.state(j0);
    for (const auto& t : s.targets)
      table += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{}\n", num(eps), sim.records.size(), first.size(),
                           num(ks), num(stats::ks_critical_95(first.size())), j0 + 1, t.to + 1, num(t.frequency),
                           num(t.expected), num(t.std_error), num(s.independence_split), num(s.independence_se),
                           num(law.holding_correlation));
    if (e + 1 == cfg.jumps.eps_grid.size()) {
      last = law;
      last_records = std::move(sim.records);
    }
  }
  put(ctx, res, "jumps_law.csv", table);
  {
    std::ostringstream os;
    write_jump_csv(os, last_records);
    put(ctx, res, "jump_records.csv", os.str());
  }
  put(ctx, res, "jump_law.json", last.to_json().dump(2) + "\n");

  const double eps_min = cfg.jumps.eps_grid.back();
  res.checks.push_back(at_most(fmt::format("KS distance of first jump times from mu_{} at eps={}", j0 + 1,
                                           eps_tag(eps_min)),
                               ks_first.back(), tol.ks));
  res.checks.push_back(non_increasing("KS distance along the eps grid", ks_first, true));
  const auto& s = last.state(j0);
  if (!s.skipped) {
    for (const auto& t : s.targets)
      res.checks.push_back(at_most(fmt::format("jump target frequency {}->{} vs beta ratio {:.6g}", j0 + 1, t.to + 1,
                                               t.expected),
                                   std::abs(t.frequency - t.expected), tol.target_frequency,
                                   fmt::format("frequency {:.6g}", t.frequency)));
    res.checks.push_back(at_most("holding-time/target independence split", s.independence_split,
                                 tol.independence_split));
  } else {
    res.warnings.push_back("jump law for the start state skipped: too few samples");
  }
  if (last.holding_pairs > 0)
    res.checks.push_back(at_most("|correlation of consecutive holding times|", std::abs(last.holding_correlation),
                                 tol.holding_correlation));

  // Double jumps against the chain on the same horizon.
  const auto& dj = cfg.double_jump;
  const double horizon = dj.S + dj.sigmas.front();
  SimConfig sc;
  sc.eps = dj.eps;
  sc.n_traj = dj.n_traj;
  sc.horizon_S = horizon;
  sc.seed = derive_seed(cfg.seed, 200);
  sc.initial_law = InitialLaw::mu_j;
  sc.initial_state = dj.start_state;
  sc.initial_density = init && dj.start_state == j0 ? init : std::nullopt;
  const auto sim = simulate_jumps(ctx.family, sc, 0);
  std::vector<ChainPath> paths(dj.n_traj);
  const auto chain_seed = derive_seed(cfg.seed, 201);
  kernels::for_each_index(
      dj.n_traj, [&](std::size_t i) { paths[i] = sample_chain(chain.generator, dj.start_state, horizon, chain_seed, i); },
      kernels::Exec::parallel);
  const auto chain_records = records_from_chain_paths(paths, dj.eps, horizon);
  std::string djcsv = "sigma,S,eps,map_probability,map_std_error,chain_probability,chain_std_error,z\n";
  std::vector<double> map_p;
  for (double sigma : dj.sigmas) {
    const auto a = double_jump_stat(sim.records, dj.S, sigma);
    const auto b = double_jump_stat(chain_records, dj.S, sigma);
    const double se = std::hypot(a.std_error, b.std_error);
    const double z = se > 0 ? std::abs(a.value - b.value) / se : 0.0;
    map_p.push_back(a.value);
    djcsv += fmt::format("{},{},{},{},{},{},{},{}\n", num(sigma), num(dj.S), num(dj.eps), num(a.value),
                         num(a.std_error), num(b.value), num(b.std_error), num(z));
    res.checks.push_back(at_most(fmt::format("double-jump probability at sigma={:g}: map vs chain (z)", sigma), z,
                                 tol.double_jump_z,
                                 fmt::format("map {:.6g} +- {:.2g}, chain {:.6g} +- {:.2g}", a.value, a.std_error,
                                             b.value, b.std_error)));
  }
  res.checks.push_back(non_increasing("double-jump probability as sigma decreases", map_p, true));
  put(ctx, res, "double_jump.csv", djcsv);
  return res;
}

SuiteResult run_diffusion(const Context& ctx) {
  SuiteResult res;
  res.suite = "diffusion";
  const auto& cfg = ctx.config;
  const auto& tol = cfg.tolerances;
  const auto chain = build_chain(ctx);
  const double target = chain.diffusion.two_sided();

  const auto& d = cfg.diffusion;
  SimConfig sc;
  sc.eps = d.eps;
  sc.n_traj = d.n_traj;
  sc.horizon_S = d.S;
  sc.burn_in = d.burn_in;
  sc.seed = derive_seed(cfg.seed, 300);
  sc.initial_law = InitialLaw::mu_eps;
  DiffusionOptions opts;
  opts.gk_orbits = d.gk_orbits;
  opts.gk_orbit_length = d.gk_orbit_length;
  opts.pilot_steps = d.pilot_steps;
  const auto r = estimate_diffusion(ctx.family, d.eps, ctx.observable, sc, opts);
  for (const auto& w : r.warnings) res.warnings.push_back(w);

  std::string table = "method,eps,N,trajectories,orbit_length,truncation_S,D_hat,std_error,eps_D_hat,eps_std_error,"
                      "target_2DM,relative_error\n";
  for (const auto* e : {&r.batch_means, &r.batch_means_2N, &r.green_kubo}) {
    const double rel = target != 0 ? std::abs(d.eps * e->value - target) / std::abs(target) : std::abs(d.eps * e->value);
    table += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n", e->method, num(d.eps), e->N, e->n_traj,
                         e->orbit_length, num(e->truncation_S), num(e->value), num(e->std_error), num(d.eps * e->value),
                         num(d.eps * e->std_error), num(target), num(rel));
  }
  put(ctx, res, "diffusion.csv", table);
  {
    std::ostringstream os;
    write_autocorrelation_csv(os, r, d.eps);
    put(ctx, res, "autocorrelation.csv", os.str());
  }
  for (const auto* e : {&r.batch_means, &r.green_kubo}) {
    const double rel = std::abs(d.eps * e->value - target) / std::abs(target);
    res.checks.push_back(at_most(fmt::format("eps*D_hat ({}) vs 2 D^M = {:.6g}: relative error", e->method, target),
                                 rel, tol.diffusion_relative, fmt::format("eps*D_hat = {:.6g}", d.eps * e->value)));
  }
  res.checks.push_back(at_most("batch means vs Green-Kubo (combined standard errors)", r.estimator_z(),
                               tol.estimator_z));

  // Occupation histograms.
  const auto& dn = cfg.density;
  const CellDensity phi0 = limit_density(ctx.densities, chain.p, dn.cells);
  std::string hist = "cell,x_mid";
  for (double eps : dn.eps_grid) hist += ",density_" + eps_tag(eps);
  hist += "\n";
  std::string masses = "eps,interval,mass,std_error,p,z,ulam_mass,z_ulam,l1_to_limit,l1_to_ulam\n";
  std::vector<CellDensity> hs;
  std::vector<double> l1;
  const bool ulam_ok = dn.cells % (2 * static_cast<std::size_t>(ctx.family.m())) == 0;
  for (std::size_t e = 0; e < dn.eps_grid.size(); ++e) {
    const double eps = dn.eps_grid[e];
    std::optional<CellDensity> ulam;
    if (ulam_ok) ulam = invariant_density(build_ulam(ctx.family, eps, dn.cells, OperatorKind::full));
    EmpiricalDensityOptions eo;
    eo.burn_in = dn.burn_in;
    eo.chunks = dn.chunks;
    const auto h = empirical_density(ctx.family, eps, dn.cells, dn.total_steps, derive_seed(cfg.seed, 400 + e), phi0,
                                     ulam, eo);
    l1.push_back(*h.l1_to_limit);
    const auto ivs = ctx.family.intervals();
    for (int j = 0; j < ctx.family.m(); ++j) {
      const auto js = static_cast<std::size_t>(j);
      const double p = chain.p(j);
      const double mass = h.interval_masses[js], se = h.interval_mass_se[js];
      const double z = std::abs(mass - p) / se;
      const double um = ulam ? ulam->integral(ivs[js]) : std::nan("");
      const double uz = std::abs(mass - um) / se;
      masses += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", num(eps), j + 1, num(mass), num(se), num(p), num(z),
                            ulam ? num(um) : "", ulam ? num(uz) : "", num(*h.l1_to_limit),
                            h.l1_to_ulam ? num(*h.l1_to_ulam) : "");
      if (ulam)
        res.checks.push_back(at_most(fmt::format("occupation of I_{} at eps={} vs Ulam mass (standard errors)", j + 1,
                                                 eps_tag(eps)),
                                     uz, tol.mass_z,
                                     fmt::format("mass {:.6g} +- {:.2g}, Ulam {:.6g}", mass, se, um)));
      if (e + 1 == dn.eps_grid.size())
        res.checks.push_back(at_most(fmt::format("occupation of I_{} at eps={} vs p_{} (standard errors)", j + 1,
                                                 eps_tag(eps), j + 1),
                                     z, tol.mass_z, fmt::format("mass {:.6g} +- {:.2g}, p {:.6g}", mass, se, p)));
    }
    hs.push_back(h.histogram);
  }
  for (std::size_t k = 0; k < dn.cells; ++k) {
    hist += fmt::format("{},{}", k, num((k + 0.5) / static_cast<double>(dn.cells)));
    for (const auto& h : hs) hist += "," + num(h.values[k]);
    hist += "\n";
  }
  res.checks.push_back(non_increasing("histogram L1 distance to the limit along the eps grid", l1, true));
  put(ctx, res, "density_histogram.csv", hist);
  put(ctx, res, "density_masses.csv", masses);
  return res;
}

} // namespace metastab::experiments
