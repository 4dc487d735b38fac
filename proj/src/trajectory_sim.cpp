#include "metastab/trajectory_sim.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>

#include "metastab/error.hpp"
#include "metastab/rng.hpp"
#include "orbit_detail.hpp"

namespace metastab {

OrbitData iterate_orbit(const MapFamily& family, double eps, double x0, std::uint64_t steps, OrbitRecord record,
                        const std::optional<Dither>& dither) {
  if (!(x0 >= 0.0 && x0 <= 1.0)) throw ConfigError("iterate_orbit: x0 outside [0, 1]");
  if (steps < 1) throw ConfigError("iterate_orbit: need at least one step");
  const BranchTable table(family, eps);
  std::optional<RandomStream> rng;
  if (dither) rng.emplace(dither->seed, StreamPurpose::dither, dither->index);

  OrbitData out;
  out.initial_state = family.state_of(x0);
  if (record == OrbitRecord::positions) {
    out.positions.reserve(steps + 1);
    out.positions.push_back(x0);
  }
  double x = x0;
  int z = out.initial_state;
  for (std::uint64_t k = 1; k <= steps; ++k) {
    const double prev = x;
    x = detail::advance(table, x, rng ? &*rng : nullptr);
    if (record == OrbitRecord::positions) out.positions.push_back(x);
    const int z_new = family.state_of(x);
    if (z_new != z) {
      out.jumps.push_back({k, z, z_new, prev});
      z = z_new;
    }
  }
  out.final_x = x;
  return out;
}

std::string to_string(InitialLaw law) {
  switch (law) {
  case InitialLaw::lebesgue: return "lebesgue";
  case InitialLaw::mu_j: return "mu_j";
  case InitialLaw::mu_eps: return "mu_eps";
  }
  return "?";
}

InitialLaw initial_law_from_string(const std::string& s) {
  if (s == "lebesgue") return InitialLaw::lebesgue;
  if (s == "mu_j") return InitialLaw::mu_j;
  if (s == "mu_eps") return InitialLaw::mu_eps;
  throw ConfigError("unknown initial law '" + s + "' (expected lebesgue, mu_j or mu_eps)");
}

std::uint64_t SimConfig::horizon_steps() const {
  return static_cast<std::uint64_t>(std::ceil(horizon_S / eps - 1e-9));
}

void SimConfig::validate() const {
  if (!(eps > 0)) throw ConfigError("SimConfig: eps must be positive");
  if (n_traj < 1) throw ConfigError("SimConfig: n_traj must be at least 1");
  if (!(horizon_S > 0)) throw ConfigError("SimConfig: horizon_S must be positive");
  if (initial_state < 0) throw ConfigError("SimConfig: negative initial state");
}

nlohmann::json SimConfig::to_json() const {
  return {{"eps", eps},
          {"n_traj", n_traj},
          {"horizon_S", horizon_S},
          {"horizon_steps", horizon_steps()},
          {"burn_in", burn_in},
          {"seed", seed},
          {"initial_law", to_string(initial_law)},
          {"initial_state", initial_state + 1},
          {"initial_density", initial_density ? to_string(initial_density->source) : "analytic"},
          {"dither", dither}};
}

IntervalSampler::IntervalSampler(const CellDensity& density, const Interval& iv) {
  const double w = density.width();
  double total = 0.0;
  for (std::size_t c = 0; c < density.cells(); ++c) {
    const Interval piece = Interval{c * w, (c + 1) * w}.intersect(iv);
    const double mass = density.values[c] * piece.length();
    if (!(mass > 0)) continue;
    total += mass;
    lo_.push_back(piece.lo);
    hi_.push_back(piece.hi);
    cdf_.push_back(total);
  }
  if (cdf_.empty()) throw ConfigError("IntervalSampler: density has no mass on the interval");
  for (auto& c : cdf_) c /= total;
  cdf_.back() = 1.0;
}

double IntervalSampler::operator()(double u) const {
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
  const double below = k == 0 ? 0.0 : cdf_[k - 1];
  const double frac = std::clamp((u - below) / (cdf_[k] - below), 0.0, 1.0);
  const double x = lo_[k] + frac * (hi_[k] - lo_[k]);
  return std::min(x, std::nextafter(hi_[k], lo_[k]));
}

JumpSimulation simulate_jumps(const MapFamily& family, const SimConfig& cfg, std::size_t max_jumps) {
  cfg.validate();
  family.check_eps(cfg.eps);
  const BranchTable table(family, cfg.eps);
  const std::uint64_t horizon = cfg.horizon_steps();

  std::optional<IntervalSampler> sampler;
  if (cfg.initial_law == InitialLaw::mu_j) {
    if (cfg.initial_state >= family.m()) throw ConfigError("simulate_jumps: initial state out of range");
    if (cfg.initial_density) {
      sampler.emplace(*cfg.initial_density, family.interval(cfg.initial_state));
    } else {
      const auto& refs = family.reference_densities();
      if (refs.empty())
        throw ConfigError("simulate_jumps: family '" + family.name() +
                          "' has no analytic densities; supply an initial density");
      sampler.emplace(refs[static_cast<std::size_t>(cfg.initial_state)], family.interval(cfg.initial_state));
    }
  }

  JumpSimulation sim;
  sim.config = cfg;
  sim.records.resize(cfg.n_traj);
  kernels::for_each_index(
      cfg.n_traj,
      [&](std::size_t i) {
        RandomStream init(cfg.seed, StreamPurpose::initial, i);
        std::optional<RandomStream> dither;
        if (cfg.dither) dither.emplace(cfg.seed, StreamPurpose::dither, detail::kDitherBatch + i);
        RandomStream* d = dither ? &*dither : nullptr;

        double x = sampler ? (*sampler)(init.uniform()) : init.uniform();
        if (cfg.initial_law == InitialLaw::mu_eps)
          for (std::uint64_t k = 0; k < cfg.burn_in; ++k) x = detail::advance(table, x, d);

        JumpRecord& rec = sim.records[i];
        rec.x0 = x;
        rec.initial_state = family.state_of(x);
        rec.horizon_steps = horizon;
        int z = rec.initial_state;
        std::uint64_t last = 0;
        for (std::uint64_t k = 1; k <= horizon; ++k) {
          const double prev = x;
          x = detail::advance(table, x, d);
          const int z_new = family.state_of(x);
          if (z_new == z) continue;
          rec.jumps.push_back({k - last, cfg.eps * static_cast<double>(k - last), z_new, prev});
          last = k;
          z = z_new;
          if (max_jumps > 0 && rec.jumps.size() >= max_jumps) break;
        }
      },
      cfg.exec);

  for (const auto& r : sim.records)
    if (r.jumps.empty()) ++sim.without_jump;
  if (2 * sim.without_jump > sim.records.size())
    sim.warnings.push_back(fmt::format("{} of {} trajectories reached the horizon without a jump; eps*S is too small",
                                       sim.without_jump, sim.records.size()));
  return sim;
}

std::vector<JumpRecord> records_from_chain_paths(const std::vector<ChainPath>& paths, double eps,
                                                 double horizon_S) {
  if (!(eps > 0)) throw ConfigError("records_from_chain_paths: eps must be positive");
  const auto horizon = static_cast<std::uint64_t>(std::ceil(horizon_S / eps - 1e-9));
  std::vector<JumpRecord> out;
  out.reserve(paths.size());
  for (const auto& p : paths) {
    JumpRecord rec;
    rec.initial_state = p.initial_state;
    rec.horizon_steps = horizon;
    double t = 0.0;
    std::uint64_t last = 0;
    for (const auto& j : p.jumps) {
      t += j.holding_time;
      // The jump is first visible at step ⌈t/ε⌉.
      const auto step = static_cast<std::uint64_t>(std::ceil(t / eps));
      if (step > horizon) break;
      rec.jumps.push_back({step - last, j.holding_time, j.state, 0.0});
      last = step;
    }
    out.push_back(std::move(rec));
  }
  return out;
}

const StateLaw& JumpLawReport::state(int j) const {
  for (const auto& s : states)
    if (s.state == j) return s;
  throw ConfigError("JumpLawReport: no entry for state " + std::to_string(j + 1));
}

nlohmann::json JumpLawReport::to_json() const {
  nlohmann::json st = nlohmann::json::array();
  for (const auto& s : states) {
    nlohmann::json targets = nlohmann::json::array();
    for (const auto& t : s.targets)
      targets.push_back({{"to", t.to + 1},
                         {"count", t.count},
                         {"frequency", t.frequency},
                         {"expected", t.expected},
                         {"std_error", t.std_error}});
    st.push_back({{"state", s.state + 1},
                  {"samples", s.samples},
                  {"skipped", s.skipped},
                  {"rate", s.rate},
                  {"ks", s.ks},
                  {"ks_critical_95", s.ks_critical},
                  {"targets", targets},
                  {"independence_split", s.independence_split},
                  {"independence_se", s.independence_se}});
  }
  return {{"states", st}, {"holding_correlation", holding_correlation}, {"holding_pairs", holding_pairs}};
}

JumpLawReport jump_law_test(const std::vector<JumpRecord>& records, const ReducedChain& chain,
                            std::size_t min_samples) {
  const int m = chain.rates.m();
  const Eigen::VectorXd exit = chain.rates.exit_rates();
  std::vector<std::vector<std::pair<double, int>>> by_state(static_cast<std::size_t>(m));
  std::vector<double> first, second;
  for (const auto& r : records) {
    int z = r.initial_state;
    for (std::size_t k = 0; k < r.jumps.size(); ++k) {
      const auto& j = r.jumps[k];
      if (z < 0 || z >= m) throw ConfigError("jump_law_test: state outside the chain");
      by_state[static_cast<std::size_t>(z)].emplace_back(j.rescaled, j.state_after);
      // Holding times scaled by the exit rate of their state are Exp(1) under
      // the chain, so pairs from different states can be pooled.
      if (k + 1 < r.jumps.size() && j.state_after >= 0 && j.state_after < m) {
        first.push_back(j.rescaled * exit(z));
        second.push_back(r.jumps[k + 1].rescaled * exit(j.state_after));
      }
      z = j.state_after;
    }
  }

  JumpLawReport rep;
  for (int j = 0; j < m; ++j) {
    auto& samples = by_state[static_cast<std::size_t>(j)];
    StateLaw s;
    s.state = j;
    s.samples = samples.size();
    s.rate = exit(j);
    if (samples.size() < min_samples || !(s.rate > 0)) {
      s.skipped = true;
      rep.states.push_back(s);
      continue;
    }
    std::vector<double> times;
    times.reserve(samples.size());
    for (const auto& [t, k] : samples) times.push_back(t);
    s.ks = stats::ks_distance_exponential(times, s.rate);
    s.ks_critical = stats::ks_critical_95(samples.size());

    std::map<int, std::size_t> counts;
    for (const auto& [t, k] : samples) ++counts[k];
    for (int k = 0; k < m; ++k) {
      if (k == j) continue;
      TransitionFrequency f;
      f.to = k;
      f.count = counts[k];
      f.frequency = static_cast<double>(f.count) / static_cast<double>(samples.size());
      f.expected = chain.rates.beta(j, k) / s.rate;
      f.std_error = stats::binomial_std_error(f.expected, samples.size());
      s.targets.push_back(f);
    }

    // Target frequencies on the short and long halves of the holding times.
    std::stable_sort(samples.begin(), samples.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    const std::size_t half = samples.size() / 2;
    const double n1 = static_cast<double>(half), n2 = static_cast<double>(samples.size() - half);
    for (int k = 0; k < m; ++k) {
      if (k == j) continue;
      std::size_t c1 = 0, c2 = 0;
      for (std::size_t i = 0; i < samples.size(); ++i)
        if (samples[i].second == k) (i < half ? c1 : c2)++;
      const double diff = std::abs(c1 / n1 - c2 / n2);
      const double pooled = static_cast<double>(c1 + c2) / (n1 + n2);
      const double se = std::sqrt(pooled * (1 - pooled) * (1 / n1 + 1 / n2));
      if (diff >= s.independence_split) {
        s.independence_split = diff;
        s.independence_se = se;
      }
    }
    rep.states.push_back(s);
  }
  rep.holding_pairs = first.size();
  if (first.size() >= 3) rep.holding_correlation = stats::pearson_correlation(first, second);
  return rep;
}

ProbabilityEstimate double_jump_stat(const std::vector<JumpRecord>& records, double S, double sigma) {
  if (S < 0 || sigma < 0) throw ConfigError("double_jump_stat: S and sigma must be nonnegative");
  // Map holding times are multiples of ε; the slack absorbs their rounding.
  constexpr double kSlack = 1e-9;
  std::size_t hits = 0;
  for (const auto& r : records) {
    double t = 0.0; // rescaled t_k, t_0 = 0
    for (const auto& j : r.jumps) {
      if (t > S + kSlack) break;
      if (j.rescaled <= sigma + kSlack) {
        ++hits;
        break;
      }
      t += j.rescaled;
    }
  }
  ProbabilityEstimate p;
  p.trials = records.size();
  if (p.trials == 0) return p;
  p.value = static_cast<double>(hits) / static_cast<double>(p.trials);
  p.std_error = stats::binomial_std_error(p.value, p.trials);
  return p;
}

void write_jump_csv(std::ostream& os, const std::vector<JumpRecord>& records) {
  os << "trajectory,x0,initial_state,horizon_steps,n_jumps,holding_steps,rescaled_holding,states_after\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    std::string steps, resc, states;
    for (std::size_t k = 0; k < r.jumps.size(); ++k) {
      const char* sep = k == 0 ? "" : ";";
      steps += fmt::format("{}{}", sep, r.jumps[k].holding_steps);
      resc += fmt::format("{}{:.17g}", sep, r.jumps[k].rescaled);
      states += fmt::format("{}{}", sep, r.jumps[k].state_after + 1);
    }
    os << fmt::format("{},{:.17g},{},{},{},{},{},{}\n", i, r.x0, r.initial_state + 1, r.horizon_steps, r.jumps.size(),
                      steps, resc, states);
  }
}

void write_autocorrelation_csv(std::ostream& os, const DiffusionResult& result, double eps) {
  os << "lag,rescaled_lag,autocorrelation,std_error\n";
  for (std::size_t n = 0; n < result.autocorrelation.size(); ++n)
    os << fmt::format("{},{:.17g},{:.17g},{:.17g}\n", n, eps * static_cast<double>(n), result.autocorrelation[n],
                      result.autocorrelation_se[n]);
}

} // namespace metastab
