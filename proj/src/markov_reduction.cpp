#include "metastab/markov_reduction.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "metastab/error.hpp"
#include "metastab/rng.hpp"
#include "metastab/stats.hpp"

namespace metastab {

Eigen::VectorXd RateMatrix::exit_rates() const { return beta.rowwise().sum(); }

bool RateMatrix::irreducible() const { return metastab::irreducible(beta); }

bool irreducible(const Eigen::MatrixXd& rates) {
  const auto m = rates.rows();
  if (m == 1) return true;
  auto reach_all = [&](bool forward) {
    std::vector<bool> seen(static_cast<std::size_t>(m), false);
    std::vector<Eigen::Index> stack{0};
    seen[0] = true;
    while (!stack.empty()) {
      const auto v = stack.back();
      stack.pop_back();
      for (Eigen::Index w = 0; w < m; ++w) {
        const double r = forward ? rates(v, w) : rates(w, v);
        if (w != v && r > 0 && !seen[static_cast<std::size_t>(w)]) {
          seen[static_cast<std::size_t>(w)] = true;
          stack.push_back(w);
        }
      }
    }
    return std::all_of(seen.begin(), seen.end(), [](bool s) { return s; });
  };
  return reach_all(true) && reach_all(false);
}

RateMatrix rate_matrix(const Eigen::MatrixXd& beta) {
  if (beta.rows() != beta.cols()) throw ConfigError("rate matrix must be square");
  RateMatrix r;
  r.beta = beta;
  for (Eigen::Index i = 0; i < beta.rows(); ++i) {
    r.beta(i, i) = 0.0;
    for (Eigen::Index j = 0; j < beta.cols(); ++j)
      if (r.beta(i, j) < 0) throw ConfigError("negative rate");
  }
  return r;
}

RateMatrix estimate_beta(const MapFamily& family, const std::vector<double>& eps_list,
                         const std::vector<CellDensity>& densities) {
  if (eps_list.size() < 3) throw ConfigError("estimate_beta: need at least 3 epsilon values");
  for (double e : eps_list)
    if (!(e > 0)) throw ConfigError("estimate_beta: epsilon values must be positive");
  const int m = family.m();
  std::vector<HoleSet> holes;
  for (double e : eps_list) holes.push_back(compute_holes(family, e, densities));

  RateMatrix out;
  out.beta = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      if (i == j) continue;
      RateFit fit;
      fit.from = i;
      fit.to = j;
      fit.eps = eps_list;
      for (const auto& h : holes) fit.ratios.push_back(h.measure(i, j) / h.eps);
      const auto line = stats::fit_line(fit.eps, fit.ratios);
      fit.intercept = line.intercept;
      fit.slope = line.slope;
      fit.residuals = line.residuals;
      double beta = line.intercept;
      if (beta < -1e-8) {
        out.warnings.push_back("negative extrapolated rate beta_" + std::to_string(i + 1) + std::to_string(j + 1) +
                               " = " + std::to_string(beta) + "; check the family definition");
      }
      if (beta < 0) beta = 0.0;
      out.beta(i, j) = beta;
      out.fits.push_back(std::move(fit));
    }
  }
  return out;
}

Generator::Generator(const RateMatrix& rates) : G(rates.beta) {
  for (Eigen::Index j = 0; j < G.rows(); ++j) {
    G(j, j) = 0.0;
    G(j, j) = -G.row(j).sum();
  }
}

Generator::Generator(Eigen::MatrixXd g) : G(std::move(g)) {
  if (G.rows() != G.cols()) throw ConfigError("generator must be square");
}

Eigen::RowVectorXd stationary(const Generator& gen) {
  const auto m = gen.G.rows();
  Eigen::MatrixXd off = gen.G;
  for (Eigen::Index i = 0; i < m; ++i) off(i, i) = 0.0;
  if (!irreducible(off)) throw IrreducibilityError("stationary: the chain is reducible");
  // Solve G^T p^T = 0 with the last equation replaced by Σp = 1.
  Eigen::MatrixXd a = gen.G.transpose();
  a.row(m - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
  rhs(m - 1) = 1.0;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (lu.rank() < m) throw IrreducibilityError("stationary: singular system beyond the redundant row");
  Eigen::RowVectorXd p = lu.solve(rhs).transpose();
  return p;
}

Propagator transition_matrix(const Generator& gen, double t) {
  if (t < 0) throw ConfigError("transition_matrix: negative time");
  const auto m = gen.G.rows();
  Propagator out;
  if (t == 0.0) {
    out.P = Eigen::MatrixXd::Identity(m, m);
    return out;
  }
  const double norm = (t * gen.G).cwiseAbs().rowwise().sum().maxCoeff();
  if (norm > 1e4) {
    // Every off-stationary mode has decayed below representable precision.
    const auto p = stationary(gen);
    out.P = Eigen::VectorXd::Ones(m) * p;
    out.stationary_limit = true;
    return out;
  }
  int squarings = 0;
  if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  const Eigen::MatrixXd a = (t / std::ldexp(1.0, squarings)) * gen.G;
  // Horner evaluation of Σ_{k<=18} a^k / k!.
  constexpr int kOrder = 18;
  Eigen::MatrixXd e = Eigen::MatrixXd::Identity(m, m);
  for (int k = kOrder; k >= 1; --k) e = Eigen::MatrixXd::Identity(m, m) + (a * e) / static_cast<double>(k);
  for (int s = 0; s < squarings; ++s) e = e * e;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      if (e(i, j) < 0 && e(i, j) >= -1e-12) e(i, j) = 0.0;
  out.P = std::move(e);
  return out;
}

Eigen::VectorXd aggregate_observable(const Observable& a, const std::vector<CellDensity>& densities,
                                     const std::vector<Interval>& intervals) {
  if (densities.size() != intervals.size()) throw ConfigError("aggregate_observable: one density per interval");
  Eigen::VectorXd out(static_cast<Eigen::Index>(intervals.size()));
  for (std::size_t j = 0; j < intervals.size(); ++j)
    out(static_cast<Eigen::Index>(j)) = a.integral_against(densities[j], intervals[j]);
  return out;
}

MarkovDiffusion markov_diffusion(const Generator& gen, const Eigen::RowVectorXd& p, const Eigen::VectorXd& centered) {
  const auto m = gen.G.rows();
  if (std::abs(p.dot(centered)) > 1e-10) throw ConfigError("markov_diffusion: observable is not centered");
  MarkovDiffusion out;
  if (centered.cwiseAbs().maxCoeff() == 0.0) return out;

  // (ii) G y = -Ā on {p·y = 0}.
  Eigen::MatrixXd a = gen.G;
  Eigen::VectorXd rhs = -centered;
  a.row(m - 1) = p;
  rhs(m - 1) = 0.0;
  const Eigen::VectorXd y = a.fullPivLu().solve(rhs);
  Eigen::VectorXd weighted = p.transpose().cwiseProduct(centered);
  out.solve = weighted.dot(y);
  out.paper_display = -out.solve;

  // (i) quadrature of the correlation function.
  auto f = [&](double t) { return weighted.dot(transition_matrix(gen, t).P * centered); };
  double horizon = 1.0;
  auto tail_small = [&](double T) {
    for (double s : {1.0, 1.25, 1.5, 2.0})
      if (std::abs(f(s * T)) >= 1e-12) return false;
    return true;
  };
  while (!tail_small(horizon) && horizon < 1e6) horizon *= 2.0;
  out.truncation_time = horizon;
  double integral = 0.0;
  const double panel = std::max(horizon / 64.0, 0.25);
  for (double t0 = 0.0; t0 < horizon; t0 += panel) {
    const double t1 = std::min(t0 + panel, horizon);
    // Tail panels carry almost no mass, so a relative tolerance there would
    // recurse to the depth limit for nothing; the depth cap bounds that.
    integral += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, t0, t1, 3, 1e-14);
  }
  out.quadrature = integral;

  if (std::abs(out.quadrature - out.solve) > 1e-6)
    throw ConsistencyError("markov_diffusion: quadrature " + std::to_string(out.quadrature) + " and solve " +
                           std::to_string(out.solve) + " disagree");
  return out;
}

ReducedChain reduce(const RateMatrix& rates, const Eigen::VectorXd& aggregated, std::string density_source) {
  Generator gen(rates);
  const auto p = stationary(gen);
  const double mean = p.dot(aggregated);
  Eigen::VectorXd centered = aggregated.array() - mean;
  auto diffusion = markov_diffusion(gen, p, centered);
  return ReducedChain{rates, gen, p, aggregated, centered, diffusion, std::move(density_source)};
}

nlohmann::json ReducedChain::to_json() const {
  auto mat = [](const Eigen::MatrixXd& a) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      std::vector<double> row(static_cast<std::size_t>(a.cols()));
      for (Eigen::Index j = 0; j < a.cols(); ++j) row[static_cast<std::size_t>(j)] = a(i, j);
      rows.push_back(row);
    }
    return rows;
  };
  auto vec = [](const auto& v) {
    std::vector<double> out(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) out[static_cast<std::size_t>(i)] = v(i);
    return out;
  };
  nlohmann::json fits = nlohmann::json::array();
  for (const auto& f : rates.fits)
    fits.push_back({{"from", f.from + 1},
                    {"to", f.to + 1},
                    {"intercept", f.intercept},
                    {"slope", f.slope},
                    {"eps", f.eps},
                    {"ratios", f.ratios},
                    {"residuals", f.residuals}});
  return {{"beta", mat(rates.beta)},
          {"exit_rates", vec(rates.exit_rates())},
          {"generator", mat(generator.G)},
          {"p", vec(p)},
          {"A", vec(aggregated)},
          {"A_centered", vec(centered)},
          {"density_source", density_source},
          {"D_M",
           {{"quadrature", diffusion.quadrature},
            {"solve", diffusion.solve},
            {"paper_display_sign", diffusion.paper_display},
            {"two_sided", diffusion.two_sided()},
            {"truncation_time", diffusion.truncation_time}}},
          {"rate_fits", fits},
          {"warnings", rates.warnings}};
}

ChainPath sample_chain(const Generator& gen, int initial_state, double horizon, std::uint64_t seed,
                       std::uint64_t path_index) {
  ChainPath path;
  path.initial_state = initial_state;
  if (!(horizon > 0)) return path;
  RandomStream rng(seed, StreamPurpose::chain, path_index);
  const auto m = gen.G.rows();
  int state = initial_state;
  double t = 0.0;
  while (true) {
    const double rate = -gen.G(state, state);
    if (!(rate > 0)) break; // absorbing
    const double hold = rng.exponential(rate);
    if (t + hold > horizon) break;
    t += hold;
    double u = rng.uniform() * rate;
    int next = -1;
    for (Eigen::Index k = 0; k < m; ++k) {
      if (k == state) continue;
      const double r = gen.G(state, k);
      if (r <= 0) continue;
      next = static_cast<int>(k);
      if (u < r) break;
      u -= r;
    }
    path.jumps.push_back({hold, next});
    state = next;
  }
  return path;
}

double path_integral(const ChainPath& path, const Eigen::VectorXd& values, double horizon) {
  double t = 0.0, sum = 0.0;
  int state = path.initial_state;
  for (const auto& j : path.jumps) {
    sum += values(state) * j.holding_time;
    t += j.holding_time;
    state = j.state;
  }
  sum += values(state) * std::max(horizon - t, 0.0);
  return sum;
}

} // namespace metastab
