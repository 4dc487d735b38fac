#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "metastab/error.hpp"
#include "metastab/rng.hpp"
#include "metastab/stats.hpp"
#include "metastab/transfer_operator.hpp"

namespace metastab {
namespace {

enum class Action { push, pull };

void apply(const UlamOperator& op, Action action, bool damped, const std::vector<double>& in,
           std::vector<double>& out) {
  if (action == Action::push)
    op.push_forward(in, out);
  else
    op.pull_back(in, out);
  if (damped)
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = 0.5 * (out[k] + in[k]);
}

double weighted_sum(const std::vector<double>& v, double h) { return std::accumulate(v.begin(), v.end(), 0.0) * h; }

double l1_diff(const std::vector<double>& a, const std::vector<double>& b, double h) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += std::abs(a[k] - b[k]);
  return s * h;
}

struct PowerResult {
  std::vector<double> v;
  double lambda = 0.0;
  double change = 0.0;
  std::size_t iterations = 0;
};

// Power iteration for a nonnegative operator and a nonnegative start vector.
// The iterate is kept at unit h-weighted sum; lambda is the growth factor.
PowerResult nonnegative_power(const UlamOperator& op, Action action, std::vector<double> v, const PowerOptions& opts,
                              const char* what) {
  const double h = 1.0 / static_cast<double>(op.n());
  double s = weighted_sum(v, h);
  for (auto& x : v) x /= s;
  std::vector<double> w(v.size()), two_back = v;
  double lambda = 0.0, prev_lambda = -1.0, change = 0.0;
  std::size_t stable = 0, since_best = 0;
  double best_change = std::numeric_limits<double>::infinity();
  double reference_change = std::numeric_limits<double>::infinity();
  for (std::size_t it = 1; it <= opts.max_iter; ++it) {
    apply(op, action, opts.damped, v, w);
    const double mass = weighted_sum(w, h);
    if (!(mass > 0)) throw ConvergenceError(std::string(what) + ": iterate vanished (all mass escaped)", 0.0);
    double mu = mass;
    for (auto& x : w) x /= mass;
    lambda = opts.damped ? 2.0 * mu - 1.0 : mu;
    change = l1_diff(w, v, h);

    if (change < opts.tol) {
      v.swap(w);
      return {std::move(v), lambda, change, it};
    }
    // Rounding floor: the eigenvalue has settled and the change has stopped
    // shrinking for 50 iterations.
    stable = std::abs(lambda - prev_lambda) < opts.eigen_tol ? stable + 1 : 0;
    if (change < 0.999 * best_change) {
      best_change = change;
      since_best = 0;
    } else {
      ++since_best;
    }
    if (stable >= 50 && since_best >= 50 && change < 1e3 * opts.tol) {
      v.swap(w);
      return {std::move(v), lambda, change, it};
    }
    // Period-2 detection: iterates alternate between two profiles.
    if (it % 100 == 0) {
      const double back = l1_diff(w, two_back, h);
      if (change > 1e-6 && back < 1e-3 * change && change > 0.5 * reference_change)
        throw ConvergenceError(std::string(what) +
                                   ": oscillating iterates (period 2); retry with the damped iteration",
                               change);
      reference_change = change;
    }
    prev_lambda = lambda;
    two_back.swap(v); // two_back <- previous iterate
    v.swap(w);
  }
  throw ConvergenceError(std::string(what) + ": no convergence within max iterations", change);
}

bool stochastic(const UlamOperator& op) {
  for (double s : op.row_sums())
    if (std::abs(s - 1.0) > 1e-12) return false;
  return true;
}

} // namespace

std::vector<CellDensity> invariant_densities(const UlamOperator& op, const PowerOptions& opts) {
  if (op.kind() != OperatorKind::full) throw ConfigError("invariant_densities: needs a full operator");
  const double h = 1.0 / static_cast<double>(op.n());
  std::vector<CellDensity> out;
  if (op.eps() > 0) {
    std::vector<double> start(op.size(), 1.0);
    auto r = nonnegative_power(op, Action::push, std::move(start), opts, "invariant_density");
    out.push_back(op.embed(r.v));
    return out;
  }
  const auto& states = op.cell_states();
  const int m = states.empty() ? 0 : *std::max_element(states.begin(), states.end()) + 1;
  for (int j = 0; j < m; ++j) {
    std::vector<double> start(op.size(), 0.0);
    for (std::size_t k = 0; k < op.size(); ++k)
      if (states[k] == j) start[k] = 1.0;
    auto r = nonnegative_power(op, Action::push, std::move(start), opts, "invariant_density");
    double outside = 0.0;
    for (std::size_t k = 0; k < op.size(); ++k)
      if (states[k] != j) outside += r.v[k] * h;
    if (outside > 1e-9)
      throw ConsistencyError("invariant_densities: interval " + std::to_string(j + 1) +
                             " is not invariant at eps = 0");
    out.push_back(op.embed(r.v));
  }
  return out;
}

CellDensity invariant_density(const UlamOperator& op, const PowerOptions& opts) {
  auto all = invariant_densities(op, opts);
  if (all.size() != 1) throw ConfigError("invariant_density: eps = 0 has one density per interval");
  return all.front();
}

double SpectralTriple::functional(std::span<const double> a) const {
  double s = 0.0;
  for (std::size_t k = 0; k < left.size(); ++k) s += left[k] * a[k];
  return s * cell_width;
}

SpectralTriple leading_eigen(const UlamOperator& op, const PowerOptions& opts) {
  const double h = 1.0 / static_cast<double>(op.n());
  std::vector<double> ones(op.size(), 1.0);
  auto right = nonnegative_power(op, Action::push, ones, opts, "leading_eigen");
  auto left = nonnegative_power(op, Action::pull, ones, opts, "leading_eigen");

  SpectralTriple t;
  t.lambda = right.lambda;
  t.right = std::move(right.v);
  t.left = std::move(left.v);
  t.cell_width = h;
  t.iterations = std::max(right.iterations, left.iterations);
  for (auto& x : t.right) x = std::max(x, 0.0);
  const double pairing = t.functional(t.right);
  for (auto& x : t.left) x /= pairing;

  std::vector<double> w(op.size());
  op.push_forward(t.right, w);
  double res = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) res += std::abs(w[k] - t.lambda * t.right[k]);
  t.residual = res * h;
  return t;
}

GapEntry second_gap(const UlamOperator& op, const PowerOptions& opts) {
  if (!stochastic(op)) throw ConfigError("second_gap: operator rows must sum to 1");
  const std::size_t n = op.size();
  GapEntry e;
  e.eps = op.eps();

  // Perron pair: right vector 1, left vector the invariant density (sum 1).
  PowerOptions popts = opts;
  auto perron = nonnegative_power(op, Action::push, std::vector<double>(n, 1.0), popts, "second_gap");
  std::vector<double> phi = perron.v;
  const double phi_sum = std::accumulate(phi.begin(), phi.end(), 0.0);
  for (auto& x : phi) x /= phi_sum;

  auto deflate = [&](std::vector<double>& w) {
    const double s = std::accumulate(w.begin(), w.end(), 0.0);
    for (std::size_t k = 0; k < n; ++k) w[k] -= s * phi[k];
  };
  auto dot = [&](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) s += a[k] * b[k];
    return s;
  };
  auto scale_to_unit = [&](std::vector<double>& w) {
    const double nrm = std::sqrt(dot(w, w));
    if (nrm > 0)
      for (auto& x : w) x /= nrm;
    return nrm;
  };

  RandomStream rng(opts.seed, StreamPurpose::spectral_start, 0);
  std::vector<double> w0(n);
  for (auto& x : w0) x = rng.uniform() - 0.5;
  deflate(w0);
  scale_to_unit(w0);

  std::vector<double> w1(n), w2(n);
  auto step = [&](const std::vector<double>& in, std::vector<double>& out) {
    apply(op, Action::push, opts.damped, in, out);
    deflate(out);
  };
  auto undamp = [&](double mu) { return opts.damped ? 2.0 * mu - 1.0 : mu; };

  double prev_r = std::numeric_limits<double>::quiet_NaN();
  double prev_a = prev_r, prev_b = prev_r;
  int real_stable = 0, pair_stable = 0;
  for (std::size_t it = 1; it <= opts.max_iter; ++it) {
    step(w0, w1);
    const double g1 = std::sqrt(dot(w1, w1));
    if (g1 < 1e-12) {
      // One step annihilates the zero-mean part up to rounding: |λ₂| is below resolution.
      e.second_modulus = 0.0;
      e.second_value = 0.0;
      e.gap = 1.0;
      e.iterations = it;
      return e;
    }
    // Real estimate: Rayleigh quotient on the normalized iterate.
    const double r = dot(w1, w0);
    step(w1, w2);
    // Two-term recurrence w2 ≈ a w1 + b w0 (least squares).
    const double s11 = dot(w1, w1), s10 = dot(w1, w0), s00 = dot(w0, w0);
    const double t1 = dot(w2, w1), t0 = dot(w2, w0);
    const double det = s11 * s00 - s10 * s10;
    double a = std::numeric_limits<double>::quiet_NaN(), b = a;
    if (det > 1e-14 * s11 * s00) {
      a = (t1 * s00 - t0 * s10) / det;
      b = (t0 * s11 - t1 * s10) / det;
    }
    real_stable = std::abs(r - prev_r) < opts.eigen_tol ? real_stable + 1 : 0;
    pair_stable = (std::abs(a - prev_a) < 1e3 * opts.eigen_tol && std::abs(b - prev_b) < 1e3 * opts.eigen_tol)
                      ? pair_stable + 1
                      : 0;
    prev_r = r;
    prev_a = a;
    prev_b = b;

    if (real_stable >= 3) {
      const double lam = undamp(r);
      e.second_value = lam;
      e.second_modulus = std::abs(lam);
      e.iterations = it;
      break;
    }
    if (pair_stable >= 3 && it > 50 && a * a + 4.0 * b < 0) {
      // λ² - aλ - b = 0 with complex roots; |λ|² = -b.
      double re = a / 2.0, mod = std::sqrt(-b);
      if (opts.damped) {
        const double im = std::sqrt(-b - re * re);
        re = 2.0 * re - 1.0;
        mod = std::hypot(re, 2.0 * im);
      }
      e.second_value = re;
      e.second_modulus = mod;
      e.complex_pair = true;
      e.iterations = it;
      break;
    }
    w0.swap(w1);
    scale_to_unit(w0);
    if (it == opts.max_iter)
      throw ConvergenceError("second_gap: no convergence within max iterations", std::abs(r - prev_r));
  }
  e.gap = std::clamp(1.0 - e.second_modulus, 0.0, 1.0);
  return e;
}

GapReport gap_report(std::vector<GapEntry> entries) {
  std::sort(entries.begin(), entries.end(), [](const GapEntry& a, const GapEntry& b) { return a.eps < b.eps; });
  GapReport rep;
  rep.table = std::move(entries);
  std::vector<double> x, y;
  for (const auto& e : rep.table) {
    x.push_back(e.eps);
    y.push_back(e.gap);
  }
  if (!x.empty()) {
    const auto fit = stats::fit_through_origin(x, y);
    rep.slope = fit.slope;
    rep.r_squared = fit.r_squared;
    rep.kappa = fit.slope > 0 ? 1.0 / fit.slope : std::numeric_limits<double>::infinity();
    rep.eta = std::exp(-1.0);
  }
  return rep;
}

DecayProfile decay_profile(const UlamOperator& op, std::span<const double> a, double lambda,
                           std::span<const double> target, std::size_t n_max) {
  if (a.size() != op.size() || target.size() != op.size())
    throw ConfigError("decay_profile: vector size does not match the operator");
  if (!(lambda > 0)) throw ConfigError("decay_profile: lambda must be positive");
  const double h = 1.0 / static_cast<double>(op.n());
  DecayProfile out;
  std::vector<double> v(a.begin(), a.end()), w(v.size());
  const std::vector<double> tgt(target.begin(), target.end());
  const double log_growth = -std::log(lambda);
  for (std::size_t k = 0; k <= n_max; ++k) {
    if (static_cast<double>(k) * log_growth > 690.0) {
      out.truncated = true;
      break;
    }
    out.values.push_back(l1_diff(v, tgt, h));
    if (k == n_max) break;
    op.push_forward(v, w);
    for (std::size_t i = 0; i < w.size(); ++i) v[i] = w[i] / lambda;
  }
  out.theta = fit_geometric_rate(out.values);
  return out;
}

DecayProfile decay_profile(const UlamOperator& op, std::span<const double> a, const SpectralTriple& triple,
                           std::size_t n_max) {
  const double c = triple.functional(a);
  std::vector<double> target(triple.right.size());
  for (std::size_t k = 0; k < target.size(); ++k) target[k] = c * triple.right[k];
  return decay_profile(op, a, triple.lambda, target, n_max);
}

double fit_geometric_rate(std::span<const double> values, double floor) {
  std::vector<double> x, y;
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!(values[k] > floor)) break;
    x.push_back(static_cast<double>(k));
    y.push_back(std::log(values[k]));
  }
  if (x.size() < 2) return 0.0;
  return std::exp(stats::fit_line(x, y).slope);
}

Observable project_P(const Observable& a, const std::vector<CellDensity>& block_densities,
                     const std::vector<Interval>& intervals) {
  if (block_densities.size() != intervals.size()) throw ConfigError("project_P: one density per interval");
  std::vector<Observable::Piece> pieces;
  for (std::size_t j = 0; j < intervals.size(); ++j) {
    const auto& iv = intervals[j];
    const auto& phi = block_densities[j];
    const double mass = a.integral(iv);
    const double w = phi.width();
    const auto first = static_cast<std::size_t>(std::floor(iv.lo / w));
    for (std::size_t c = first; c < phi.cells(); ++c) {
      const double lo = std::max(iv.lo, static_cast<double>(c) * w);
      const double hi = std::min(iv.hi, static_cast<double>(c + 1) * w);
      if (lo >= iv.hi) break;
      if (!(hi > lo)) continue;
      const double v = mass * phi.values[c];
      if (!pieces.empty() && pieces.back().v0 == v && pieces.back().v1 == v)
        pieces.back().x1 = hi;
      else
        pieces.push_back({lo, hi, v, v});
    }
  }
  if (!pieces.empty()) {
    pieces.front().x0 = 0.0;
    pieces.back().x1 = 1.0;
  }
  return Observable(std::move(pieces));
}

} // namespace metastab
