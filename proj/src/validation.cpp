#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "metastab/error.hpp"
#include "metastab/map_model.hpp"
#include "metastab/markov_reduction.hpp"
#include "metastab/transfer_operator.hpp"

namespace metastab {

std::string to_string(CheckStatus s) {
  switch (s) {
  case CheckStatus::pass: return "pass";
  case CheckStatus::fail: return "fail";
  case CheckStatus::asserted: return "asserted";
  case CheckStatus::skipped: return "skipped";
  }
  return "unknown";
}

bool ValidationReport::passed() const {
  return std::none_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.status == CheckStatus::fail; });
}

const CheckResult& ValidationReport::check(const std::string& id) const {
  for (const auto& c : checks)
    if (c.id == id) return c;
  throw std::out_of_range("no check with id " + id);
}

nlohmann::json ValidationReport::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : checks)
    arr.push_back({{"id", c.id}, {"title", c.title}, {"status", to_string(c.status)}, {"detail", c.detail}});
  return {{"family", family}, {"passed", passed()}, {"checks", arr}};
}

namespace {

std::string str(const Rational& r) {
  std::ostringstream os;
  os << r;
  return os.str();
}

// Forward orbit of the ε = 0 critical set in exact arithmetic. Returns the
// first offending point, if any, and whether the orbit closed on itself.
struct OrbitOutcome {
  std::optional<std::pair<int, Rational>> hit; // (iterate, point)
  bool closed = false;
  int depth_reached = 0;
  std::set<Rational> final_points;
};

OrbitOutcome exact_orbit_check(const ExactDescription& ex, int depth) {
  const auto& br = ex.branches;
  std::set<Rational> boundaries(ex.boundaries.begin(), ex.boundaries.end());
  std::set<Rational> holes;
  for (const auto& b : br)
    for (const auto& bd : ex.boundaries) {
      const Rational x = (bd - b.intercept) / b.slope;
      if (x >= b.lo && x <= b.hi && !boundaries.count(x)) holes.insert(x);
    }
  std::set<Rational> breakpoints;
  for (const auto& b : br) {
    breakpoints.insert(b.lo);
    breakpoints.insert(b.hi);
  }
  auto images = [&](const Rational& x) {
    std::vector<Rational> out;
    for (std::size_t k = 0; k < br.size(); ++k) {
      const auto& b = br[k];
      const bool right = (x >= b.lo && x < b.hi) || (k + 1 == br.size() && x == b.hi);
      const bool left = (x > b.lo && x <= b.hi) || (k == 0 && x == b.lo);
      if (right || left) out.push_back(b.slope * x + b.intercept);
    }
    return out;
  };
  OrbitOutcome res;
  std::set<Rational> current = breakpoints, visited;
  for (int k = 1; k <= depth; ++k) {
    std::set<Rational> next;
    for (const auto& x : current)
      for (auto& y : images(x)) next.insert(std::move(y));
    for (const auto& y : next)
      if (holes.count(y)) {
        res.hit = std::pair{k, y};
        res.depth_reached = k;
        return res;
      }
    res.depth_reached = k;
    const bool nothing_new = std::includes(visited.begin(), visited.end(), next.begin(), next.end());
    visited.insert(next.begin(), next.end());
    current = std::move(next);
    if (nothing_new) {
      res.closed = true;
      break;
    }
    if (current.size() > 100000) break;
  }
  res.final_points = current;
  return res;
}

// Floating-point fallback for families without an exact description.
OrbitOutcome float_orbit_check(const MapFamily& family, int depth) {
  const BranchTable table(family, 0.0);
  const auto holes = infinitesimal_holes(family);
  const auto bps = table.breakpoints();
  std::vector<double> current;
  for (double c : bps) {
    current.push_back(table(c, Side::left));
    current.push_back(table(c, Side::right));
  }
  OrbitOutcome res;
  for (int k = 1; k <= depth; ++k) {
    for (double y : current)
      for (double h : holes)
        if (std::abs(y - h) < 1e-10) {
          res.hit = std::pair{k, Rational(0)};
          res.depth_reached = k;
          return res;
        }
    res.depth_reached = k;
    std::vector<double> next;
    for (double y : current) next.push_back(table(y, Side::right));
    current = std::move(next);
  }
  return res;
}

} // namespace

ValidationReport validate_assumptions(const MapFamily& family, const std::vector<double>& eps_grid,
                                      const ValidationOptions& options) {
  ValidationReport rep;
  rep.family = family.name();
  std::vector<double> grid{0.0};
  for (double e : eps_grid)
    if (e > 0) grid.push_back(e);

  // Uniform expansion.
  {
    double worst = std::numeric_limits<double>::infinity();
    bool sampled = false;
    for (double e : grid)
      for (const auto& b : family.branches(e)) {
        worst = std::min(worst, b.min_expansion());
        sampled = sampled || !b.is_affine();
      }
    rep.checks.push_back({"expansion", "uniform expansion", worst > 1.0 ? CheckStatus::pass : CheckStatus::fail,
                          "min |T'| = " + std::to_string(worst) + (sampled ? " (sampled)" : " (exact)")});
  }

  rep.checks.push_back({"I", "unique mixing ACIMs on each I_j", CheckStatus::asserted,
                        "asserted by family definition, not verified"});

  // (II) orbits of the critical set avoid the infinitesimal holes.
  {
    CheckResult c{"II", "no return of the critical set", CheckStatus::pass, ""};
    OrbitOutcome o;
    std::string how;
    if (family.exact()) {
      o = exact_orbit_check(*family.exact(), options.orbit_depth);
      how = "exact rational orbits";
    } else {
      o = float_orbit_check(family, options.orbit_depth);
      how = "floating-point orbits";
    }
    if (o.hit) {
      c.status = CheckStatus::fail;
      c.detail = how + ": iterate " + std::to_string(o.hit->first) + " of the critical set lands in H_0";
      if (family.exact()) c.detail += " at " + str(o.hit->second);
    } else {
      std::string pts;
      for (const auto& p : o.final_points) pts += (pts.empty() ? "" : ", ") + str(p);
      c.detail = how + ", depth " + std::to_string(o.depth_reached);
      if (o.closed) c.detail += "; orbit closes on {" + pts + "}";
      if (!family.builtin() || !o.closed)
        c.detail += "; finitely checked only (K=" + std::to_string(options.orbit_depth) + ")";
    }
    rep.checks.push_back(c);
  }

  // Without supplied or analytic densities, fall back to an ε = 0 Ulam estimate.
  std::vector<CellDensity> densities = options.densities.empty() ? family.reference_densities() : options.densities;
  std::string density_note;
  if (densities.empty()) {
    try {
      const auto n = static_cast<std::size_t>(2 * family.m()) * 512;
      densities = invariant_densities(build_ulam(family, 0.0, n, OperatorKind::full));
      density_note = " (Ulam densities, n = " + std::to_string(n) + ")";
    } catch (const std::exception&) {
      densities.clear();
    }
  }
  const auto h0 = infinitesimal_holes(family);

  // (III) positive densities at infinitesimal holes.
  if (densities.empty()) {
    rep.checks.push_back({"III", "positive ACIMs at infinitesimal holes", CheckStatus::skipped, "no densities"});
  } else {
    CheckResult c{"III", "positive ACIMs at infinitesimal holes", CheckStatus::pass, ""};
    std::ostringstream os;
    for (double h : h0) {
      const int j = family.state_of(h);
      const auto& d = densities[static_cast<std::size_t>(j)];
      double v = d.value_at(h, Side::right);
      if (h > 0.0) v = std::min(v, d.value_at(h, Side::left));
      os << "phi_" << j + 1 << "(" << h << ") = " << v << "; ";
      if (!(v > 0)) c.status = CheckStatus::fail;
    }
    c.detail = os.str();
    rep.checks.push_back(c);
  }

  // (V) boundary points.
  {
    CheckResult c{"V", "boundary points do not move", CheckStatus::pass, ""};
    std::ostringstream os;
    const BranchTable t0(family, 0.0);
    const auto c0 = t0.breakpoints();
    for (double b : family.boundaries()) {
      const bool critical = std::any_of(c0.begin(), c0.end(), [&](double c) { return std::abs(c - b) < 1e-14; });
      if (!critical) {
        double worst = 0.0;
        for (double e : grid) {
          const BranchTable t(family, e);
          worst = std::max({worst, std::abs(t(b, Side::left) - b), std::abs(t(b, Side::right) - b)});
        }
        os << "b=" << b << " fixed (max |T(b)-b| = " << worst << "); ";
        if (worst > 1e-12) c.status = CheckStatus::fail;
      } else {
        const bool straddled = t0(b, Side::left) < b && b < t0(b, Side::right);
        bool stays = true;
        for (double e : grid) {
          const auto ce = BranchTable(family, e).breakpoints();
          stays = stays && std::any_of(ce.begin(), ce.end(), [&](double c) { return std::abs(c - b) < 1e-12; });
        }
        os << "b=" << b << " critical, straddled=" << straddled << ", in every C_eps=" << stays << "; ";
        if (!straddled || !stays) c.status = CheckStatus::fail;
      }
    }
    c.detail = os.str();
    rep.checks.push_back(c);
  }

  // (VI) irreducibility of the estimated rates.
  {
    std::vector<double> pos(grid.begin() + 1, grid.end());
    std::sort(pos.rbegin(), pos.rend());
    if (pos.size() < 3 || densities.empty()) {
      rep.checks.push_back({"VI", "irreducibility", CheckStatus::skipped, "need >= 3 positive epsilon and densities"});
    } else {
      const auto rates = estimate_beta(family, pos, densities);
      std::ostringstream os;
      os << "beta =";
      for (int i = 0; i < rates.m(); ++i)
        for (int j = 0; j < rates.m(); ++j)
          if (i != j) os << " b" << i + 1 << j + 1 << "=" << rates.beta(i, j);
      rep.checks.push_back(
          {"VI", "irreducibility", rates.irreducible() ? CheckStatus::pass : CheckStatus::fail, os.str() + density_note});
    }
  }
  return rep;
}

} // namespace metastab
