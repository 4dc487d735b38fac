#include <cmath>

#include "metastab/error.hpp"
#include "metastab/map_model.hpp"

namespace metastab {

namespace {

Rational q(long num, long den) { return Rational(num) / Rational(den); }

CellDensity block_density(std::size_t cells, std::size_t block, double value) {
  CellDensity d;
  d.values.assign(cells, 0.0);
  d.values[block] = value;
  return d;
}

// Continued-fraction reconstruction of a double that is meant to be a ratio of
// small integers. Returns nothing if no p/q with q <= max_den reproduces x.
std::optional<Rational> as_rational(double x, long max_den = 1'000'000) {
  if (!std::isfinite(x)) return std::nullopt;
  long p0 = 0, q0 = 1, p1 = 1, q1 = 0;
  double r = x;
  for (int it = 0; it < 64; ++it) {
    const double a = std::floor(r);
    if (std::abs(a) > 1e12) break;
    const long ai = static_cast<long>(a);
    const long p2 = ai * p1 + p0, q2 = ai * q1 + q0;
    if (q2 > max_den) break;
    p0 = p1;
    q0 = q1;
    p1 = p2;
    q1 = q2;
    if (static_cast<double>(p1) / static_cast<double>(q1) == x) return Rational(p1) / Rational(q1);
    const double frac = r - a;
    if (frac == 0.0) break;
    r = 1.0 / frac;
  }
  return std::nullopt;
}

} // namespace

MapFamily two_cell() {
  auto builder = [](double eps) {
    return std::vector<Branch>{
        Branch({0.0, 0.25}, 2.0, eps),
        Branch({0.25, 0.75}, 2.0, -0.5),
        Branch({0.75, 1.0}, 2.0, -1.0 - eps),
    };
  };
  MapFamily f("two_cell", nlohmann::json::object(), {0.5}, {0.0, 0.1}, builder, true);
  f.with_exact({{{q(0, 1), q(1, 4), q(2, 1), q(0, 1)},
                 {q(1, 4), q(3, 4), q(2, 1), q(-1, 2)},
                 {q(3, 4), q(1, 1), q(2, 1), q(-1, 1)}},
                {q(1, 2)}});
  f.with_reference_densities({block_density(2, 0, 2.0), block_density(2, 1, 2.0)});
  return f;
}

MapFamily three_cell() {
  auto builder = [](double eps) {
    // The middle branch pivots about (1/2, 1/2); slope 3/(1-6ε) makes each of
    // its two holes exactly ε/3 long.
    const double tilt = 3.0 / (1.0 - 6.0 * eps);
    return std::vector<Branch>{
        Branch({0.0, 1.0 / 9}, 3.0, 0.0),
        Branch({1.0 / 9, 2.0 / 9}, 3.0, -1.0 / 3 + eps),
        Branch({2.0 / 9, 4.0 / 9}, 3.0, -2.0 / 3),
        Branch({4.0 / 9, 5.0 / 9}, tilt, 0.5 - 0.5 * tilt),
        Branch({5.0 / 9, 7.0 / 9}, 3.0, -4.0 / 3),
        Branch({7.0 / 9, 8.0 / 9}, 3.0, -5.0 / 3 - eps),
        Branch({8.0 / 9, 1.0}, 3.0, -2.0),
    };
  };
  MapFamily f("three_cell", nlohmann::json::object(), {1.0 / 3, 2.0 / 3}, {0.0, 0.05}, builder, true);
  f.with_exact({{{q(0, 1), q(1, 9), q(3, 1), q(0, 1)},
                 {q(1, 9), q(2, 9), q(3, 1), q(-1, 3)},
                 {q(2, 9), q(4, 9), q(3, 1), q(-2, 3)},
                 {q(4, 9), q(5, 9), q(3, 1), q(-1, 1)},
                 {q(5, 9), q(7, 9), q(3, 1), q(-4, 3)},
                 {q(7, 9), q(8, 9), q(3, 1), q(-5, 3)},
                 {q(8, 9), q(1, 1), q(3, 1), q(-2, 1)}},
                {q(1, 3), q(2, 3)}});
  f.with_reference_densities({block_density(3, 0, 3.0), block_density(3, 1, 3.0), block_density(3, 2, 3.0)});
  return f;
}

MapFamily affine_table(std::string name, std::vector<double> boundaries, std::vector<AffineTableBranch> table,
                       Interval eps_range) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& b : table)
    rows.push_back({{"lo", {b.lo0, b.lo1}},
                    {"hi", {b.hi0, b.hi1}},
                    {"slope", {b.slope0, b.slope1}},
                    {"intercept", {b.intercept0, b.intercept1}}});
  nlohmann::json params{{"boundaries", boundaries}, {"branches", rows}};
  auto builder = [table](double eps) {
    std::vector<Branch> out;
    for (const auto& b : table)
      out.emplace_back(Interval{b.lo0 + b.lo1 * eps, b.hi0 + b.hi1 * eps}, b.slope0 + b.slope1 * eps,
                       b.intercept0 + b.intercept1 * eps);
    return out;
  };
  MapFamily f(std::move(name), params, boundaries, eps_range, builder, false);

  ExactDescription exact;
  bool ok = true;
  for (const auto& b : table) {
    const auto lo = as_rational(b.lo0), hi = as_rational(b.hi0), s = as_rational(b.slope0),
               c = as_rational(b.intercept0);
    if (!lo || !hi || !s || !c) {
      ok = false;
      break;
    }
    exact.branches.push_back({*lo, *hi, *s, *c});
  }
  for (double bd : boundaries) {
    const auto r = as_rational(bd);
    if (!r) {
      ok = false;
      break;
    }
    exact.boundaries.push_back(*r);
  }
  if (ok) f.with_exact(std::move(exact));
  return f;
}

MapFamily builtin_family(const std::string& name) {
  if (name == "two_cell") return two_cell();
  if (name == "three_cell") return three_cell();
  throw ConfigError("unknown built-in family '" + name + "'");
}

MapFamily family_from_json(const nlohmann::json& j) {
  const std::string name = j.at("name").get<std::string>();
  if (name == "two_cell" || name == "three_cell") return builtin_family(name);
  const auto& params = j.at("params");
  if (!params.contains("branches")) throw ConfigError("family '" + name + "' is not built in and has no branch table");
  std::vector<AffineTableBranch> table;
  auto pair = [](const nlohmann::json& v) {
    if (v.is_number()) return std::pair{v.get<double>(), 0.0};
    return std::pair{v.at(0).get<double>(), v.at(1).get<double>()};
  };
  for (const auto& row : params.at("branches")) {
    const auto [lo0, lo1] = pair(row.at("lo"));
    const auto [hi0, hi1] = pair(row.at("hi"));
    const auto [s0, s1] = pair(row.at("slope"));
    const auto [c0, c1] = pair(row.at("intercept"));
    table.push_back({lo0, lo1, hi0, hi1, s0, s1, c0, c1});
  }
  const auto range = j.value("eps_range", std::vector<double>{0.0, 0.1});
  if (range.size() != 2) throw ConfigError("eps_range must be [lo, hi]");
  return affine_table(name, params.at("boundaries").get<std::vector<double>>(), std::move(table),
                      {range[0], range[1]});
}

} // namespace metastab
