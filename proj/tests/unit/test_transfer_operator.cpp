#include <doctest.h>

#include <random>
#include <sstream>

#include "../oracles/oracles.hpp"
#include "metastab/error.hpp"
#include "metastab/transfer_operator.hpp"

using namespace metastab;

namespace {

std::vector<double> ones(std::size_t n) { return std::vector<double>(n, 1.0); }

MapFamily doubling() {
  return affine_table("doubling", {0.5}, {{0.0, 0, 0.5, 0, 2, 0, 0, 0}, {0.5, 0, 1.0, 0, 2, 0, -1, 0}}, {0.0, 0.1});
}

std::size_t grid_for(const MapFamily& f, std::size_t n) {
  const auto q = 2 * static_cast<std::size_t>(f.m());
  return (n + q - 1) / q * q;
}

} // namespace

TEST_CASE("two_cell Ulam matrix at eps = 0, n = 8") {
  const auto op = build_ulam(two_cell(), 0.0, 8, OperatorKind::full);
  const auto P = oracle::dense(op);
  // cell 0 = [0, 1/8) maps onto [0, 1/4): cells 0 and 1.
  CHECK(P(0, 0) == doctest::Approx(0.5));
  CHECK(P(0, 1) == doctest::Approx(0.5));
  // cell 2 = [1/4, 3/8) maps onto [0, 1/4) under 2x - 1/2.
  CHECK(P(2, 0) == doctest::Approx(0.5));
  CHECK(P(2, 1) == doctest::Approx(0.5));
  for (int k = 0; k < 8; ++k) {
    double inside = 0.0;
    for (int l = 0; l < 8; ++l) inside += (k < 4) == (l < 4) ? P(k, l) : 0.0;
    CHECK(inside == doctest::Approx(1.0).epsilon(1e-15));
  }
  const auto hole = build_ulam(two_cell(), 0.0, 8, OperatorKind::hole, 0);
  for (double s : hole.row_sums()) CHECK(s == 1.0);
}

TEST_CASE("hole deficit sits on the hole cells") {
  const std::size_t n = 1024;
  const double eps = 0.05;
  const auto op = build_ulam(two_cell(), eps, n, OperatorKind::hole, 0);
  const auto rows = op.row_sums();
  const double h = 1.0 / n;
  double total = 0.0;
  for (std::size_t k = 0; k < op.size(); ++k) {
    const double lo = op.layout().cells[k] * h, hi = lo + h;
    const bool meets = hi > 0.25 - eps / 2 && lo < 0.25;
    const double deficit = 1.0 - rows[k];
    CHECK((deficit > 1e-12) == meets);
    total += deficit * h * 2.0; // φ_1 = 2 on I_1
  }
  CHECK(std::abs(total - eps) <= 1e-10);
}

TEST_CASE("full operators are stochastic, hole deficits match hole measures") {
  for (const auto& f : {two_cell(), three_cell()}) {
    for (std::size_t n0 : {256, 1024, 4096}) {
      const auto n = grid_for(f, n0);
      for (double eps : {0.04, 0.02, 0.01, 0.005}) {
        if (eps * static_cast<double>(n) < 10) continue;
        double worst = 0.0;
        for (double s : build_ulam(f, eps, n, OperatorKind::full).row_sums()) worst = std::max(worst, std::abs(s - 1));
        CHECK(worst <= 1e-12);
        const auto holes = compute_holes(f, eps, f.reference_densities());
        for (int j = 0; j < f.m(); ++j) {
          const auto op = build_ulam(f, eps, n, OperatorKind::hole, j);
          const auto rows = op.row_sums();
          double deficit = 0.0;
          for (std::size_t k = 0; k < op.size(); ++k) {
            CHECK(rows[k] <= 1.0 + 1e-12);
            deficit += (1.0 - rows[k]) / static_cast<double>(n);
          }
          double leb = 0.0;
          for (int k = 0; k < f.m(); ++k) leb += holes.lebesgue(j, k);
          CHECK(std::abs(deficit - leb) <= 1e-10);
          for (double v : op.matrix().val) CHECK(v >= 0.0);
        }
      }
    }
  }
}

TEST_CASE("Ulam entries agree with the absolute-coordinate oracle") {
  for (const auto& f : {two_cell(), three_cell()}) {
    const auto n = grid_for(f, 256);
    for (double eps : {0.0, 0.04, 0.01}) {
      const auto P = oracle::dense(build_ulam(f, eps, n, OperatorKind::full));
      CHECK((P - oracle::ulam_dense(f, eps, n)).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("build_ulam preconditions") {
  CHECK_THROWS_AS(build_ulam(two_cell(), 0.01, 512, OperatorKind::hole, 0), ResolutionError);
  CHECK_NOTHROW(build_ulam(two_cell(), 0.01, 1024, OperatorKind::hole, 0));
  CHECK_THROWS_AS(build_ulam(three_cell(), 0.01, 1024, OperatorKind::full), ConfigError);
  CHECK_THROWS_AS(build_ulam(two_cell(), 0.01, 1024, OperatorKind::hole, 2), ConfigError);
  CHECK_THROWS_AS(build_ulam(two_cell(), 0.5, 1024, OperatorKind::full), ConfigError);
}

TEST_CASE("triplet export") {
  const auto op = build_ulam(two_cell(), 0.0, 8, OperatorKind::full);
  std::ostringstream os;
  op.write_triplets(os);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line.rfind("# ulam_operator n=8", 0) == 0);
  std::getline(is, line);
  std::size_t rows = 0;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == op.matrix().nnz());
}

TEST_CASE("invariant densities") {
  const auto blocks = invariant_densities(build_ulam(two_cell(), 0.0, 256, OperatorKind::full));
  REQUIRE(blocks.size() == 2);
  for (std::size_t k = 0; k < 256; ++k) {
    CHECK(std::abs(blocks[0].values[k] - (k < 128 ? 2.0 : 0.0)) <= 1e-12);
    CHECK(std::abs(blocks[1].values[k] - (k < 128 ? 0.0 : 2.0)) <= 1e-12);
  }
  const auto t = invariant_densities(build_ulam(three_cell(), 0.0, 258, OperatorKind::full));
  REQUIRE(t.size() == 3);
  for (std::size_t k = 0; k < 258; ++k) CHECK(std::abs(t[1].values[k] - (k >= 86 && k < 172 ? 3.0 : 0.0)) <= 1e-12);

  const auto phi = invariant_density(build_ulam(two_cell(), 0.01, 4096, OperatorKind::full));
  CHECK(phi.total_mass() == doctest::Approx(1.0).epsilon(1e-12));
  const double l1 = phi.l1_distance(CellDensity{{1.0}});
  MESSAGE("two_cell eps=0.01 n=4096: L1 distance of phi_eps to 1 = " << l1);
  CHECK(l1 < 0.15);

  const auto u = invariant_density(build_ulam(doubling(), 0.01, 512, OperatorKind::full));
  for (double v : u.values) CHECK(std::abs(v - 1.0) <= 1e-12);
}

TEST_CASE("leading eigentriple of hole operators") {
  const auto op = build_ulam(two_cell(), 0.01, 4096, OperatorKind::hole, 0);
  const auto t = leading_eigen(op);
  CHECK(t.lambda > 0.0);
  CHECK(t.lambda < 1.0);
  CHECK(std::abs((1 - t.lambda) / 0.01 - 1.0) <= 0.1);
  for (double r : t.right) CHECK(r >= 0.0);
  CHECK(std::abs(t.functional(t.right) - 1.0) <= 1e-10);
  CHECK(t.residual <= 1e-10);

  const auto t0 = leading_eigen(build_ulam(two_cell(), 0.0, 256, OperatorKind::hole, 0));
  CHECK(t0.lambda == doctest::Approx(1.0).epsilon(1e-14));
  for (double r : t0.right) CHECK(std::abs(r - 2.0) <= 1e-12);
}

TEST_CASE("power iteration matches the dense eigensolve at n = 256") {
  for (const auto& f : {two_cell(), three_cell()}) {
    const auto n = grid_for(f, 256);
    const double eps = 0.04;
    const auto P = oracle::ulam_dense(f, eps, n);
    const auto full = oracle::spectrum(P);
    const auto op = build_ulam(f, eps, n, OperatorKind::full);
    const auto g = second_gap(op);
    CHECK(std::abs(g.second_modulus - std::abs(full.values[1])) <= 1e-8);
    const auto phi = invariant_density(op);
    for (std::size_t k = 0; k < n; ++k)
      CHECK(std::abs(phi.values[k] - full.perron_left(static_cast<Eigen::Index>(k)) * static_cast<double>(n)) <= 1e-8);

    for (int j = 0; j < f.m(); ++j) {
      const auto hole = build_ulam(f, eps, n, OperatorKind::hole, j);
      const auto t = leading_eigen(hole);
      const auto sp = oracle::spectrum(oracle::restrict_block(P, f.interval(j)));
      CHECK(std::abs(t.lambda - sp.values[0].real()) <= 1e-8);
      double mass = 0.0;
      for (double r : t.right) mass += r;
      Eigen::Map<const Eigen::VectorXd> right(t.right.data(), static_cast<Eigen::Index>(t.right.size()));
      const Eigen::VectorXd left = sp.perron_right / (sp.perron_right.dot(right) / static_cast<double>(n));
      for (std::size_t k = 0; k < t.right.size(); ++k) {
        CHECK(std::abs(t.right[k] / mass - sp.perron_left(static_cast<Eigen::Index>(k))) <= 1e-8);
        CHECK(std::abs(t.left[k] - left(static_cast<Eigen::Index>(k))) <= 1e-8);
      }
    }
  }
}

TEST_CASE("spectral gap") {
  const auto g = second_gap(build_ulam(two_cell(), 0.01, 4096, OperatorKind::full));
  CHECK(std::abs(g.gap - 0.02) <= 0.2 * 0.02);

  // ε = 0: eigenvalue 1 is double, the blocks themselves mix fast.
  const auto sp = oracle::spectrum(oracle::ulam_dense(two_cell(), 0.0, 64));
  CHECK(std::abs(sp.values[0]) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(sp.values[1]) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(1.0 - std::abs(sp.values[2]) >= 0.5);

  std::vector<GapEntry> entries;
  for (double eps : {0.04, 0.02, 0.01, 0.005}) entries.push_back(second_gap(build_ulam(two_cell(), eps, 4096, OperatorKind::full)));
  const auto rep = gap_report(entries);
  CHECK(rep.r_squared >= 0.9);
  CHECK(rep.table.front().eps == 0.005);
  CHECK(rep.kappa == doctest::Approx(1.0 / rep.slope));
}

TEST_CASE("decay profiles") {
  const auto op = build_ulam(two_cell(), 0.01, 4096, OperatorKind::hole, 0);
  const auto t = leading_eigen(op);
  const auto uniform = decay_profile(op, ones(op.size()), t, 40);
  CHECK(uniform.theta < 1.0);
  CHECK(uniform.values.back() < uniform.values.front());
  const auto fixed = decay_profile(op, t.right, t, 40);
  for (double v : fixed.values) CHECK(v <= 1e-9);

  // Zero mean on each interval at ε = 0.
  const auto full = build_ulam(two_cell(), 0.0, 256, OperatorKind::full);
  std::vector<double> a(256);
  for (std::size_t k = 0; k < 256; ++k) a[k] = (k % 128) < 64 ? 1.0 : -1.0;
  const auto d = decay_profile(full, a, 1.0, std::vector<double>(256, 0.0), 30);
  CHECK(d.theta <= 0.6);
}

TEST_CASE("projection onto the slow subspace") {
  const auto f = two_cell();
  const auto& dens = f.reference_densities();
  const auto ivs = f.intervals();
  const auto one = project_P(Observable::constant(1.0), dens, ivs);
  CHECK(one.integral({0.0, 1.0}) == doctest::Approx(1.0));
  CHECK(one(0.1) == doctest::Approx(1.0)); // Σ Leb(I_j) φ_j = 1
  const auto a = Observable::step({0.0, 0.5, 1.0}, {1.0, -1.0});
  const auto pa = project_P(a, dens, ivs);
  for (double x : {0.1, 0.4, 0.6, 0.95}) CHECK(pa(x) == doctest::Approx(a(x)));

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (const auto& fam : {two_cell(), three_cell()})
    for (int i = 0; i < 20; ++i) {
      const Observable r({{0.0, 0.3, u(rng), u(rng)}, {0.3, 0.7, u(rng), u(rng)}, {0.7, 1.0, u(rng), u(rng)}});
      const auto p1 = project_P(r, fam.reference_densities(), fam.intervals());
      const auto p2 = project_P(p1, fam.reference_densities(), fam.intervals());
      for (int k = 0; k < 50; ++k) {
        const double x = (k + 0.5) / 50.0;
        CHECK(std::abs(p1(x) - p2(x)) <= 1e-10);
      }
    }
}

TEST_CASE("quasi-stationary trends once eps <= 0.02") {
  const auto f = two_cell();
  const auto& phi1 = f.reference_densities()[0];
  std::vector<double> dev, l1, sup, nu;
  for (double eps : {0.02, 0.01, 0.005}) {
    const auto op = build_ulam(f, eps, 4096, OperatorKind::hole, 0);
    const auto t = leading_eigen(op);
    dev.push_back(std::abs((1 - t.lambda) / eps - 1.0));
    l1.push_back(op.embed(t.right).l1_distance(phi1));
    const auto rows = op.row_sums();
    double s = 0.0;
    for (std::size_t k = 0; k < op.size(); ++k)
      if (rows[k] < 1.0 - 1e-12) s = std::max(s, std::abs(t.right[k] - 2.0));
    sup.push_back(s);
    nu.push_back(std::abs(t.functional(ones(op.size())) - 0.5));
  }
  for (std::size_t i = 1; i < dev.size(); ++i) {
    CHECK(dev[i] < dev[i - 1]);
    CHECK(l1[i] < l1[i - 1]);
    CHECK(sup[i] < sup[i - 1]);
    CHECK(nu[i] < nu[i - 1]);
  }
}

// The full grid including ε = 0.04 is pre-asymptotic for the escape rate,
// the sup over hole cells and ν(1): each rises from 0.04 to 0.02 before
// decreasing. Kept as a record of that behaviour.
TEST_CASE("quasi-stationary trends on the full grid" * doctest::may_fail()) {
  const auto f = two_cell();
  std::vector<double> dev;
  for (double eps : {0.04, 0.02, 0.01, 0.005}) {
    const auto t = leading_eigen(build_ulam(f, eps, 4096, OperatorKind::hole, 0));
    dev.push_back(std::abs((1 - t.lambda) / eps - 1.0));
  }
  for (std::size_t i = 1; i < dev.size(); ++i) CHECK(dev[i] <= dev[i - 1]);
}
