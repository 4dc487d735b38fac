#include <doctest.h>

#include <random>

#include "metastab/error.hpp"
#include "metastab/map_model.hpp"
#include "metastab/markov_reduction.hpp"
#include "metastab/observable.hpp"

using namespace metastab;

TEST_CASE("two_cell one-sided evaluation") {
  const auto f = two_cell();
  CHECK(eval_map(f, 0.0, 0.1, Side::left) == doctest::Approx(0.2));
  CHECK(eval_map(f, 0.0, 0.1, Side::right) == doctest::Approx(0.2));
  CHECK(eval_map(f, 0.0, 0.25, Side::left) == doctest::Approx(0.5));
  CHECK(eval_map(f, 0.0, 0.25, Side::right) == doctest::Approx(0.0));
  for (double eps : {0.0, 0.01, 0.05})
    for (auto side : {Side::left, Side::right}) {
      CHECK(eval_map(f, eps, 0.5, side) == 0.5);
      CHECK(eval_map(three_cell(), eps, 1.0 / 3, side) == doctest::Approx(1.0 / 3));
    }
  CHECK(eval_map(f, 0.0, 0.0, Side::right) == 0.0);
  CHECK(eval_map(f, 0.0, 1.0, Side::left) == 1.0);
}

TEST_CASE("epsilon outside the validity range is a configuration error") {
  CHECK_THROWS_AS(eval_map(two_cell(), 0.2, 0.1, Side::right), ConfigError);
  CHECK_THROWS_AS(eval_map(two_cell(), -0.01, 0.1, Side::right), ConfigError);
  CHECK_THROWS_AS(three_cell().check_eps(0.06), ConfigError);
}

TEST_CASE("two_cell holes at eps = 0.01") {
  const auto f = two_cell();
  const auto h = compute_holes(f, 0.01, f.reference_densities());
  REQUIRE(h.holes(0, 1).size() == 1);
  REQUIRE(h.holes(1, 0).size() == 1);
  CHECK(h.holes(0, 1)[0].lo == doctest::Approx(0.245).epsilon(1e-12));
  CHECK(h.holes(0, 1)[0].hi == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(h.holes(1, 0)[0].lo == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(h.holes(1, 0)[0].hi == doctest::Approx(0.755).epsilon(1e-12));
  CHECK(h.measure(0, 1) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(h.measure(1, 0) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(h.holes(0, 0).empty());
}

TEST_CASE("holes shrink to the infinitesimal holes") {
  const auto f = two_cell();
  const auto pts = infinitesimal_holes(f);
  REQUIRE(pts.size() == 2);
  CHECK(pts[0] == doctest::Approx(0.25));
  CHECK(pts[1] == doctest::Approx(0.75));
  const auto h = compute_holes(f, 1e-6, f.reference_densities());
  CHECK(std::abs(h.holes(0, 1)[0].lo - 0.25) < 1e-6);
  CHECK(std::abs(h.holes(1, 0)[0].hi - 0.75) < 1e-6);

  const auto t = three_cell();
  const auto hz = compute_holes(t, 0.0, t.reference_densities());
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(hz.holes(i, j).empty());
}

TEST_CASE("hole points land in their destination interval") {
  for (const auto& f : {two_cell(), three_cell()}) {
    for (double eps : {0.04, 0.02, 0.01, 0.005}) {
      const auto h = compute_holes(f, eps, f.reference_densities());
      for (int i = 0; i < f.m(); ++i)
        for (int j = 0; j < f.m(); ++j)
          for (const auto& iv : h.holes(i, j))
            for (int k = 0; k <= 100; ++k) {
              const double x = iv.lo + (iv.hi - iv.lo) * (k + 0.5) / 101.0;
              CHECK(f.state_of(x) == i);
              CHECK(f.state_of(eval_map(f, eps, x, Side::right)) == j);
            }
    }
  }
}

TEST_CASE("hole measure over eps is constant for the built-in families") {
  for (const auto& f : {two_cell(), three_cell()}) {
    const auto ref = compute_holes(f, 0.04, f.reference_densities());
    for (double eps : {0.02, 0.01, 0.005}) {
      const auto h = compute_holes(f, eps, f.reference_densities());
      for (int i = 0; i < f.m(); ++i)
        for (int j = 0; j < f.m(); ++j)
          CHECK(std::abs(h.measure(i, j) / eps - ref.measure(i, j) / 0.04) <= 1e-10);
    }
  }
  // THREE_CELL: μ_2(H_21) = μ_2(H_23) = ε, no direct 1 <-> 3 holes.
  const auto t = three_cell();
  const auto h = compute_holes(t, 0.01, t.reference_densities());
  CHECK(h.measure(1, 0) == doctest::Approx(0.01).epsilon(1e-10));
  CHECK(h.measure(1, 2) == doctest::Approx(0.01).epsilon(1e-10));
  CHECK(h.measure(0, 2) == 0.0);
  CHECK(h.measure(2, 0) == 0.0);
}

TEST_CASE("intervals are invariant at eps = 0") {
  std::mt19937_64 rng(7);
  for (const auto& f : {two_cell(), three_cell()}) {
    const auto ivs = f.intervals();
    for (int j = 0; j < f.m(); ++j) {
      std::uniform_real_distribution<double> u(ivs[static_cast<std::size_t>(j)].lo, ivs[static_cast<std::size_t>(j)].hi);
      int bad = 0;
      for (int k = 0; k < 10000; ++k) bad += f.state_of(eval_map(f, 0.0, u(rng), Side::right)) != j;
      CHECK(bad == 0);
    }
  }
}

TEST_CASE("validation of the built-in families") {
  const std::vector<double> grid{0.04, 0.02, 0.01, 0.005};
  const auto r = validate_assumptions(two_cell(), grid);
  CHECK(r.passed());
  for (const auto* id : {"II", "III", "V", "VI", "expansion"}) CHECK(r.check(id).status == CheckStatus::pass);
  CHECK(r.check("I").status == CheckStatus::asserted);
  const auto t = validate_assumptions(three_cell(), grid);
  CHECK(t.passed());
  CHECK(t.check("VI").status == CheckStatus::pass);
}

TEST_CASE("a family without holes fails irreducibility") {
  // TWO_CELL with the ε shifts removed: the intervals never communicate.
  const auto f = affine_table("closed", {0.5},
                              {{0.0, 0, 0.25, 0, 2, 0, 0, 0},
                               {0.25, 0, 0.75, 0, 2, 0, -0.5, 0},
                               {0.75, 0, 1.0, 0, 2, 0, -1, 0}},
                              {0.0, 0.1});
  const auto r = validate_assumptions(f, {0.04, 0.02, 0.01});
  CHECK(r.check("VI").status == CheckStatus::fail);
  CHECK_FALSE(r.passed());
}

TEST_CASE("family documents round-trip") {
  for (const auto& f : {two_cell(), three_cell()}) {
    const auto g = family_from_json(f.to_json());
    CHECK(g.name() == f.name());
    CHECK(family_content_hash(g) == family_content_hash(f));
    for (double x : {0.1, 0.3, 0.6, 0.9}) CHECK(eval_map(g, 0.01, x, Side::right) == eval_map(f, 0.01, x, Side::right));
  }
  CHECK(family_from_json({{"name", "two_cell"}}).name() == "two_cell");
  CHECK_THROWS(family_from_json({{"name", "four_cell"}}));
}

TEST_CASE("git blob hash matches git") {
  // printf 'hello\n' | git hash-object --stdin
  CHECK(git_blob_hash("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
  CHECK(git_blob_hash("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
}

TEST_CASE("BV norm examples") {
  CHECK(bv_norm(Observable::constant(-3.5)) == doctest::Approx(3.5));
  const auto a = Observable::step({0.0, 0.5, 1.0}, {1.0, -1.0});
  CHECK(a.total_variation() == doctest::Approx(2.0));
  CHECK(a.sup_norm() == doctest::Approx(1.0));
  CHECK(bv_norm(a) == doctest::Approx(3.0));
  CHECK(bv_norm(Observable::identity()) == doctest::Approx(2.0));
}

TEST_CASE("BV norm is subadditive") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::uniform_int_distribution<int> pieces(1, 6);
  auto random_obs = [&] {
    const int k = pieces(rng);
    std::vector<double> edges{0.0};
    for (int i = 1; i < k; ++i) edges.push_back(static_cast<double>(i) / k + 0.01 * u(rng));
    edges.push_back(1.0);
    std::vector<Observable::Piece> ps;
    for (int i = 0; i < k; ++i) ps.push_back({edges[static_cast<std::size_t>(i)], edges[static_cast<std::size_t>(i) + 1], u(rng), u(rng)});
    return Observable(ps);
  };
  for (int i = 0; i < 100; ++i) {
    const auto a = random_obs(), b = random_obs();
    CHECK(bv_norm(a + b) <= bv_norm(a) + bv_norm(b) + 1e-12);
  }
}
