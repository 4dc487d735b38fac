#include <doctest.h>

#include <fstream>

#include "metastab/error.hpp"
#include "metastab/experiments.hpp"

using namespace metastab;
using namespace metastab::experiments;
using json = nlohmann::json;

namespace {

json small_config() {
  return json::parse(R"({
    "family": "two_cell",
    "eps_grid": [0.08, 0.06, 0.04],
    "seed": 12,
    "ulam": {"n": 256, "decay_steps": 20},
    "jumps": {"n_traj": 2000, "horizon_S": 10},
    "double_jump": {"eps": 0.04, "n_traj": 2000, "sigmas": [0.4, 0.2]},
    "diffusion": {"eps": 0.04, "S": 5, "n_traj": 200, "burn_in": 200,
                  "gk_orbits": 4, "gk_orbit_length": 100000, "pilot_steps": 100000},
    "density": {"cells": 256, "total_steps": 200000, "chunks": 8}
  })");
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("metastab_test_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "metastab");
  args.push_back("-q");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

fs::path write_config(const fs::path& dir, const json& j) {
  const auto p = dir / "config.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

} // namespace

TEST_CASE("config parsing") {
  const auto c = parse_config(small_config());
  CHECK(c.ulam.n == 256);
  CHECK(c.jumps.eps_grid == c.eps_grid);
  CHECK(c.tolerances.ks == 0.02);
  CHECK(c.suites == all_suites());
  CHECK(parse_config(c.to_json()).to_json() == c.to_json());

  auto bad = small_config();
  bad["ulam"]["nn"] = 3;
  CHECK_THROWS_WITH_AS(parse_config(bad), doctest::Contains("ulam.nn"), ConfigError);
  bad = small_config();
  bad["eps_grid"] = {0.04, 0.06, 0.08};
  CHECK_THROWS_AS(parse_config(bad), ConfigError);
  bad = small_config();
  bad["eps_grid"] = {0.08, 0.04, 0.0};
  CHECK_THROWS_AS(parse_config(bad), ConfigError);
  bad = small_config();
  bad["jumps"]["n_traj"] = "many";
  CHECK_THROWS_WITH_AS(parse_config(bad), doctest::Contains("jumps.n_traj"), ConfigError);
  bad = small_config();
  bad["suites"] = {"ulam", "plots"};
  CHECK_THROWS_AS(parse_config(bad), ConfigError);
}

TEST_CASE("context preconditions") {
  TempDir t("ctx");
  auto j = small_config();
  j["ulam"]["n"] = 250;
  CHECK_THROWS_AS(make_context(parse_config(j), t.path), ConfigError);
  j = small_config();
  j["family"] = "three_cell";
  j["ulam"]["n"] = 256;
  CHECK_THROWS_AS(make_context(parse_config(j), t.path), ConfigError);
  j = small_config();
  j["jumps"]["start_state"] = 3;
  CHECK_THROWS_AS(make_context(parse_config(j), t.path), ConfigError);
}

TEST_CASE("output directory resolution") {
  auto c = parse_config(small_config());
  CHECK(resolve_output_dir(c, std::string("x/y")) == fs::path("x/y"));
  c.output_dir = "z";
  CHECK(resolve_output_dir(c, std::nullopt) == fs::path("z"));
  c.output_dir.clear();
  ::setenv("METASTAB_OUT", "/tmp/root_for_test", 1);
  CHECK(resolve_output_dir(c, std::nullopt) == fs::path("/tmp/root_for_test/two_cell"));
  ::unsetenv("METASTAB_OUT");
  CHECK(resolve_output_dir(c, std::nullopt) == fs::path("metastab_out/two_cell"));
}

TEST_CASE("command line runs") {
  TempDir t("cli");
  const auto cfg = write_config(t.path, small_config()).string();
  const auto out = (t.path / "out").string();

  CHECK(cli({"--config", cfg, "--out", out, "report"}) == 2);
  CHECK(cli({"--config", cfg, "--out", out, "validate"}) == 0);
  const auto validation = json::parse(read_text(fs::path(out) / "validation.json"));
  for (const auto& c : validation["checks"])
    if (c["id"] != "I") CHECK(c["status"] == "pass");

  CHECK(cli({"--config", cfg, "--out", out, "rates"}) == 0);
  const auto rates = json::parse(read_text(fs::path(out) / "rates.json"));
  CHECK(rates["beta"][0][1].get<double>() == doctest::Approx(1.0));
  CHECK(rates["beta"][1][0].get<double>() == doctest::Approx(1.0));
  CHECK(rates["D_M"]["solve"].get<double>() == doctest::Approx(0.5).epsilon(1e-12));

  const int ulam = cli({"--config", cfg, "--out", out, "ulam"});
  CHECK((ulam == 0 || ulam == 1));
  const auto escape = read_text(fs::path(out) / "ulam_escape.csv");
  CHECK(cli({"--config", cfg, "--out", out, "--threads", "2", "ulam"}) == ulam);
  CHECK(read_text(fs::path(out) / "ulam_escape.csv") == escape);

  // report needs every configured suite.
  CHECK(cli({"--config", cfg, "--out", out, "report"}) == 2);
  for (const auto* s : {"jumps", "diffusion"}) {
    const int rc = cli({"--config", cfg, "--out", out, s});
    CHECK((rc == 0 || rc == 1));
  }
  const auto records = read_text(fs::path(out) / "jump_records.csv");
  const auto hist = read_text(fs::path(out) / "density_histogram.csv");
  CHECK(cli({"--config", cfg, "--out", out, "jumps"}) >= 0);
  CHECK(cli({"--config", cfg, "--out", out, "diffusion"}) >= 0);
  CHECK(read_text(fs::path(out) / "jump_records.csv") == records);
  CHECK(read_text(fs::path(out) / "density_histogram.csv") == hist);

  const int rep = cli({"--config", cfg, "--out", out, "report"});
  CHECK((rep == 0 || rep == 1));
  CHECK(fs::exists(fs::path(out) / "report.md"));
  const auto report = json::parse(read_text(fs::path(out) / "report.json"));
  CHECK(report["passed"].get<bool>() == (rep == 0));

  // A different seed is a different configuration: old results do not count.
  CHECK(cli({"--config", cfg, "--out", out, "--seed", "13", "report"}) == 2);

  const auto manifest = json::parse(read_text(fs::path(out) / "manifest.json"));
  CHECK(manifest["family"]["content_hash"].get<std::string>().size() == 40);
  CHECK(manifest["suites"]["ulam"]["files"].size() == 5);
}

TEST_CASE("command line errors") {
  TempDir t("cli_err");
  auto j = small_config();
  j["unknown"] = 1;
  const auto cfg = write_config(t.path, j).string();
  CHECK(cli({"--config", cfg, "--out", (t.path / "o").string(), "validate"}) == 2);
  CHECK(cli({"--config", (t.path / "missing.json").string(), "validate"}) == 2);
  CHECK(cli({"--config", cfg, "plot"}) == 2);
}
