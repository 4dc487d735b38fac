#include <chrono>
#include <ctime>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "metastab/error.hpp"
#include "metastab/experiments.hpp"
#include "metastab/kernels.hpp"

namespace metastab::experiments {
namespace {

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

SuiteResult dispatch(const std::string& suite, const Context& ctx) {
  if (suite == "validate") return run_validate(ctx);
  if (suite == "ulam") return run_ulam(ctx);
  if (suite == "rates") return run_rates(ctx);
  if (suite == "jumps") return run_jumps(ctx);
  if (suite == "diffusion") return run_diffusion(ctx);
  return run_report(ctx);
}

void print(const SuiteResult& r, std::ostream& os) {
  for (const auto& c : r.checks)
    os << fmt::format("[{}] {}: {:.6g} {} {:.6g}\n", c.passed ? "PASS" : "FAIL", c.name, c.value, c.relation,
                      c.tolerance);
  for (const auto& w : r.warnings) os << "warning: " << w << "\n";
}

} // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Metastable piecewise expanding maps: Ulam spectra, jump statistics and diffusion"};
  std::string config_path;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  bool quiet = false;
  app.add_option("--config", config_path, "experiment config (JSON, comments allowed)")->required();
  app.add_option("--out", out, "output directory (default $METASTAB_OUT/<family> or ./metastab_out/<family>)");
  app.add_option("--seed", seed, "override the config seed");
  app.add_option("--threads", threads, "OpenMP threads (0: runtime default)")->check(CLI::NonNegativeNumber);
  app.add_flag("-q,--quiet", quiet, "only print the summary line");
  app.require_subcommand(1, 1);

  const std::vector<std::pair<std::string, std::string>> subs{
      {"validate", "check the family against the standing assumptions"},
      {"ulam", "Ulam spectra: escape rates, spectral gap, densities"},
      {"rates", "reduced Markov chain: rates, generator, D^M"},
      {"jumps", "jump statistics of map trajectories vs the chain"},
      {"diffusion", "diffusion coefficient and occupation histograms"},
      {"report", "aggregate suite results into report.md / report.json"}};
  for (const auto& [name, help] : subs) app.add_subcommand(name, help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::config_error);
  }
  const std::string suite = app.get_subcommands().front()->get_name();
  if (threads > 0) kernels::set_threads(threads);

  try {
    auto config = load_config(config_path);
    if (seed) config.seed = *seed;
    const auto dir = resolve_output_dir(config, out);
    const auto ctx = make_context(config, dir);
    auto manifest = Manifest::load_or_create(dir);
    manifest.set_run_info(config, ctx.family);

    const auto started = utc_now();
    const auto t0 = std::chrono::steady_clock::now();
    const auto result = dispatch(suite, ctx);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    manifest.record_suite(result, wall, started);
    manifest.save();

    if (!quiet) print(result, std::cout);
    std::size_t failed = 0;
    for (const auto& c : result.checks) failed += c.passed ? 0 : 1;
    std::cout << fmt::format("{}: {} checks, {} failed, {:.1f} s, output in {}\n", suite, result.checks.size(), failed,
                             wall, dir.string());
    return static_cast<int>(failed == 0 ? ExitCode::ok : ExitCode::check_failed);
  } catch (const MissingSuiteError& e) {
    std::cerr << "error: " << e.what() << "; run `metastab " << e.suite() << "` first\n";
    return static_cast<int>(ExitCode::config_error);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::config_error);
  } catch (const FamilyDefinitionError& e) {
    std::cerr << "family error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::config_error);
  } catch (const ResolutionError& e) {
    std::cerr << "resolution error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::config_error);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::check_failed);
  }
}

} // namespace metastab::experiments
