#include <fmt/format.h>

#include "metastab/experiments.hpp"

namespace metastab::experiments {
namespace {

std::string cell(const nlohmann::json& c) {
  const double v = c.value("value", 0.0);
  return fmt::format("{:.6g}", v);
}

// Pipes would break the markdown table.
std::string escape_md(std::string s) {
  for (std::size_t i = 0; (i = s.find('|', i)) != std::string::npos; i += 2) s.replace(i, 1, "\\|");
  return s;
}

} // namespace

SuiteResult run_report(const Context& ctx) {
  SuiteResult res;
  res.suite = "report";
  const auto manifest = Manifest::load_or_create(ctx.out_dir);
  const auto hash = git_blob_hash(ctx.config.to_json().dump());

  nlohmann::json doc{{"family", ctx.family.name()}, {"seed", ctx.config.seed}, {"config_hash", hash}};
  nlohmann::json suites = nlohmann::json::object();
  std::string md = fmt::format("# metastab report: {}\n\nseed {}, config {}\n\n", ctx.family.name(), ctx.config.seed,
                               hash.substr(0, 12));
  md += "| suite | check | value | relation | tolerance | status |\n|---|---|---|---|---|---|\n";
  std::string notes;

  for (const auto& name : ctx.config.suites) {
    const auto s = manifest.suite(name);
    if (!s || s->value("config_hash", "") != hash) throw MissingSuiteError(name);
    for (const auto& f : (*s)["files"]) {
      const auto path = ctx.out_dir / f["path"].get<std::string>();
      if (!fs::exists(path) || git_blob_hash(read_text(path)) != f["hash"].get<std::string>())
        throw MissingSuiteError(name);
    }
    suites[name] = *s;
    for (const auto& c : (*s)["checks"]) {
      Check k;
      k.name = name + ": " + c["name"].get<std::string>();
      k.value = c["value"].get<double>();
      k.tolerance = c["tolerance"].get<double>();
      k.relation = c["relation"].get<std::string>();
      k.passed = c["passed"].get<bool>();
      k.detail = c["detail"].get<std::string>();
      res.checks.push_back(k);
      md += fmt::format("| {} | {} | {} | {} | {:.6g} | {} |\n", name, escape_md(c["name"].get<std::string>()), cell(c),
                        c["relation"].get<std::string>(), k.tolerance, k.passed ? "PASS" : "**FAIL**");
      if (!k.detail.empty()) notes += fmt::format("- {} / {}: {}\n", name, c["name"].get<std::string>(), k.detail);
    }
    for (const auto& w : (*s)["warnings"]) {
      res.warnings.push_back(name + ": " + w.get<std::string>());
    }
  }
  if (!notes.empty()) md += "\n## Details\n\n" + notes;
  if (!res.warnings.empty()) {
    md += "\n## Warnings\n\n";
    for (const auto& w : res.warnings) md += "- " + w + "\n";
  }
  std::size_t failed = 0;
  for (const auto& c : res.checks) failed += c.passed ? 0 : 1;
  md += fmt::format("\n{} checks, {} failed\n", res.checks.size(), failed);

  doc["suites"] = suites;
  doc["failed"] = failed;
  doc["passed"] = failed == 0;
  write_text(ctx.out_dir / "report.md", md);
  write_text(ctx.out_dir / "report.json", doc.dump(2) + "\n");
  res.files = {"report.md", "report.json"};
  return res;
}

} // namespace metastab::experiments
