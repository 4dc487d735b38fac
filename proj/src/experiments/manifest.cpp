#include "metastab/error.hpp"
#include "metastab/experiments.hpp"

namespace metastab::experiments {

nlohmann::json Check::to_json() const {
  return {{"name", name},   {"value", value},   {"tolerance", tolerance},
          {"relation", relation}, {"passed", passed}, {"detail", detail}};
}

bool SuiteResult::passed() const {
  for (const auto& c : checks)
    if (!c.passed) return false;
  return true;
}

Manifest Manifest::load_or_create(const fs::path& out_dir) {
  Manifest m;
  m.dir_ = out_dir;
  m.path_ = out_dir / "manifest.json";
  if (fs::exists(m.path_)) {
    try {
      m.doc_ = nlohmann::json::parse(read_text(m.path_));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("manifest '" + m.path_.string() + "' is corrupt: " + e.what());
    }
  }
  if (!m.doc_.is_object()) m.doc_ = nlohmann::json::object();
  if (!m.doc_.contains("suites")) m.doc_["suites"] = nlohmann::json::object();
  m.doc_["format"] = 1;
  return m;
}

void Manifest::set_run_info(const ExperimentConfig& config, const MapFamily& family) {
  const auto cfg = config.to_json();
  doc_["config"] = cfg;
  doc_["config_hash"] = git_blob_hash(cfg.dump());
  doc_["seed"] = config.seed;
  doc_["family"] = {{"name", family.name()}, {"content_hash", family_content_hash(family)}};
}

void Manifest::record_suite(const SuiteResult& result, double wall_seconds, const std::string& started_utc) {
  nlohmann::json files = nlohmann::json::array();
  for (const auto& f : result.files) files.push_back({{"path", f}, {"hash", git_blob_hash(read_text(dir_ / f))}});
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : result.checks) checks.push_back(c.to_json());
  doc_["suites"][result.suite] = {{"status", result.passed() ? "pass" : "fail"},
                                  {"config_hash", doc_.value("config_hash", "")},
                                  {"started_utc", started_utc},
                                  {"wall_seconds", wall_seconds},
                                  {"files", files},
                                  {"checks", checks},
                                  {"warnings", result.warnings}};
}

std::optional<nlohmann::json> Manifest::suite(const std::string& name) const {
  if (!doc_.contains("suites") || !doc_["suites"].contains(name)) return std::nullopt;
  return doc_["suites"][name];
}

void Manifest::save() const { write_text(path_, doc_.dump(2) + "\n"); }

} // namespace metastab::experiments
