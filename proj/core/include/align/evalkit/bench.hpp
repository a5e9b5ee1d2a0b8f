#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "align/evalkit/judges.hpp"

namespace align::evalkit {

inline constexpr int kReportSchemaVersion = 1;

/// System under test: question in, response out. Throws on failure.
using System = std::function<std::string(const EvalItem&)>;

struct RawResult {
  std::string item_id;
  Module module = Module::hk_sensitive;
  std::string response;
  std::optional<Verdict> verdict;
  std::optional<int> tier;
  std::string judge_id;
  std::optional<std::string> error;

  bool operator==(const RawResult&) const = default;
};

void to_json(nlohmann::json& j, const RawResult& r);
void from_json(const nlohmann::json& j, RawResult& r);

struct BenchOptions {
  std::string system_id = "system";
  std::string timestamp;
  RefusalDetector refusals;
  LanguageDetector language;
};

/// Generates and judges every item; failures are recorded on the result
/// instead of thrown. Results come back ordered by item id.
std::vector<RawResult> generate_results(std::span<const EvalItem> items, const System& system, const Judge& judge);

/// Pure reduction over results (ordered by item id). `overrides` replaces
/// the judge verdict per item id and is counted as label coverage.
nlohmann::json assemble_report(std::span<const EvalItem> items, std::span<const RawResult> results,
                               const BenchOptions& options, const std::string& judge_id,
                               const std::map<std::string, Verdict>& overrides = {});

struct BenchRun {
  nlohmann::json report;
  std::vector<RawResult> results;
};

BenchRun run_bench(std::span<const EvalItem> items, const System& system, const Judge& judge,
                   const BenchOptions& options = {});

void save_results(const std::filesystem::path& path, std::span<const RawResult> results);
std::vector<RawResult> load_results(const std::filesystem::path& path);

/// The per-module headline score used for the report's micro average.
std::optional<double> headline_score(const nlohmann::json& module_report, Module module);

}  // namespace align::evalkit
