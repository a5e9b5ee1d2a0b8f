#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace align::pipeline {

inline constexpr int kConfigVersion = 1;

/// Key-value pipeline configuration. Relative paths are resolved against the
/// directory of the file they were read from.
struct PipelineConfig {
  int config_version = kConfigVersion;
  std::filesystem::path index_path;
  std::string backend = "mock";  // mock | http
  std::string backend_url;
  bool search_enabled = false;
  std::filesystem::path external_fixture_path;  // used when search is enabled
  std::string external_url;                     // takes precedence over the fixture
  std::filesystem::path rules_path;
  std::filesystem::path templates_path;
  std::string fallback_template_id = "default";
  std::filesystem::path corrector_path;  // optional w2s correction model
  std::size_t memory_budget = 8;
  std::size_t top_k = 3;
  std::size_t snippet_chars = 200;
  std::map<std::string, std::string> tool_verbs;  // tool.<verb> = <tool>, added to the default verbs
};

/// Lines "key = value"; '#' starts a comment. Unknown keys, a missing or
/// unsupported config_version, bad numbers and unknown tools throw
/// InvalidArgument naming the line.
PipelineConfig parse_config(std::string_view content, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);

std::string dump_config(const PipelineConfig& config);

}  // namespace align::pipeline
