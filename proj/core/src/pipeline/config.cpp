#include "align/pipeline/config.hpp"

#include <charconv>
#include <sstream>

#include "align/error.hpp"
#include "align/jsonl.hpp"
#include "align/pipeline/tools.hpp"
#include "align/text.hpp"

namespace align::pipeline {

namespace {

std::size_t parse_size(std::string_view v, const std::string& where) {
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw InvalidArgument(where + ": expected a number");
  return out;
}

bool parse_bool(std::string_view v, const std::string& where) {
  const auto l = text::ascii_lower(v);
  if (l == "true" || l == "1" || l == "yes" || l == "on") return true;
  if (l == "false" || l == "0" || l == "no" || l == "off") return false;
  throw InvalidArgument(where + ": expected a boolean");
}

std::filesystem::path resolve(std::string_view v, const std::filesystem::path& base) {
  if (v.empty()) return {};
  std::filesystem::path p{std::string(v)};
  if (p.is_relative() && !base.empty()) p = base / p;
  return p.lexically_normal();
}

}  // namespace

PipelineConfig parse_config(std::string_view content, const std::filesystem::path& base_dir) {
  PipelineConfig c;
  bool versioned = false;
  std::size_t lineno = 0;
  std::istringstream in{std::string(content)};
  for (std::string raw; std::getline(in, raw);) {
    ++lineno;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = text::trim(line);
    if (line.empty()) continue;
    const std::string where = "config line " + std::to_string(lineno);
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw InvalidArgument(where + ": expected key = value");
    const std::string key(text::trim(line.substr(0, eq)));
    const auto value = text::trim(line.substr(eq + 1));

    if (key == "config_version") {
      c.config_version = static_cast<int>(parse_size(value, where));
      if (c.config_version != kConfigVersion)
        throw InvalidArgument(where + ": unsupported config_version " + std::string(value));
      versioned = true;
    } else if (key == "index_path") {
      c.index_path = resolve(value, base_dir);
    } else if (key == "backend") {
      if (value != "mock" && value != "http") throw InvalidArgument(where + ": backend must be mock or http");
      c.backend = std::string(value);
    } else if (key == "backend.url") {
      c.backend_url = std::string(value);
    } else if (key == "search_enabled") {
      c.search_enabled = parse_bool(value, where);
    } else if (key == "external.fixture_path") {
      c.external_fixture_path = resolve(value, base_dir);
    } else if (key == "external.url") {
      c.external_url = std::string(value);
    } else if (key == "rules_path") {
      c.rules_path = resolve(value, base_dir);
    } else if (key == "templates_path") {
      c.templates_path = resolve(value, base_dir);
    } else if (key == "fallback_template_id") {
      c.fallback_template_id = std::string(value);
    } else if (key == "corrector_path") {
      c.corrector_path = resolve(value, base_dir);
    } else if (key == "memory_budget") {
      c.memory_budget = parse_size(value, where);
    } else if (key == "top_k") {
      c.top_k = parse_size(value, where);
      if (c.top_k == 0) throw InvalidArgument(where + ": top_k must be positive");
    } else if (key == "snippet_chars") {
      c.snippet_chars = parse_size(value, where);
    } else if (key.rfind("tool.", 0) == 0 && key.size() > 5) {
      if (!is_known_tool(value)) throw InvalidArgument(where + ": unknown tool " + std::string(value));
      c.tool_verbs[key.substr(5)] = std::string(value);
    } else {
      throw InvalidArgument(where + ": unknown key " + key);
    }
  }
  if (!versioned) throw InvalidArgument("config_version missing");
  if (c.backend == "http" && c.backend_url.empty()) throw InvalidArgument("backend.url required for http backend");
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  return parse_config(jsonl::read_text(path), path.parent_path());
}

std::string dump_config(const PipelineConfig& c) {
  std::ostringstream out;
  out << "config_version = " << c.config_version << "\n";
  out << "index_path = " << c.index_path.string() << "\n";
  out << "backend = " << c.backend << "\n";
  if (!c.backend_url.empty()) out << "backend.url = " << c.backend_url << "\n";
  out << "search_enabled = " << (c.search_enabled ? "true" : "false") << "\n";
  if (!c.external_fixture_path.empty()) out << "external.fixture_path = " << c.external_fixture_path.string() << "\n";
  if (!c.external_url.empty()) out << "external.url = " << c.external_url << "\n";
  out << "rules_path = " << c.rules_path.string() << "\n";
  out << "templates_path = " << c.templates_path.string() << "\n";
  out << "fallback_template_id = " << c.fallback_template_id << "\n";
  if (!c.corrector_path.empty()) out << "corrector_path = " << c.corrector_path.string() << "\n";
  out << "memory_budget = " << c.memory_budget << "\n";
  out << "top_k = " << c.top_k << "\n";
  out << "snippet_chars = " << c.snippet_chars << "\n";
  for (const auto& [verb, tool] : c.tool_verbs) out << "tool." << verb << " = " << tool << "\n";
  return out.str();
}

}  // namespace align::pipeline
