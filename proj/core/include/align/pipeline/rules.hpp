#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace align::pipeline {

enum class Action { allow, refuse, flag };

std::string_view to_string(Action a);
Action action_from_string(std::string_view s);

/// Patterns are literal phrases (case-insensitive substring match) or, with a
/// "re:" prefix, ECMAScript regular expressions that must start with '^'.
struct PolicyRule {
  std::string id;
  std::string category;
  std::vector<std::string> patterns;
  Action action = Action::allow;
  std::optional<std::string> template_id;
};

void to_json(nlohmann::json& j, const PolicyRule& r);
void from_json(const nlohmann::json& j, PolicyRule& r);

struct ModerationVerdict {
  std::string stage;  // input | output | output-recheck
  Action decision = Action::allow;
  std::vector<std::string> matched_rule_ids;
  std::optional<std::string> template_id;

  bool operator==(const ModerationVerdict&) const = default;
};

void to_json(nlohmann::json& j, const ModerationVerdict& v);
void from_json(const nlohmann::json& j, ModerationVerdict& v);

/// Validated, severity-ordered rules plus the refusal templates they use.
class RuleSet {
public:
  RuleSet() = default;
  /// Throws InvalidArgument on duplicate ids, unanchored or malformed
  /// regexes, empty pattern lists, and refuse rules whose template is missing.
  RuleSet(std::vector<PolicyRule> rules, std::map<std::string, std::string> templates,
          std::string fallback_template_id = "default");

  static RuleSet load(const std::filesystem::path& rules_path, const std::filesystem::path& templates_path,
                      std::string fallback_template_id = "default");

  /// Sorted refuse > flag > allow, then by id.
  const std::vector<PolicyRule>& rules() const noexcept { return rules_; }
  const std::map<std::string, std::string>& templates() const noexcept { return templates_; }

  bool matches(std::size_t rule_index, std::string_view text) const;

  /// First matching rule decides; no match -> allow with no rule ids.
  ModerationVerdict moderate(std::string_view text, std::string stage) const;

  /// True when any refuse or flag rule matches.
  bool is_sensitive(std::string_view text) const;

  const std::string& template_text(const std::string& template_id) const;
  /// Template used when a flagged answer cannot be repaired.
  const std::string& fallback_template_id() const noexcept { return fallback_; }
  bool is_template_text(std::string_view text) const;

private:
  struct Compiled {
    std::vector<std::string> literals;  // lowercased
    std::vector<std::regex> regexes;
  };
  std::vector<PolicyRule> rules_;
  std::vector<Compiled> compiled_;
  std::map<std::string, std::string> templates_;
  std::string fallback_;
};

ModerationVerdict moderate_input(std::string_view query, const RuleSet& rules);

}  // namespace align::pipeline
