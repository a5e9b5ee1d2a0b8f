#include "align/pipeline/rules.hpp"

#include <algorithm>
#include <set>

#include "align/error.hpp"
#include "align/jsonl.hpp"
#include "align/text.hpp"

namespace align::pipeline {

namespace {

int severity(Action a) {
  switch (a) {
    case Action::refuse:
      return 0;
    case Action::flag:
      return 1;
    case Action::allow:
      return 2;
  }
  return 3;
}

std::string_view optional_tag(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return {};
  return j[key].get_ref<const std::string&>();
}

}  // namespace

std::string_view to_string(Action a) {
  switch (a) {
    case Action::allow:
      return "allow";
    case Action::refuse:
      return "refuse";
    case Action::flag:
      return "flag";
  }
  return "?";
}

Action action_from_string(std::string_view s) {
  if (s == "allow") return Action::allow;
  if (s == "refuse") return Action::refuse;
  if (s == "flag") return Action::flag;
  throw InvalidArgument("unknown action: " + std::string(s));
}

void to_json(nlohmann::json& j, const PolicyRule& r) {
  j = {{"id", r.id}, {"category", r.category}, {"patterns", r.patterns}, {"action", to_string(r.action)}};
  if (r.template_id) j["template_id"] = *r.template_id;
}

void from_json(const nlohmann::json& j, PolicyRule& r) {
  r.id = j.at("id").get<std::string>();
  r.category = j.value("category", std::string());
  r.patterns = j.at("patterns").get<std::vector<std::string>>();
  r.action = action_from_string(j.at("action").get<std::string>());
  r.template_id.reset();
  if (auto t = optional_tag(j, "template_id"); !t.empty()) r.template_id = std::string(t);
}

void to_json(nlohmann::json& j, const ModerationVerdict& v) {
  j = {{"stage", v.stage}, {"decision", to_string(v.decision)}, {"matched_rule_ids", v.matched_rule_ids}};
  j["template_id"] = v.template_id ? nlohmann::json(*v.template_id) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, ModerationVerdict& v) {
  v.stage = j.value("stage", std::string());
  v.decision = action_from_string(j.at("decision").get<std::string>());
  v.matched_rule_ids = j.value("matched_rule_ids", std::vector<std::string>{});
  v.template_id.reset();
  if (auto t = optional_tag(j, "template_id"); !t.empty()) v.template_id = std::string(t);
}

RuleSet::RuleSet(std::vector<PolicyRule> rules, std::map<std::string, std::string> templates,
                 std::string fallback_template_id)
    : rules_(std::move(rules)), templates_(std::move(templates)), fallback_(std::move(fallback_template_id)) {
  std::set<std::string> ids;
  bool needs_fallback = false;
  for (const auto& r : rules_) {
    if (r.id.empty()) throw InvalidArgument("rule without id");
    if (!ids.insert(r.id).second) throw InvalidArgument("duplicate rule id: " + r.id);
    if (r.patterns.empty()) throw InvalidArgument("rule " + r.id + " has no patterns");
    if (r.action == Action::refuse) {
      if (!r.template_id) throw InvalidArgument("refuse rule " + r.id + " has no template_id");
    }
    if (r.template_id && !templates_.count(*r.template_id))
      throw InvalidArgument("rule " + r.id + " references unknown template: " + *r.template_id);
    if (r.action == Action::flag && !r.template_id) needs_fallback = true;
  }
  if (needs_fallback && !templates_.count(fallback_))
    throw InvalidArgument("fallback template missing: " + fallback_);

  std::stable_sort(rules_.begin(), rules_.end(), [](const PolicyRule& a, const PolicyRule& b) {
    if (severity(a.action) != severity(b.action)) return severity(a.action) < severity(b.action);
    return a.id < b.id;
  });

  for (const auto& r : rules_) {
    Compiled c;
    for (const auto& p : r.patterns) {
      if (p.rfind("re:", 0) == 0) {
        const auto expr = p.substr(3);
        if (expr.empty() || expr[0] != '^')
          throw InvalidArgument("rule " + r.id + ": regex must be anchored with '^': " + expr);
        try {
          c.regexes.emplace_back(expr, std::regex::ECMAScript | std::regex::icase);
        } catch (const std::regex_error& e) {
          throw InvalidArgument("rule " + r.id + ": bad regex " + expr + ": " + e.what());
        }
      } else {
        if (p.empty()) throw InvalidArgument("rule " + r.id + " has an empty pattern");
        c.literals.push_back(text::ascii_lower(p));
      }
    }
    compiled_.push_back(std::move(c));
  }
}

RuleSet RuleSet::load(const std::filesystem::path& rules_path, const std::filesystem::path& templates_path,
                      std::string fallback_template_id) {
  std::vector<PolicyRule> rules;
  for (const auto& row : jsonl::read_file(rules_path)) rules.push_back(row.get<PolicyRule>());
  const auto tj = jsonl::read_json(templates_path);
  if (!tj.is_object()) throw ParseError(templates_path.string() + ": templates must be a JSON object");
  return RuleSet(std::move(rules), tj.get<std::map<std::string, std::string>>(), std::move(fallback_template_id));
}

bool RuleSet::matches(std::size_t rule_index, std::string_view input) const {
  const auto& c = compiled_.at(rule_index);
  if (!c.literals.empty()) {
    const auto lowered = text::ascii_lower(input);
    for (const auto& lit : c.literals)
      if (lowered.find(lit) != std::string::npos) return true;
  }
  if (!c.regexes.empty()) {
    const std::string s(text::trim(input));
    for (const auto& re : c.regexes)
      if (std::regex_search(s, re)) return true;
  }
  return false;
}

ModerationVerdict RuleSet::moderate(std::string_view input, std::string stage) const {
  ModerationVerdict v;
  v.stage = std::move(stage);
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    if (!matches(i, input)) continue;
    v.decision = rules_[i].action;
    v.matched_rule_ids.push_back(rules_[i].id);
    if (rules_[i].action == Action::refuse)
      v.template_id = rules_[i].template_id;
    else if (rules_[i].action == Action::flag)
      v.template_id = rules_[i].template_id.value_or(fallback_);
    break;
  }
  return v;
}

bool RuleSet::is_sensitive(std::string_view input) const {
  for (std::size_t i = 0; i < rules_.size(); ++i)
    if (rules_[i].action != Action::allow && matches(i, input)) return true;
  return false;
}

const std::string& RuleSet::template_text(const std::string& template_id) const {
  auto it = templates_.find(template_id);
  if (it == templates_.end()) throw NotFound("unknown template: " + template_id);
  return it->second;
}

bool RuleSet::is_template_text(std::string_view s) const {
  return std::any_of(templates_.begin(), templates_.end(), [&](const auto& kv) { return kv.second == s; });
}

ModerationVerdict moderate_input(std::string_view query, const RuleSet& rules) {
  return rules.moderate(query, "input");
}

}  // namespace align::pipeline
