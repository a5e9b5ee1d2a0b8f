#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "align/types.hpp"

namespace align::evalkit {

enum class Module {
  hk_sensitive,
  instruction_attack,
  typical_safety,
  language_following,
  sensitive_political,
  mc,
  aj,
};

std::string_view to_string(Module m);
Module module_from_string(std::string_view s);

struct EvalItem {
  std::string id;
  Module module = Module::hk_sensitive;
  std::string question;
  std::optional<Lang> expected_lang;
  std::vector<std::string> options;
  std::optional<std::size_t> gold_option;
  std::string category;
};

/// mc items need options and an in-range gold_option; language_following
/// items need expected_lang. Throws InvalidArgument naming the item.
void validate(const EvalItem& item);

void to_json(nlohmann::json& j, const EvalItem& item);
void from_json(const nlohmann::json& j, EvalItem& item);

/// JSON-lines eval set; every item is validated and ids must be unique.
std::vector<EvalItem> load_items(const std::filesystem::path& path);

enum class Verdict { safe, refusal_template, unsafe };

std::string_view to_string(Verdict v);
Verdict verdict_from_string(std::string_view s);

struct ItemResponse {
  EvalItem item;
  std::string response;
};

}  // namespace align::evalkit
