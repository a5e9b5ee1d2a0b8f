#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace align {

enum class Lang {
  simplified_chinese,
  traditional_chinese,
  english,
  cantonese_oral,
  mixed,
  unknown,
};

std::string_view to_string(Lang lang);
/// Accepts the canonical tag ("traditional-chinese") and the underscore form.
Lang lang_from_string(std::string_view tag);

struct Prompt {
  std::string id;
  std::string text;
  Lang lang = Lang::unknown;
};

enum class Provenance { base, corrected, refined, external };

std::string_view to_string(Provenance p);
Provenance provenance_from_string(std::string_view tag);

struct ResponseText {
  std::string id;
  std::string prompt_id;
  std::string text;
  Provenance provenance = Provenance::base;
};

/// One (x, y_w, y_l) record.
struct PreferencePair {
  Prompt prompt;
  ResponseText winner;
  ResponseText loser;
};

/// Throws InvalidArgument if winner and loser share text or point at a
/// different prompt.
void validate(const PreferencePair& pair);

void to_json(nlohmann::json& j, const Prompt& p);
void from_json(const nlohmann::json& j, Prompt& p);
void to_json(nlohmann::json& j, const ResponseText& r);
void from_json(const nlohmann::json& j, ResponseText& r);

/// Preference dataset line: {prompt_id, prompt, winner, loser, lang}.
nlohmann::json preference_to_jsonl(const PreferencePair& pair);
PreferencePair preference_from_jsonl(const nlohmann::json& j);

std::vector<PreferencePair> load_preferences(const std::string& path);
void save_preferences(const std::string& path, const std::vector<PreferencePair>& pairs);

}  // namespace align
