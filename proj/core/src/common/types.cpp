#include "align/types.hpp"

#include <array>
#include <utility>

#include "align/error.hpp"
#include "align/jsonl.hpp"

namespace align {

namespace {
constexpr std::array<std::pair<Lang, std::string_view>, 6> kLangTags{{
    {Lang::simplified_chinese, "simplified-chinese"},
    {Lang::traditional_chinese, "traditional-chinese"},
    {Lang::english, "english"},
    {Lang::cantonese_oral, "cantonese-oral"},
    {Lang::mixed, "mixed"},
    {Lang::unknown, "unknown"},
}};

constexpr std::array<std::pair<Provenance, std::string_view>, 4> kProvenanceTags{{
    {Provenance::base, "base"},
    {Provenance::corrected, "corrected"},
    {Provenance::refined, "refined"},
    {Provenance::external, "external"},
}};
}  // namespace

std::string_view to_string(Lang lang) {
  for (auto& [l, tag] : kLangTags)
    if (l == lang) return tag;
  return "unknown";
}

Lang lang_from_string(std::string_view tag) {
  std::string norm(tag);
  for (auto& c : norm)
    if (c == '_') c = '-';
  for (auto& [l, t] : kLangTags)
    if (t == norm) return l;
  throw InvalidArgument("unknown language tag: " + std::string(tag));
}

std::string_view to_string(Provenance p) {
  for (auto& [v, tag] : kProvenanceTags)
    if (v == p) return tag;
  return "base";
}

Provenance provenance_from_string(std::string_view tag) {
  for (auto& [v, t] : kProvenanceTags)
    if (t == tag) return v;
  throw InvalidArgument("unknown provenance: " + std::string(tag));
}

void validate(const PreferencePair& pair) {
  if (pair.winner.text == pair.loser.text)
    throw InvalidArgument("preference pair has identical winner and loser");
  if (pair.winner.prompt_id != pair.prompt.id || pair.loser.prompt_id != pair.prompt.id)
    throw InvalidArgument("preference pair responses reference a different prompt");
}

void to_json(nlohmann::json& j, const Prompt& p) {
  j = {{"id", p.id}, {"text", p.text}, {"lang", to_string(p.lang)}};
}

void from_json(const nlohmann::json& j, Prompt& p) {
  p.id = j.at("id").get<std::string>();
  p.text = j.at("text").get<std::string>();
  p.lang = lang_from_string(j.value("lang", "unknown"));
}

void to_json(nlohmann::json& j, const ResponseText& r) {
  j = {{"id", r.id},
       {"prompt_id", r.prompt_id},
       {"text", r.text},
       {"provenance", to_string(r.provenance)}};
}

void from_json(const nlohmann::json& j, ResponseText& r) {
  r.id = j.at("id").get<std::string>();
  r.prompt_id = j.at("prompt_id").get<std::string>();
  r.text = j.at("text").get<std::string>();
  r.provenance = provenance_from_string(j.value("provenance", "base"));
}

nlohmann::json preference_to_jsonl(const PreferencePair& pair) {
  nlohmann::json j = {{"prompt_id", pair.prompt.id},
                      {"prompt", pair.prompt.text},
                      {"winner", pair.winner.text},
                      {"loser", pair.loser.text},
                      {"lang", to_string(pair.prompt.lang)}};
  // Provenance is optional on read; written so synthesized sets round-trip.
  j["winner_provenance"] = to_string(pair.winner.provenance);
  j["loser_provenance"] = to_string(pair.loser.provenance);
  return j;
}

PreferencePair preference_from_jsonl(const nlohmann::json& j) {
  PreferencePair pair;
  pair.prompt.id = j.at("prompt_id").get<std::string>();
  pair.prompt.text = j.at("prompt").get<std::string>();
  pair.prompt.lang = lang_from_string(j.value("lang", "unknown"));
  if (pair.prompt.text.empty()) throw ParseError("empty prompt text for " + pair.prompt.id);
  pair.winner = {pair.prompt.id + "/w", pair.prompt.id, j.at("winner").get<std::string>(),
                 provenance_from_string(j.value("winner_provenance", "external"))};
  pair.loser = {pair.prompt.id + "/l", pair.prompt.id, j.at("loser").get<std::string>(),
                provenance_from_string(j.value("loser_provenance", "external"))};
  if (pair.winner.text.empty() || pair.loser.text.empty())
    throw ParseError("empty response text for " + pair.prompt.id);
  validate(pair);
  return pair;
}

std::vector<PreferencePair> load_preferences(const std::string& path) {
  std::vector<PreferencePair> out;
  for (const auto& row : jsonl::read_file(path)) out.push_back(preference_from_jsonl(row));
  return out;
}

void save_preferences(const std::string& path, const std::vector<PreferencePair>& pairs) {
  std::vector<nlohmann::json> rows;
  rows.reserve(pairs.size());
  for (const auto& p : pairs) rows.push_back(preference_to_jsonl(p));
  jsonl::write_file(path, rows);
}

}  // namespace align
