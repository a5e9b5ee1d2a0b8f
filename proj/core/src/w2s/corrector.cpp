#include "align/w2s/corrector.hpp"

#include <array>
#include <set>

#include "align/error.hpp"
#include "align/jsonl.hpp"
#include "align/text.hpp"

namespace align::w2s {

namespace {

constexpr std::array<std::pair<Topic, std::string_view>, 5> kTopics{{
    {Topic::values, "values"},
    {Topic::mathematics, "mathematics"},
    {Topic::code_reasoning, "code-reasoning"},
    {Topic::science_engineering, "science-engineering"},
    {Topic::other, "other"},
}};

std::vector<int> encode(const llf::Vocabulary& vocab, const std::string& text) {
  std::vector<int> ids;
  for (const auto& t : text::split_ws(text)) {
    auto id = vocab.find(t);
    if (!id) throw InvalidArgument("unknown token: " + t);
    ids.push_back(*id);
  }
  return ids;
}

}  // namespace

std::string_view to_string(Topic t) {
  for (auto& [v, s] : kTopics)
    if (v == t) return s;
  return "other";
}

Topic topic_from_string(std::string_view s) {
  for (auto& [v, name] : kTopics)
    if (name == s) return v;
  throw InvalidArgument("unknown topic: " + std::string(s));
}

std::uint64_t correction_context(const Prompt& prompt, const ResponseText& original) {
  return text::hash_fields({prompt.text, original.text});
}

double aligner_loss(const CorrectionModel& model, std::span<const QACRecord> dataset) {
  if (dataset.empty()) throw InvalidArgument("empty dataset");
  double total = 0.0;
  for (const auto& r : dataset) {
    const auto ids = encode(model.sequence.vocab(), r.corrected.text);
    total -= model.sequence.sequence_log_prob(correction_context(r.prompt, r.original), ids);
  }
  return total / static_cast<double>(dataset.size());
}

CorrectionModel train_corrector(std::span<const QACRecord> dataset, const CorrectorConfig& config) {
  if (dataset.empty()) throw InvalidArgument("empty dataset");
  std::set<std::string> tokens;
  for (const auto& r : dataset) {
    const auto toks = text::split_ws(r.corrected.text);
    if (toks.empty()) throw InvalidArgument("empty correction for prompt " + r.prompt.id);
    tokens.insert(toks.begin(), toks.end());
  }
  tokens.erase(std::string(llf::kEndToken));
  std::vector<std::string> sorted(tokens.begin(), tokens.end());
  CorrectionModel model{llf::SequenceModel(llf::Vocabulary(sorted), config.alpha, config.max_length)};
  for (const auto& r : dataset)
    model.sequence.count({correction_context(r.prompt, r.original), encode(model.sequence.vocab(), r.corrected.text)});
  return model;
}

ResponseText correct(const CorrectionModel& model, const Prompt& prompt, const ResponseText& original) {
  std::vector<std::string> words;
  for (int id : model.sequence.decode(correction_context(prompt, original)))
    words.push_back(model.sequence.vocab().token(id));
  ResponseText out;
  out.id = original.id + "/c";
  out.prompt_id = prompt.id;
  out.text = text::join(words, " ");
  out.provenance = Provenance::corrected;
  return out;
}

nlohmann::json to_json(const CorrectionModel& model) {
  return {{"kind", "correction-model"}, {"sequence", model.sequence.to_json()}};
}

CorrectionModel corrector_from_json(const nlohmann::json& j) {
  return {llf::SequenceModel::from_json(j.at("sequence"))};
}

nlohmann::json qac_to_jsonl(const QACRecord& r) {
  return {{"prompt_id", r.prompt.id},       {"prompt", r.prompt.text},
          {"original", r.original.text},    {"corrected", r.corrected.text},
          {"annotator_id", r.annotator_id}, {"topic", to_string(r.topic)},
          {"lang", to_string(r.prompt.lang)}};
}

std::vector<QACRecord> load_qac(const std::string& path) {
  std::vector<QACRecord> out;
  std::size_t line = 0;
  for (const auto& row : jsonl::read_file(path)) {
    ++line;
    QACRecord r;
    const auto id = row.value("prompt_id", "qac-" + std::to_string(line));
    r.prompt = {id, row.at("prompt").get<std::string>(), lang_from_string(row.value("lang", "unknown"))};
    r.original = {id + "/o", id, row.at("original").get<std::string>(), Provenance::base};
    r.corrected = {id + "/c", id, row.at("corrected").get<std::string>(), Provenance::corrected};
    r.annotator_id = row.value("annotator_id", std::string{});
    r.topic = topic_from_string(row.value("topic", "other"));
    if (text::split_ws(r.corrected.text).empty())
      throw ParseError(path + ": line " + std::to_string(line) + ": empty correction");
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace align::w2s
