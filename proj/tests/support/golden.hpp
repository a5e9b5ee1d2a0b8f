#pragma once

// Scripted conversations replayed through the pipeline with the mock backend
// and compared byte-for-byte against stored snapshots.

#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "align/pipeline/config.hpp"
#include "align/pipeline/pipeline.hpp"
#include "align/retrieval/index.hpp"

namespace golden {

namespace fs = std::filesystem;

struct Outcome {
  std::string name;
  bool matched = false;
  bool updated = false;
  std::vector<std::string> violations;  // invariant failures
};

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string replace_ci(std::string text, const std::string& needle, const std::string& with) {
  std::string lower = text;
  for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  std::size_t pos = 0;
  std::string out;
  std::size_t last = 0;
  while ((pos = lower.find(needle, pos)) != std::string::npos) {
    out += text.substr(last, pos - last) + with;
    pos += needle.size();
    last = pos;
  }
  return out + text.substr(last);
}

inline align::pipeline::Corrector make_corrector(const std::string& kind) {
  if (kind == "identity") return [](const std::string&, const std::string& d) { return d; };
  if (kind == "scrub")
    return [](const std::string&, const std::string& d) {
      auto t = replace_ci(d, "election", "vote");
      t = replace_ci(t, "diagnose", "assess");
      return replace_ci(t, "prescription", "medicine");
    };
  return {};
}

/// Runs every conversation in conversations.json. With update set, snapshots
/// are rewritten instead of compared.
inline std::vector<Outcome> run_suite(const fs::path& golden_dir, const fs::path& fixtures, bool update) {
  using namespace align;
  const auto convs = nlohmann::json::parse(read_file(golden_dir / "conversations.json"));
  const auto index = std::make_shared<const retrieval::InvertedIndex>(
      retrieval::InvertedIndex::build(retrieval::load_corpus(fixtures / "golden_corpus.jsonl")));

  std::vector<Outcome> out;
  for (const auto& conv : convs) {
    Outcome o;
    o.name = conv.at("name").get<std::string>();
    const auto cfg_name = conv.value("config", std::string("golden"));
    const auto cfg = pipeline::load_config(fixtures / (cfg_name + ".conf"));
    auto ctx = pipeline::make_context(cfg, index, nullptr);
    if (auto c = make_corrector(conv.value("corrector", std::string("none")))) ctx.corrector = c;

    pipeline::Session session{o.name, {}, cfg.memory_budget};
    nlohmann::json transcript = nlohmann::json::array();
    for (const auto& q : conv.at("turns")) {
      const auto query = q.get<std::string>();
      const auto a = pipeline::run_pipeline(session, query, ctx);
      if (a.moderation_trail.size() < 2) o.violations.push_back(query + ": trail shorter than 2");
      bool refused = false;
      for (const auto& v : a.moderation_trail) refused = refused || v.decision == pipeline::Action::refuse;
      const bool flagged_out = a.moderation_trail.size() > 2 && a.moderation_trail.back().decision != pipeline::Action::allow;
      if ((refused || flagged_out) && !ctx.rules->is_template_text(a.text))
        o.violations.push_back(query + ": refusal is not an exact template");
      if (session.turns.size() > cfg.memory_budget) o.violations.push_back(query + ": memory budget exceeded");
      transcript.push_back({{"query", query}, {"answer", pipeline::to_json(a)}});
    }
    const nlohmann::json snapshot = {{"name", o.name}, {"config", cfg_name}, {"transcript", transcript},
                                     {"memory_turns", session.turns.size()}};
    const auto bytes = snapshot.dump(2) + "\n";
    const auto path = golden_dir / "expected" / (o.name + ".json");
    if (update) {
      fs::create_directories(path.parent_path());
      std::ofstream(path, std::ios::binary) << bytes;
      o.updated = true;
      o.matched = true;
    } else {
      o.matched = fs::exists(path) && read_file(path) == bytes;
    }
    out.push_back(std::move(o));
  }
  return out;
}

inline bool update_requested() {
  const char* v = std::getenv("ALIGN_UPDATE_GOLDEN");
  return v != nullptr && std::string(v) == "1";
}

}  // namespace golden
