#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "align/types.hpp"
#include "align/w2s/corrector.hpp"

namespace align::w2s {

/// Produces the base model's answer for a prompt.
using Generator = std::function<ResponseText(const Prompt&)>;

struct SynthesisSource {
  std::string prompt_id;
  std::string original_id;
  bool emitted = false;
};

struct SynthesisManifest {
  int iteration = 0;
  std::size_t pairs_emitted = 0;
  std::size_t pairs_skipped_identical = 0;
  std::vector<SynthesisSource> provenance;  // one entry per input prompt, input order
};

struct SynthesisResult {
  std::vector<PreferencePair> pairs;
  SynthesisManifest manifest;
  /// (y_o, y_c) for every prompt, including skipped ones.
  std::vector<std::pair<ResponseText, ResponseText>> responses;
};

/// y_o = base(x), y_c = correct(x, y_o); a (y_c over y_o) pair is emitted
/// iff the texts differ. Generator failures become BackendError naming the
/// prompt id.
SynthesisResult synthesize_preferences(std::span<const Prompt> prompts, const Generator& base,
                                       const CorrectionModel& corrector, int iteration = 0);

nlohmann::json to_json(const SynthesisManifest& m);

}  // namespace align::w2s
