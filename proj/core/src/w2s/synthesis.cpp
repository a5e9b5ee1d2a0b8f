#include "align/w2s/synthesis.hpp"

#include "align/error.hpp"

namespace align::w2s {

SynthesisResult synthesize_preferences(std::span<const Prompt> prompts, const Generator& base,
                                       const CorrectionModel& corrector, int iteration) {
  if (prompts.empty()) throw InvalidArgument("no prompts");
  SynthesisResult out;
  out.manifest.iteration = iteration;
  for (const auto& x : prompts) {
    ResponseText original;
    try {
      original = base(x);
    } catch (const std::exception& e) {
      throw BackendError("base generator failed for prompt " + x.id + ": " + e.what());
    }
    original.prompt_id = x.id;
    original.provenance = Provenance::base;
    if (original.id.empty()) original.id = x.id + "/base";

    auto corrected = correct(corrector, x, original);
    const bool emit = corrected.text != original.text && !corrected.text.empty();
    out.manifest.provenance.push_back({x.id, original.id, emit});
    if (emit) {
      out.pairs.push_back({x, corrected, original});
      ++out.manifest.pairs_emitted;
    } else {
      ++out.manifest.pairs_skipped_identical;
    }
    out.responses.emplace_back(std::move(original), std::move(corrected));
  }
  return out;
}

nlohmann::json to_json(const SynthesisManifest& m) {
  nlohmann::json prov = nlohmann::json::array();
  for (const auto& s : m.provenance)
    prov.push_back({{"prompt_id", s.prompt_id}, {"original_id", s.original_id}, {"emitted", s.emitted}});
  return {{"iteration", m.iteration},
          {"pairs_emitted", m.pairs_emitted},
          {"pairs_skipped_identical", m.pairs_skipped_identical},
          {"provenance", prov}};
}

}  // namespace align::w2s
