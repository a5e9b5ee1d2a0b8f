#include "align/pipeline/pipeline.hpp"

#include "align/evalkit/language.hpp"
#include "align/jsonl.hpp"
#include "align/retrieval/search.hpp"
#include "align/w2s/corrector.hpp"

namespace align::pipeline {

nlohmann::json to_json(const Answer& a) {
  nlohmann::json j = {{"text", a.text},
                      {"citations", a.citations},
                      {"lang", to_string(a.lang)},
                      {"moderation_trail", a.moderation_trail},
                      {"backend_id", a.backend_id}};
  j["intent"] = a.intent ? nlohmann::json(to_string(*a.intent)) : nlohmann::json(nullptr);
  return j;
}

Answer moderate_output(Answer draft, const std::string& query, const RuleSet& rules, const Corrector* corrector) {
  auto refuse_with = [&](const std::string& template_id) {
    draft.text = rules.template_text(template_id);
    draft.citations.clear();
  };

  auto v = rules.moderate(draft.text, "output");
  draft.moderation_trail.push_back(v);
  if (v.decision == Action::refuse) {
    refuse_with(*v.template_id);
    return draft;
  }
  if (v.decision != Action::flag || corrector == nullptr) return draft;

  const auto corrected = (*corrector)(query, draft.text);
  auto second = rules.moderate(corrected, "output-recheck");
  draft.moderation_trail.push_back(second);
  if (second.decision == Action::allow)
    draft.text = corrected;
  else
    refuse_with(*second.template_id);
  return draft;
}

PipelineContext make_context(const PipelineConfig& config) { return make_context(config, nullptr, nullptr); }

PipelineContext make_context(const PipelineConfig& config, std::shared_ptr<const retrieval::InvertedIndex> index,
                             std::shared_ptr<const RuleSet> rules) {
  PipelineContext ctx;
  ctx.index = index ? std::move(index)
                    : std::make_shared<retrieval::InvertedIndex>(retrieval::InvertedIndex::load(config.index_path));
  ctx.rules = rules ? std::move(rules)
                    : std::make_shared<RuleSet>(
                          RuleSet::load(config.rules_path, config.templates_path, config.fallback_template_id));
  if (config.backend == "http")
    ctx.backend = std::make_shared<HttpBackend>(config.backend_url);
  else
    ctx.backend = std::make_shared<MockBackend>();
  if (config.search_enabled) {
    if (!config.external_url.empty())
      ctx.external = std::make_shared<retrieval::HttpSearch>(config.external_url);
    else if (!config.external_fixture_path.empty())
      ctx.external = std::make_shared<retrieval::FixtureSearch>(retrieval::load_corpus(config.external_fixture_path));
  }
  if (!config.corrector_path.empty()) {
    auto model = std::make_shared<w2s::CorrectionModel>(w2s::corrector_from_json(jsonl::read_json(config.corrector_path)));
    ctx.corrector = [model](const std::string& query, const std::string& draft) {
      const Prompt prompt{"q", query, evalkit::detect_language(query)};
      return w2s::correct(*model, prompt, ResponseText{"d", "q", draft, Provenance::base}).text;
    };
  }
  ctx.tools.search_enabled = config.search_enabled && ctx.external != nullptr;
  for (const auto& [verb, tool] : config.tool_verbs) ctx.lexicon.tool_verbs[verb] = tool;
  ctx.tools.tool_verbs = ctx.lexicon.tool_verbs;
  ctx.top_k = config.top_k;
  ctx.retrieve.snippet_chars = config.snippet_chars;
  return ctx;
}

namespace {

template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const PipelineError&) {
    throw;
  } catch (const std::exception& e) {
    throw PipelineError(name, e.what());
  }
}

}  // namespace

Answer run_pipeline(Session& session, const std::string& query, const PipelineContext& ctx) {
  Session working = session;
  const auto& rules = *ctx.rules;

  const auto v_in = stage("moderate_input", [&] { return moderate_input(query, rules); });
  if (v_in.decision == Action::refuse) {
    Answer a;
    a.text = rules.template_text(*v_in.template_id);
    a.lang = evalkit::detect_language(query);
    a.backend_id = "moderation";
    a.moderation_trail = {v_in};
    auto v_out = v_in;
    v_out.stage = "output";
    a.moderation_trail.push_back(v_out);
    working.append({query, a.text});
    session = std::move(working);
    return a;
  }

  const auto intent = stage("classify_intent", [&] { return classify_intent(query, working, rules, ctx.lexicon); });
  const auto eq = stage("enhance", [&] { return enhance(query, working, ctx.lexicon); });
  const auto memory = stage("recall", [&] { return recall(working, working.memory_budget); });
  const auto plan = stage("plan_tools", [&] { return plan_tools(intent, eq, ctx.tools, ctx.lexicon); });

  std::vector<retrieval::ScoredChunk> local, external;
  std::vector<ToolResult> tool_results;
  stage("tools", [&] {
    for (const auto& inv : plan) {
      if (inv.tool == kLocalSearch) {
        auto hits = retrieval::retrieve(*ctx.index, inv.input, eq.lang, ctx.top_k, ctx.retrieve);
        local.insert(local.end(), hits.begin(), hits.end());
      } else if (inv.tool == kExternalSearch) {
        if (!ctx.external) continue;
        auto hits = ctx.external->search(inv.input, eq.lang, ctx.top_k);
        external.insert(external.end(), hits.begin(), hits.end());
      } else if (inv.tool == kCalculator) {
        tool_results.push_back(run_calculator(inv.input));
      } else {
        throw InvalidArgument("unknown tool: " + inv.tool);
      }
    }
    return 0;
  });
  const auto chunks = stage("retrieve", [&] { return retrieval::merge_sources(local, external, ctx.top_k); });

  GenerationRequest req;
  req.system_instructions = std::string(kBaseInstructions);
  if (v_in.decision == Action::flag) req.system_instructions = std::string(kSafetyInstructions) + "\n" + req.system_instructions;
  req.chunks = chunks;
  req.tool_results = tool_results;
  req.memory = memory;
  req.query = eq.rewritten;
  req.lang = eq.lang;

  Answer draft;
  draft.text = stage("generate", [&] { return ctx.backend->generate(req); });
  for (const auto& c : chunks) draft.citations.push_back(c.doc_id);
  draft.lang = eq.lang;
  draft.backend_id = ctx.backend->id();
  draft.intent = intent;
  draft.moderation_trail = {v_in};

  const Corrector* corrector = ctx.corrector ? &*ctx.corrector : nullptr;
  auto answer = stage("moderate_output", [&] { return moderate_output(std::move(draft), query, rules, corrector); });

  working.append({query, answer.text});
  session = std::move(working);
  return answer;
}

std::shared_ptr<SessionStore::Entry> SessionStore::entry(const std::string& id) {
  std::lock_guard lock(mutex_);
  auto& e = sessions_[id];
  if (!e) {
    e = std::make_shared<Entry>();
    e->session.id = id;
    e->session.memory_budget = budget_;
  }
  return e;
}

Answer SessionStore::answer(const std::string& session_id, const std::string& query, const PipelineContext& ctx) {
  auto e = entry(session_id);
  std::lock_guard lock(e->mutex);
  return run_pipeline(e->session, query, ctx);
}

std::optional<Session> SessionStore::snapshot(const std::string& session_id) const {
  std::shared_ptr<Entry> e;
  {
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) return std::nullopt;
    e = it->second;
  }
  std::lock_guard lock(e->mutex);
  return e->session;
}

}  // namespace align::pipeline
