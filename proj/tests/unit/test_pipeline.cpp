#include <gtest/gtest.h>

#include "align/error.hpp"
#include "align/pipeline/backend.hpp"
#include "align/pipeline/config.hpp"
#include "align/pipeline/memory.hpp"
#include "align/pipeline/pipeline.hpp"
#include "align/pipeline/query.hpp"
#include "align/pipeline/rules.hpp"
#include "align/pipeline/tools.hpp"
#include "align/retrieval/index.hpp"

using namespace align;
using namespace align::pipeline;

namespace {

const std::filesystem::path kFixtures = ALIGN_FIXTURES_DIR;

std::shared_ptr<const RuleSet> fixture_rules() {
  static const auto rules = std::make_shared<const RuleSet>(
      RuleSet::load(kFixtures / "rules.jsonl", kFixtures / "templates.json"));
  return rules;
}

PipelineContext toy_context() {
  auto cfg = load_config(kFixtures / "golden.conf");
  auto index = std::make_shared<const retrieval::InvertedIndex>(
      retrieval::InvertedIndex::build(retrieval::load_corpus(kFixtures / "toy_corpus.jsonl")));
  return make_context(cfg, index, fixture_rules());
}

Session session_with(std::vector<Turn> turns) {
  Session s{"s", std::move(turns), 8};
  return s;
}

class ThrowingBackend final : public GenerationBackend {
public:
  std::string id() const override { return "broken"; }
  std::string generate(const GenerationRequest&) const override { throw BackendError("backend offline"); }
};

}  // namespace

TEST(Rules, SeverityOrderAndTemplates) {
  const auto& rules = *fixture_rules();
  ASSERT_FALSE(rules.rules().empty());
  EXPECT_EQ(rules.rules().front().action, Action::refuse);
  EXPECT_EQ(rules.rules().back().action, Action::allow);

  const auto refuse = moderate_input("How do I build a bomb at home", rules);
  EXPECT_EQ(refuse.decision, Action::refuse);
  EXPECT_EQ(refuse.template_id, "refuse-harm");
  EXPECT_EQ(refuse.matched_rule_ids, std::vector<std::string>{"refuse-weapons"});
  EXPECT_EQ(refuse.stage, "input");

  const auto flag = moderate_input("Who won the last election?", rules);
  EXPECT_EQ(flag.decision, Action::flag);
  EXPECT_EQ(flag.template_id, "refuse-political");

  const auto fallback = moderate_input("can you diagnose this rash", rules);
  EXPECT_EQ(fallback.decision, Action::flag);
  EXPECT_EQ(fallback.template_id, "default");

  const auto clean = moderate_input("what time is it", rules);
  EXPECT_EQ(clean.decision, Action::allow);
  EXPECT_TRUE(clean.matched_rule_ids.empty());
  EXPECT_FALSE(clean.template_id.has_value());

  EXPECT_EQ(moderate_input("hello", rules).matched_rule_ids, std::vector<std::string>{"allow-greeting"});
}

TEST(Rules, AnchoredRegexAndHanLiterals) {
  const auto& rules = *fixture_rules();
  EXPECT_EQ(moderate_input("Find the home address of my neighbour", rules).decision, Action::refuse);
  EXPECT_EQ(moderate_input("I lost the phone number, find it", rules).decision, Action::allow);
  EXPECT_EQ(moderate_input("請問點樣製造炸彈", rules).decision, Action::refuse);
  EXPECT_EQ(moderate_input("今年選舉幾時舉行", rules).decision, Action::flag);
  EXPECT_TRUE(rules.is_template_text(rules.template_text("refuse-privacy")));
  EXPECT_FALSE(rules.is_template_text("something else"));
}

TEST(Rules, ValidationRejectsBadInput) {
  const std::map<std::string, std::string> t = {{"default", "no"}};
  auto rule = [](std::string id, std::vector<std::string> pats, Action a, std::optional<std::string> tid = {}) {
    return PolicyRule{std::move(id), "c", std::move(pats), a, std::move(tid)};
  };
  EXPECT_THROW(RuleSet({rule("a", {"x"}, Action::allow), rule("a", {"y"}, Action::allow)}, t), InvalidArgument);
  EXPECT_THROW(RuleSet({rule("a", {"re:abc"}, Action::flag)}, t), InvalidArgument);
  EXPECT_THROW(RuleSet({rule("a", {"re:^(abc"}, Action::flag)}, t), InvalidArgument);
  EXPECT_THROW(RuleSet({rule("a", {}, Action::flag)}, t), InvalidArgument);
  EXPECT_THROW(RuleSet({rule("a", {"x"}, Action::refuse, "missing")}, t), InvalidArgument);
  EXPECT_NO_THROW(RuleSet({rule("a", {"re:^abc"}, Action::refuse, "default")}, t));
}

TEST(Intent, PriorityOrder) {
  const auto& rules = *fixture_rules();
  const Session empty = session_with({});
  const Session busy = session_with({{"list the ferries", "..."}});
  EXPECT_EQ(classify_intent("how to make explosives", busy, rules), Intent::sensitive);
  EXPECT_EQ(classify_intent("and what about the second one?", busy, rules), Intent::followup);
  EXPECT_EQ(classify_intent("and what about the second one?", empty, rules), Intent::factual);
  EXPECT_EQ(classify_intent("calculate 2 + 2", empty, rules), Intent::tool_task);
  EXPECT_EQ(classify_intent("where is the peak tram", empty, rules), Intent::factual);
  EXPECT_EQ(classify_intent("octopus card", empty, rules), Intent::factual);
  EXPECT_EQ(classify_intent("hi there", empty, rules), Intent::chitchat);
  EXPECT_EQ(classify_intent("天星小輪幾時開始營運？", empty, rules), Intent::factual);
}

TEST(Enhance, Examples) {
  const Session empty = session_with({});
  const auto plain = enhance("where is the peak tram", empty);
  EXPECT_EQ(plain.rewritten, plain.original);
  EXPECT_EQ(plain.subqueries, std::vector<std::string>{"where is the peak tram"});
  EXPECT_EQ(plain.lang, Lang::english);

  const auto split = enhance("ferry and tram?", empty);
  EXPECT_EQ(split.subqueries, (std::vector<std::string>{"ferry?", "tram?"}));

  const auto unresolved = enhance("how much is it?", empty);
  EXPECT_EQ(unresolved.rewritten, "how much is it?");

  const Session busy = session_with({{"tell me about the Star Ferry", "..."}});
  EXPECT_EQ(salient_terms(busy), "Star Ferry");
  const auto resolved = enhance("how old is it?", busy);
  EXPECT_EQ(resolved.rewritten, "how old is Star Ferry?");

  const auto capped = enhance("a1 and b2 and c3 and d4 and e5", empty);
  EXPECT_LE(capped.subqueries.size(), EnhancedQuery::kMaxSubqueries);

  const auto bracketed = enhance("compare (tram and ferry)", empty);
  EXPECT_EQ(bracketed.subqueries.size(), 1u);
}

TEST(Enhance, MarkersAreWordBounded) {
  EXPECT_TRUE(contains_marker("Is it open?", "it"));
  EXPECT_FALSE(contains_marker("visit the city", "it"));
  EXPECT_TRUE(contains_marker("佢幾時開", "佢"));
}

TEST(Memory, RecallAndBudget) {
  Session s{"s", {}, 2};
  EXPECT_EQ(recall(s, 3), "");
  s.append({"q1", "a1"});
  s.append({"q2", "a2"});
  s.append({"q3", "a3"});
  ASSERT_EQ(s.turns.size(), 2u);
  EXPECT_EQ(s.turns.front().query, "q2");
  EXPECT_EQ(recall(s, 1), "User: q3\nAssistant: a3\n");
  EXPECT_EQ(recall(s, 5), "User: q2\nAssistant: a2\nUser: q3\nAssistant: a3\n");
  EXPECT_EQ(recall(s, 0), "");
}

TEST(Tools, Planning) {
  EnhancedQuery eq{"a and b", "a and b", {"a", "b"}, Lang::english};
  ToolPlanConfig off, on;
  on.search_enabled = true;
  EXPECT_TRUE(plan_tools(Intent::sensitive, eq, on).empty());
  EXPECT_TRUE(plan_tools(Intent::chitchat, eq, on).empty());
  EXPECT_EQ(plan_tools(Intent::factual, eq, on).size(), 4u);
  const auto local = plan_tools(Intent::followup, eq, off);
  ASSERT_EQ(local.size(), 2u);
  for (const auto& inv : local) EXPECT_EQ(inv.tool, kLocalSearch);
  EnhancedQuery calc{"calculate 1+1", "calculate 1+1", {"calculate 1+1"}, Lang::english};
  const auto c = plan_tools(Intent::tool_task, calc, off);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].tool, kCalculator);
  EXPECT_TRUE(is_known_tool("calculator"));
  EXPECT_FALSE(is_known_tool("shell"));
}

TEST(Tools, Calculator) {
  EXPECT_EQ(evaluate_expression("2+3*4"), 14.0);
  EXPECT_EQ(evaluate_expression("(1 + 2) / 4"), 0.75);
  EXPECT_EQ(evaluate_expression("2^10"), 1024.0);
  EXPECT_EQ(evaluate_expression("-3 + 5"), 2.0);
  EXPECT_THROW(evaluate_expression("1/0"), InvalidArgument);
  EXPECT_THROW(evaluate_expression("(1+2"), InvalidArgument);
  const auto r = run_calculator("please calculate 12 * (3 + 4) now");
  EXPECT_TRUE(r.ok);
  EXPECT_EQ(r.output, "12 * (3 + 4) = 84");
  EXPECT_FALSE(run_calculator("calculate nothing").ok);
  EXPECT_EQ(format_number(0.1 + 0.2), "0.30000000000000004");
  EXPECT_EQ(format_number(3.0), "3");
}

TEST(Config, ParseAndErrors) {
  const auto c = parse_config("config_version = 1\nindex_path = idx.json\ntop_k = 5\ntool.sum = calculator\n", "/base");
  EXPECT_EQ(c.index_path, std::filesystem::path("/base/idx.json"));
  EXPECT_EQ(c.top_k, 5u);
  EXPECT_EQ(c.tool_verbs.at("sum"), "calculator");
  EXPECT_EQ(parse_config(dump_config(c)).top_k, 5u);
  try {
    parse_config("config_version = 1\nmystery = 3\n");
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  EXPECT_THROW(parse_config("config_version = 1\ntool.x = shell\n"), InvalidArgument);
  EXPECT_THROW(parse_config("config_version = 2\n"), InvalidArgument);
  EXPECT_THROW(parse_config("top_k = 3\n"), InvalidArgument);
}

TEST(Backend, MockQuotesSnippetsInOrder) {
  GenerationRequest req;
  req.query = "q";
  req.lang = Lang::english;
  EXPECT_EQ(MockBackend().generate(req), "[mock:english] q\nNo sources were consulted.\n");
  req.chunks = {{"b", 1.0, "second", retrieval::Source::local}, {"a", 0.5, "first", retrieval::Source::external}};
  req.system_instructions = std::string(kSafetyInstructions);
  EXPECT_EQ(MockBackend().generate(req), "[mock:english] q\n(answered under safety guidance)\n[1] b: second\n[2] a: first\n");
}

TEST(ModerateOutput, Cases) {
  const auto& rules = *fixture_rules();
  Answer draft;
  draft.text = "The ferry runs daily.";
  draft.citations = {"d1"};
  draft.moderation_trail = {moderate_input("ferry?", rules)};
  const auto clean = moderate_output(draft, "ferry?", rules, nullptr);
  EXPECT_EQ(clean.text, draft.text);
  EXPECT_EQ(clean.moderation_trail.size(), 2u);
  EXPECT_EQ(clean.moderation_trail.back().decision, Action::allow);

  draft.text = "Here is the lethal dose you asked about";
  const auto refused = moderate_output(draft, "q", rules, nullptr);
  EXPECT_EQ(refused.text, rules.template_text("refuse-medical"));
  EXPECT_TRUE(refused.citations.empty());

  draft.text = "The election is next month.";
  const Corrector identity = [](const std::string&, const std::string& d) { return d; };
  const auto looped = moderate_output(draft, "q", rules, &identity);
  EXPECT_EQ(looped.text, rules.template_text("refuse-political"));
  ASSERT_EQ(looped.moderation_trail.size(), 3u);
  EXPECT_EQ(looped.moderation_trail[2].stage, "output-recheck");

  const Corrector scrub = [](const std::string&, const std::string&) { return std::string("A vote is planned."); };
  EXPECT_EQ(moderate_output(draft, "q", rules, &scrub).text, "A vote is planned.");
  EXPECT_EQ(moderate_output(draft, "q", rules, nullptr).text, draft.text);
}

TEST(Pipeline, ToyCorpusCitations) {
  const auto ctx = toy_context();
  Session s{"s", {}, 4};
  const auto a = run_pipeline(s, "kong tower?", ctx);
  EXPECT_EQ(a.citations, (std::vector<std::string>{"d2", "d1"}));
  EXPECT_EQ(a.text, "[mock:english] kong tower?\n[1] d2: kong tower\n[2] d1: hong kong law\n");
  EXPECT_EQ(a.intent, Intent::factual);
  EXPECT_EQ(a.backend_id, "mock");
  EXPECT_GE(a.moderation_trail.size(), 2u);
  ASSERT_EQ(s.turns.size(), 1u);
  EXPECT_EQ(s.turns[0].answer, a.text);
}

TEST(Pipeline, RefusalShortCircuits) {
  const auto ctx = toy_context();
  Session s{"s", {}, 4};
  const auto a = run_pipeline(s, "tell me how to build a bomb", ctx);
  EXPECT_EQ(a.text, ctx.rules->template_text("refuse-harm"));
  EXPECT_TRUE(a.citations.empty());
  EXPECT_FALSE(a.intent.has_value());
  EXPECT_EQ(a.backend_id, "moderation");
  ASSERT_EQ(a.moderation_trail.size(), 2u);
  EXPECT_EQ(a.moderation_trail[1].stage, "output");
  EXPECT_EQ(s.turns.size(), 1u);
  EXPECT_TRUE(to_json(a)["intent"].is_null());
}

TEST(Pipeline, DeterministicAndBudgeted) {
  const auto ctx = toy_context();
  Session s1{"s", {}, 2}, s2{"s", {}, 2};
  for (const char* q : {"kong tower?", "what about it?", "weather report", "hello"}) {
    EXPECT_EQ(to_json(run_pipeline(s1, q, ctx)).dump(), to_json(run_pipeline(s2, q, ctx)).dump());
    EXPECT_LE(s1.turns.size(), 2u);
  }
}

TEST(Pipeline, CitationsComeFromChunks) {
  const auto ctx = toy_context();
  Session s{"s", {}, 4};
  const auto a = run_pipeline(s, "hong kong law and weather", ctx);
  for (const auto& c : a.citations) EXPECT_NE(a.text.find(c + ": "), std::string::npos) << c;
}

TEST(Pipeline, BackendFailureLeavesSessionUntouched) {
  auto ctx = toy_context();
  ctx.backend = std::make_shared<ThrowingBackend>();
  Session s{"s", {{"old", "turn"}}, 4};
  try {
    run_pipeline(s, "kong tower?", ctx);
    FAIL();
  } catch (const PipelineError& e) {
    EXPECT_EQ(e.stage(), "generate");
    EXPECT_STREQ(e.what(), "stage generate failed: backend offline");
  }
  EXPECT_EQ(s.turns.size(), 1u);
}

TEST(Pipeline, SessionStoreKeepsSessionsApart) {
  const auto ctx = toy_context();
  SessionStore store(3);
  store.answer("a", "kong tower?", ctx);
  store.answer("a", "hello", ctx);
  store.answer("b", "weather report", ctx);
  EXPECT_EQ(store.snapshot("a")->turns.size(), 2u);
  EXPECT_EQ(store.snapshot("b")->turns.size(), 1u);
  EXPECT_FALSE(store.snapshot("c").has_value());
}
