// One line per acceptance criterion; exit status is nonzero if any fails.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include <httplib.h>

#include "align/error.hpp"
#include "align/evalkit/metrics.hpp"
#include "align/llf/feedback.hpp"
#include "align/retrieval/index.hpp"
#include "align/rlhf/io.hpp"
#include "align/rlhf/policy.hpp"
#include "align/rlhf/preference.hpp"
#include "align/service/annotation_store.hpp"
#include "align/service/service.hpp"
#include "align/w2s/cycle.hpp"
#include "support/golden.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace align;
namespace fs = std::filesystem;

namespace {

struct Check {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& why) {
    if (!ok) {
      pass = false;
      detail << " [" << why << "]";
    }
  }
};

int failures = 0;

void report(const char* name, const std::function<void(Check&)>& body) {
  Check c;
  try {
    body(c);
  } catch (const std::exception& e) {
    c.pass = false;
    c.detail << " [exception: " << e.what() << "]";
  }
  std::printf("%s %s:%s\n", c.pass ? "PASS" : "FAIL", name, c.detail.str().c_str());
  std::fflush(stdout);
  if (!c.pass) ++failures;
}

std::vector<double> uniform_vec(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

rlhf::PolicyEntry entry(const std::string& pid, std::vector<double> logits) {
  std::vector<ResponseText> c;
  for (std::size_t k = 0; k < logits.size(); ++k)
    c.push_back({pid + "/" + std::to_string(k), pid, "c" + std::to_string(k), Provenance::base});
  return {Prompt{pid, pid}, c, std::move(logits)};
}

void gibbs_convergence(Check& c) {
  std::mt19937_64 rng(20240917);
  const double betas[] = {0.1, 1.0, 10.0};
  double worst_vs_lib = 0, worst_vs_oracle = 0, seconds = 0;
  for (int inst = 0; inst < 50; ++inst) {
    const std::size_t k = 2 + rng() % 15;
    const double beta = betas[inst % 3];
    auto base_logits = uniform_vec(rng, k, 0, 1);
    for (auto& l : base_logits) l = std::log(0.05 + l);
    const auto r = uniform_vec(rng, k, -1, 1);
    rlhf::TabularPolicy base({entry("x", base_logits)});
    rlhf::TabularPolicy init({entry("x", std::vector<double>(k, 0.0))});
    rlhf::RlhfConfig cfg;
    cfg.beta = beta;
    cfg.learning_rate = 1.0 / beta;
    cfg.steps = 20000;
    const auto t0 = std::chrono::steady_clock::now();
    const auto out = rlhf::optimize_policy(init, base, {{"x", r}}, cfg);
    seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto p = out.at("x").probabilities();
    const auto lib = rlhf::gibbs_optimum(base, {{"x", r}}, beta).at("x");
    const auto orc = oracle::gibbs(oracle::normalize_exp(base_logits), r, beta);
    worst_vs_lib = std::max(worst_vs_lib, rlhf::total_variation(p, lib));
    worst_vs_oracle = std::max(worst_vs_oracle, static_cast<double>(oracle::tv(p, orc)));
  }
  c.detail << " 50 instances, max TV " << worst_vs_lib << " (vs independent optimum " << worst_vs_oracle << "), "
           << seconds << " s";
  c.require(worst_vs_lib < 1e-3 && worst_vs_oracle < 1e-3, "TV >= 1e-3");
  c.require(seconds < 10.0, "runtime >= 10 s");
}

void gradient_fidelity(Check& c) {
  std::mt19937_64 rng(99);
  double worst_reward = 0, worst_policy = 0;
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t dim = 3 + rng() % 8;
    std::vector<rlhf::FeaturizedPair> batch;
    for (std::size_t i = 0, n = 1 + rng() % 8; i < n; ++i)
      batch.push_back({uniform_vec(rng, dim, 0, 2), uniform_vec(rng, dim, 0, 2)});
    auto m = inst % 2 ? rlhf::RewardModel::mlp(dim, 5, inst) : rlhf::RewardModel::linear(dim);
    m.params = uniform_vec(rng, m.params.size(), -1, 1);
    const auto numeric = oracle::central_diff(
        [&](const std::vector<double>& p) {
          auto copy = m;
          copy.params = p;
          return rlhf::reward_loss(copy, batch);
        },
        m.params);
    worst_reward = std::max(worst_reward, oracle::rel_error(rlhf::reward_grad(m, batch), numeric));
  }
  const double betas[] = {0.1, 1.0, 10.0};
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t k = 2 + rng() % 15;
    rlhf::TabularPolicy pi({entry("x", uniform_vec(rng, k, -2, 2))});
    rlhf::TabularPolicy base({entry("x", uniform_vec(rng, k, -2, 2))});
    const rlhf::RewardTable r = {{"x", uniform_vec(rng, k, -1, 1)}};
    const double beta = betas[inst % 3];
    const auto ps = pi.prompts();
    const auto analytic = rlhf::objective_gradient(pi, base, r, beta, ps).at("x");
    const auto numeric = oracle::central_diff(
        [&](const std::vector<double>& logits) {
          auto copy = pi;
          copy.at("x").logits = logits;
          return rlhf::rlhf_objective(copy, base, r, beta, ps);
        },
        pi.at("x").logits);
    worst_policy = std::max(worst_policy, oracle::rel_error(analytic, numeric));
  }
  c.detail << " max relative error reward " << worst_reward << ", policy " << worst_policy;
  c.require(worst_reward < 1e-4 && worst_policy < 1e-4, "relative error >= 1e-4");
}

void closed_form_losses(Check& c) {
  const auto pairs = synthetic::separable_pairs(40, 3);
  const rlhf::Featurizer f;
  const double zero_margin = rlhf::reward_loss(rlhf::RewardModel::linear(f.dim()), f, pairs);

  std::vector<std::string> toks;
  for (int i = 0; i < 9; ++i) toks.push_back("t" + std::to_string(i));
  const llf::FeedbackModel uniform{llf::SequenceModel::uniform(llf::Vocabulary(toks))};
  const Prompt p{"x", "question"};
  const std::vector<llf::FeedbackRecord> fb = {{p, {"y", "x", "answer", Provenance::base}, {"t1", "t4", "t7"}}};
  const double feedback = llf::feedback_loss(uniform, fb);
  const double want_feedback = 3 * std::log(10.0);

  const std::vector<std::string> corr = {"it", "is", "accurate"};
  const w2s::QACRecord rec{p, {"o", "x", "it is vague", Provenance::base}, {"c", "x", "it is accurate", Provenance::corrected},
                           "a", w2s::Topic::values};
  llf::SequenceModel seq(llf::Vocabulary(corr), 0.1, 8);
  const auto ctx = w2s::correction_context(rec.prompt, rec.original);
  int prev = llf::SequenceModel::kBegin;
  for (const auto& t : corr) {
    std::vector<double> d(seq.vocab().size(), 0.0);
    const int id = *seq.vocab().find(t);
    d[id] = 1;
    seq.set_distribution(ctx, prev, d);
    prev = id;
  }
  const std::vector<w2s::QACRecord> qac = {rec};
  const double aligner = w2s::aligner_loss(w2s::CorrectionModel{seq}, qac);

  c.detail << " reward " << zero_margin - std::log(2.0) << " from ln2, feedback " << feedback - want_feedback
           << " from 3 ln 10, aligner " << aligner;
  c.require(std::abs(zero_margin - std::log(2.0)) <= 1e-9, "reward loss");
  c.require(std::abs(feedback - want_feedback) <= 1e-9, "feedback loss");
  c.require(aligner == 0.0, "aligner loss");
}

void reward_learning(Check& c) {
  const auto train = synthetic::separable_pairs(200, 1, "t");
  const auto held = synthetic::separable_pairs(200, 2, "h");
  const rlhf::Featurizer f;
  rlhf::RlhfConfig cfg;
  cfg.steps = 200;
  cfg.learning_rate = 0.5;
  const auto res = rlhf::train_reward_model(train, f, cfg);
  const double acc = rlhf::pairwise_accuracy(res.model, f, held);
  const auto sym = synthetic::symmetric_pairs(100, 5);
  const auto sres = rlhf::train_reward_model(sym, f, cfg);
  const double gap = std::abs(sres.loss_history.back() - std::log(2.0));
  c.detail << " held-out accuracy " << acc << ", symmetric final loss off ln2 by " << gap;
  c.require(acc >= 0.95, "accuracy < 0.95");
  c.require(gap <= 1e-6, "symmetric loss");
}

std::string cycle_fingerprint(const std::vector<w2s::IterationArtifacts>& arts, const rlhf::RlhfConfig& cfg) {
  std::string s;
  for (const auto& a : arts) {
    s += rlhf::reward_artifact(a.reward, cfg, a.reward_loss_history).dump();
    s += rlhf::to_json(a.policy).dump();
    s += w2s::to_json(a.corrector).dump();
    s += w2s::to_json(a.manifest).dump();
    s += w2s::to_json(a.metrics).dump();
    for (const auto& p : a.preferences) s += preference_to_jsonl(p).dump();
  }
  return s;
}

void w2s_property(Check& c) {
  const auto setup = synthetic::w2s_setup();
  w2s::CycleConfig cfg;
  cfg.rlhf.steps = 200;
  cfg.rlhf.learning_rate = 0.5;
  cfg.rlhf.seed = 7;
  cfg.feature_dim = 128;
  cfg.judge = synthetic::value_judge;
  const auto a = w2s::w2s_cycle(setup.seed_qac, setup.train_prompts, setup.base, 3, cfg);
  const auto b = w2s::w2s_cycle(setup.seed_qac, setup.train_prompts, setup.base, 3, cfg);
  const auto& last = a.back();
  const rlhf::Featurizer f(cfg.feature_dim);
  std::size_t ranked = 0, improved = 0;
  for (const auto& x : setup.heldout_prompts) {
    const auto yo = setup.base(x);
    const auto yc = w2s::correct(last.corrector, x, yo);
    improved += synthetic::value_judge(x, yc) > synthetic::value_judge(x, yo) ? 1 : 0;
    ranked += last.reward.score(f(x, yc)) > last.reward.score(f(x, yo)) ? 1 : 0;
  }
  const double share = static_cast<double>(ranked) / setup.heldout_prompts.size();
  const bool same = cycle_fingerprint(a, cfg.rlhf) == cycle_fingerprint(b, cfg.rlhf);
  c.detail << " corrected ranked above original on " << ranked << "/" << setup.heldout_prompts.size()
           << " held-out prompts (judge-improved " << improved << "), rerun identical: " << (same ? "yes" : "no");
  c.require(share >= 0.9, "held-out ranking < 90%");
  c.require(same, "not reproducible");
}

void bm25_oracle(Check& c) {
  using retrieval::Document;
  const auto toy = retrieval::InvertedIndex::build({{"d1", "", "hong kong law", Lang::english, retrieval::Source::local, {}},
                                                    {"d2", "", "kong tower", Lang::english, retrieval::Source::local, {}},
                                                    {"d3", "", "weather report", Lang::english, retrieval::Source::local, {}}});
  struct Case {
    std::vector<std::string> q;
    const char* doc;
    double want;
  };
  const Case cases[] = {{{"kong", "tower"}, "d2", 1.54088457839758010853888121672},
                        {{"kong", "tower"}, "d1", 0.420817202929321367803745946493},
                        {{"hong", "kong", "law"}, "d1", 2.177185865299156722174600291},
                        {{"hong", "kong", "law"}, "d2", 0.499176268302367415601684846875},
                        {{"weather"}, "d3", 1.04170831009521269293719636985}};
  double worst_toy = 0;
  for (const auto& cs : cases) worst_toy = std::max(worst_toy, std::abs(retrieval::bm25_score(toy, cs.q, cs.doc) - cs.want));

  std::mt19937_64 rng(4242);
  std::vector<std::string> vocab;
  for (int i = 0; i < 40; ++i) vocab.push_back("w" + std::to_string(i));
  double worst_random = 0;
  for (int corpus = 0; corpus < 10; ++corpus) {
    std::vector<Document> docs;
    std::vector<std::vector<std::string>> raw;
    for (int d = 0; d < 100; ++d) {
      std::vector<std::string> words;
      std::string text;
      for (std::size_t i = 0, n = 1 + rng() % 40; i < n; ++i) {
        words.push_back(vocab[rng() % (5 + corpus * 3)]);
        text += words.back() + " ";
      }
      docs.push_back({"doc" + std::to_string(1000 + d), "", text, Lang::english, retrieval::Source::local, {}});
      raw.push_back(words);
    }
    const auto idx = retrieval::InvertedIndex::build(docs);
    for (int q = 0; q < 10; ++q) {
      std::vector<std::string> query;
      for (std::size_t i = 0, n = 1 + rng() % 5; i < n; ++i) query.push_back(vocab[rng() % vocab.size()]);
      for (std::size_t d = 0; d < docs.size(); ++d)
        worst_random = std::max(worst_random, std::abs(retrieval::bm25_score(idx, query, docs[d].id) - oracle::bm25(raw, query, d)));
    }
  }
  c.detail << " toy max error " << worst_toy << ", random corpora max error " << worst_random;
  c.require(worst_toy <= 1e-9, "toy corpus");
  c.require(worst_random <= 1e-12, "random corpora");
}

void published_arithmetic(Check& c) {
  using namespace evalkit;
  const std::vector<double> t1 = {90.44, 88.69, 68.06, 88.95};
  const double micro = micro_average(t1);
  const double micro_reported = round_half_away(micro, 2);
  const double macro = macro_average({{"STEM", 80.4}, {"Social Science", 80.4}, {"Humanities", 84.6}, {"Other", 80.2}});
  std::vector<Verdict> v;
  v.insert(v.end(), 237, Verdict::safe);
  v.insert(v.end(), 12, Verdict::refusal_template);
  v.insert(v.end(), 51, Verdict::unsafe);
  const auto p = proportions(v);
  const RefusalDetector det{{"I'm sorry, I can't answer that."}, {}};
  std::vector<ItemResponse> rs;
  for (int i = 0; i < 100; ++i) {
    EvalItem it;
    it.id = "r" + std::to_string(i);
    it.module = Module::sensitive_political;
    rs.push_back({it, i < 13 ? "I'm sorry, I can't answer that." : "Here is a neutral summary."});
  }
  const double refusal = refusal_rate(rs, det);
  for (auto& r : rs) r.response = "Here is a neutral summary.";
  const double none = refusal_rate(rs, det);
  char buf[256];
  std::snprintf(buf, sizeof buf, " micro %.17g reported %.2f, macro %.17g, proportions %g/%g/%g, refusal %g%% and %g%%", micro,
                micro_reported, macro, p.safe, p.refusal, p.unsafe, refusal, none);
  c.detail << buf;
  c.require(std::abs(micro_reported - 84.04) <= 0.005, "micro average");
  c.require(std::abs(macro - 81.4) <= 0.05, "macro average");
  c.require(p.safe == 79.0 && p.refusal == 4.0 && p.unsafe == 17.0, "proportions");
  c.require(refusal == 13.0 && none == 0.0, "refusal rate");
}

void golden_suite(Check& c) {
  const auto outcomes = golden::run_suite(ALIGN_GOLDEN_DIR, ALIGN_FIXTURES_DIR, false);
  std::size_t matched = 0, violations = 0;
  for (const auto& o : outcomes) {
    matched += o.matched ? 1 : 0;
    violations += o.violations.size();
    if (!o.matched) c.detail << " mismatch:" << o.name;
  }
  c.detail << " " << matched << "/" << outcomes.size() << " conversations byte-identical, " << violations
           << " invariant violations";
  c.require(outcomes.size() >= 20, "fewer than 20 conversations");
  c.require(matched == outcomes.size(), "snapshot mismatch");
  c.require(violations == 0, "invariant violation");
}

void service_integrity(Check& c) {
  const auto dir = fs::temp_directory_path() / "align_acceptance_service";
  fs::remove_all(dir);
  int reports = 0;
  {
    service::ServiceConfig cfg;
    cfg.data_dir = dir;
    cfg.clock = [] { return std::string("2026-01-01T00:00:00Z"); };
    service::Service svc(cfg);
    service::Server server(svc);
    const int port = server.bind("127.0.0.1", 0);
    std::thread th([&] { server.listen(); });

    httplib::Client cl("127.0.0.1", port);
    nlohmann::json items = nlohmann::json::array();
    for (int i = 0; i < 6; ++i)
      items.push_back({{"id", "item" + std::to_string(i)}, {"module", "hk_sensitive"}, {"question", "q" + std::to_string(i)},
                       {"category", "c"}});
    for (const char* run : {"alpha", "beta"}) {
      const nlohmann::json body = {{"run_id", run}, {"system", "backend"}, {"items", items}, {"mode", "dual"}};
      cl.Post("/v1/eval/run", body.dump(), "application/json");
      cl.Post("/v1/annotations/enqueue", nlohmann::json{{"run_id", run}}.dump(), "application/json");
    }
    const auto tasks = nlohmann::json::parse(cl.Get("/v1/annotations/tasks?run_id=alpha")->body)["tasks"];
    const auto contested = tasks[0]["task_id"].get<std::string>();

    std::atomic<int> ok{0}, conflicts{0};
    std::vector<std::thread> racers;
    for (int i = 0; i < 12; ++i)
      racers.emplace_back([&, i] {
        httplib::Client rc("127.0.0.1", port);
        const nlohmann::json b = {{"annotator", "racer" + std::to_string(i)}, {"label", i % 2 ? "unsafe" : "safe"}};
        const auto r = rc.Post("/v1/annotations/" + contested + "/label", b.dump(), "application/json");
        if (r && r->status == 200) ++ok;
        if (r && r->status == 409) ++conflicts;
      });
    for (auto& t : racers) t.join();

    const char* verdicts[] = {"safe", "unsafe", "refusal_template"};
    for (int round = 0; round < 10; ++round) {
      const std::string who = "ann" + std::to_string(round % 4);
      const auto next = nlohmann::json::parse(cl.Get("/v1/annotations/next?annotator=" + who)->body)["task"];
      if (next.is_null()) break;
      cl.Post("/v1/annotations/" + next["task_id"].get<std::string>() + "/label",
              nlohmann::json{{"annotator", who}, {"label", verdicts[round % 3]}}.dump(), "application/json");
      if (round % 3 == 0) {
        cl.Get("/v1/eval/report/alpha");
        cl.Get("/v1/eval/report/beta");
        reports += 2;
      }
    }
    svc.shutdown();
    server.stop();
    th.join();
    c.detail << " concurrent labels: " << ok.load() << " success, " << conflicts.load() << " conflict;";
    c.require(ok.load() == 1 && conflicts.load() == 11, "concurrent labels");
  }
  const auto bad = service::AnnotationStore::verify_reports(dir / "annotations");
  c.detail << " replayed " << reports << " report writes, " << bad.size() << " mismatched";
  c.require(bad.empty(), "replay mismatch");
  fs::remove_all(dir);
}

}  // namespace

int main() {
  report("gibbs-convergence", gibbs_convergence);
  report("gradient-fidelity", gradient_fidelity);
  report("closed-form-losses", closed_form_losses);
  report("reward-learning", reward_learning);
  report("w2s-pipeline", w2s_property);
  report("bm25-oracle", bm25_oracle);
  report("published-arithmetic", published_arithmetic);
  report("pipeline-golden", golden_suite);
  report("service-integrity", service_integrity);
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
