#include <csignal>
#include <cstdio>
#include <iostream>
#include <random>
#include <thread>

#include <CLI11.hpp>

#include "align/error.hpp"
#include "align/evalkit/bench.hpp"
#include "align/evalkit/judges.hpp"
#include "align/jsonl.hpp"
#include "align/llf/feedback.hpp"
#include "align/pipeline/config.hpp"
#include "align/pipeline/pipeline.hpp"
#include "align/retrieval/index.hpp"
#include "align/retrieval/search.hpp"
#include "align/rlhf/io.hpp"
#include "align/rlhf/policy.hpp"
#include "align/service/annotation_store.hpp"
#include "align/service/service.hpp"
#include "align/version.hpp"
#include "align/w2s/cycle.hpp"

using namespace align;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void print(const json& j) { std::cout << j.dump(2) << "\n"; }

void write_or_print(const std::string& out, const json& j) {
  if (out.empty())
    print(j);
  else
    jsonl::write_json(out, j);
}

std::vector<Prompt> load_prompts(const std::string& path, std::map<std::string, std::string>* answers) {
  std::vector<Prompt> out;
  for (const auto& row : jsonl::read_file(path)) {
    out.push_back(row.get<Prompt>());
    if (answers && row.contains("answer")) (*answers)[out.back().id] = row["answer"].get<std::string>();
  }
  return out;
}

std::shared_ptr<pipeline::GenerationBackend> make_backend(const std::string& url) {
  if (url.empty() || url == "mock") return std::make_shared<pipeline::MockBackend>();
  return std::make_shared<pipeline::HttpBackend>(url);
}

std::string generate(const pipeline::GenerationBackend& backend, const std::string& query, const std::string& extra = {}) {
  pipeline::GenerationRequest req;
  req.system_instructions = std::string(pipeline::kBaseInstructions);
  if (!extra.empty()) req.system_instructions += "\n" + extra;
  req.query = query;
  req.lang = evalkit::detect_language(query);
  return backend.generate(req);
}

std::unique_ptr<evalkit::Judge> make_rule_judge(const std::string& config) {
  return std::make_unique<evalkit::RuleJudge>(config.empty() ? evalkit::rule_judge_from_json(json::object())
                                                             : evalkit::rule_judge_from_json(jsonl::read_json(config)));
}

service::Server* g_server = nullptr;

extern "C" void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Value-alignment toolkit: reward learning, feedback, weak-to-strong cycle, retrieval, chat and evaluation"};
  app.set_version_flag("--version", std::string(build_version()));
  app.require_subcommand(1);

  // train-reward
  auto* tr = app.add_subcommand("train-reward", "Fit a Bradley-Terry reward model to a preference file");
  std::string tr_data, tr_out, tr_scorer = "linear";
  rlhf::RlhfConfig tr_cfg;
  std::size_t tr_dim = rlhf::Featurizer::kDefaultDim, tr_hidden = 16;
  tr->add_option("--data", tr_data, "Preference JSON-lines file")->required()->check(CLI::ExistingFile);
  tr->add_option("--steps", tr_cfg.steps, "Gradient steps");
  tr->add_option("--lr", tr_cfg.learning_rate, "Learning rate");
  tr->add_option("--seed", tr_cfg.seed, "Seed for MLP initialization");
  tr->add_option("--scorer", tr_scorer, "linear or mlp")->check(CLI::IsMember({"linear", "mlp"}));
  tr->add_option("--hidden", tr_hidden, "MLP hidden units");
  tr->add_option("--dim", tr_dim, "Hashed feature dimension");
  tr->add_option("--out", tr_out, "Artifact path (stdout when omitted)");
  tr->callback([&] {
    const auto data = load_preferences(tr_data);
    const rlhf::Featurizer f(tr_dim);
    const auto res = rlhf::train_reward_model(
        data, f, tr_cfg, {tr_scorer == "mlp" ? rlhf::ScorerKind::mlp : rlhf::ScorerKind::linear, tr_hidden});
    write_or_print(tr_out, rlhf::reward_artifact(res.model, tr_cfg, res.loss_history));
    std::cerr << "final loss " << res.loss_history.back() << ", train accuracy "
              << rlhf::pairwise_accuracy(res.model, f, data) << "\n";
  });

  // rlhf-toy
  auto* toy = app.add_subcommand("rlhf-toy", "Optimize a random tabular policy and compare it with the closed-form optimum");
  rlhf::RlhfConfig toy_cfg;
  toy_cfg.steps = 20000;
  std::size_t toy_k = 4;
  double toy_lr = 0;
  toy->add_option("--beta", toy_cfg.beta, "KL weight")->check(CLI::PositiveNumber);
  toy->add_option("--candidates", toy_k, "Candidates per prompt")->check(CLI::Range(2, 1000));
  toy->add_option("--steps", toy_cfg.steps, "Gradient steps");
  toy->add_option("--lr", toy_lr, "Learning rate (default 1/beta)");
  toy->add_option("--seed", toy_cfg.seed, "Instance seed");
  toy->callback([&] {
    toy_cfg.learning_rate = toy_lr > 0 ? toy_lr : 1.0 / toy_cfg.beta;
    std::mt19937_64 rng(toy_cfg.seed);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<double> base_logits(toy_k), rewards(toy_k);
    std::vector<ResponseText> cands;
    for (std::size_t i = 0; i < toy_k; ++i) {
      base_logits[i] = std::log(0.05 + u(rng));
      rewards[i] = 2 * u(rng) - 1;
      cands.push_back({"c" + std::to_string(i), "x", "candidate " + std::to_string(i), Provenance::base});
    }
    const rlhf::TabularPolicy base({{Prompt{"x", "toy"}, cands, base_logits}});
    const rlhf::TabularPolicy init({{Prompt{"x", "toy"}, cands, std::vector<double>(toy_k, 0.0)}});
    const rlhf::RewardTable r = {{"x", rewards}};
    const auto out = rlhf::optimize_policy(init, base, r, toy_cfg);
    const auto star = rlhf::gibbs_optimum(base, r, toy_cfg.beta).at("x");
    const auto p = out.at("x").probabilities();
    const auto ps = out.prompts();
    rlhf::TabularPolicy target = base;
    for (std::size_t i = 0; i < toy_k; ++i) target.at("x").logits[i] = std::log(star[i]);
    print({{"rewards", rewards},
           {"base", base.at("x").probabilities()},
           {"optimized", p},
           {"optimum", star},
           {"total_variation", rlhf::total_variation(p, star)},
           {"objective", rlhf::rlhf_objective(out, base, r, toy_cfg.beta, ps)},
           {"objective_at_optimum", rlhf::rlhf_objective(target, base, r, toy_cfg.beta, ps)}});
  });

  // llf-train
  auto* lt = app.add_subcommand("llf-train", "Fit the feedback model to critique data");
  std::string lt_data, lt_out;
  llf::FeedbackTrainConfig lt_cfg;
  lt->add_option("--data", lt_data, "Feedback JSON-lines file")->required()->check(CLI::ExistingFile);
  lt->add_option("--alpha", lt_cfg.alpha, "Additive smoothing");
  lt->add_option("--max-length", lt_cfg.max_length, "Longest critique");
  lt->add_option("--out", lt_out, "Model path (stdout when omitted)");
  lt->callback([&] {
    const auto data = llf::load_feedback(lt_data);
    const auto m = llf::train_feedback_model(data, lt_cfg);
    write_or_print(lt_out, llf::to_json(m));
    std::cerr << "feedback loss " << llf::feedback_loss(m, data) << "\n";
  });

  // llf-improve
  auto* li = app.add_subcommand("llf-improve", "Generate, critique and refine answers, emitting preference pairs");
  std::string li_model, li_prompts, li_backend, li_judge, li_out;
  int li_iters = 3;
  std::optional<std::uint64_t> li_seed;
  li->add_option("--model", li_model, "Feedback model JSON")->required()->check(CLI::ExistingFile);
  li->add_option("--prompts", li_prompts, "Prompt JSON-lines file")->required()->check(CLI::ExistingFile);
  li->add_option("--iters", li_iters, "Refinement rounds per prompt");
  li->add_option("--backend", li_backend, "Generation endpoint URL, or mock");
  li->add_option("--judge-config", li_judge, "Rule judge config JSON");
  li->add_option("--critique-seed", li_seed, "Sample critiques instead of greedy decoding");
  li->add_option("--out", li_out, "Preference pairs output (stdout when omitted)");
  li->callback([&] {
    const auto model = llf::feedback_model_from_json(jsonl::read_json(li_model));
    const auto backend = make_backend(li_backend);
    const auto judge = make_rule_judge(li_judge);
    const llf::Responder responder = [&](const Prompt& p) {
      return ResponseText{p.id + "/0", p.id, generate(*backend, p.text), Provenance::base};
    };
    const llf::Refiner refiner = [&](const Prompt& p, const ResponseText& cur, const std::vector<std::string>& fb) {
      std::string note = "Revise the previous answer. Feedback:";
      for (const auto& t : fb) note += " " + t;
      return ResponseText{cur.id + "+", p.id, generate(*backend, p.text, note + "\nPrevious answer: " + cur.text),
                          Provenance::refined};
    };
    const llf::JudgeFn score = [&](const Prompt& p, const ResponseText& r) {
      evalkit::EvalItem item;
      item.id = p.id;
      item.question = p.text;
      return static_cast<double>(judge->judge(item, r.text).tier.value_or(0));
    };
    std::vector<json> rows;
    for (const auto& p : load_prompts(li_prompts, nullptr))
      for (const auto& pair : llf::self_improve(p, responder, model, refiner, score, li_iters, li_seed).pairs)
        rows.push_back(preference_to_jsonl(pair));
    if (li_out.empty())
      std::cout << jsonl::dump(rows);
    else
      jsonl::write_file(li_out, rows);
    std::cerr << rows.size() << " preference pairs\n";
  });

  // w2s-cycle
  auto* wc = app.add_subcommand("w2s-cycle", "Run the corrector / preference / reward / policy loop");
  std::string wc_qac, wc_prompts, wc_out, wc_backend;
  int wc_iters = 1;
  w2s::CycleConfig wc_cfg;
  wc->add_option("--qac", wc_qac, "Seed question-answer-correction JSON-lines")->required()->check(CLI::ExistingFile);
  wc->add_option("--prompts", wc_prompts, "Prompts; an \"answer\" field is used as the base answer")
      ->required()
      ->check(CLI::ExistingFile);
  wc->add_option("--iters", wc_iters, "Iterations");
  wc->add_option("--out-dir", wc_out, "Artifact directory")->required();
  wc->add_option("--backend", wc_backend, "Base generator endpoint for prompts without an answer");
  wc->add_option("--steps", wc_cfg.rlhf.steps, "Reward and policy steps");
  wc->add_option("--lr", wc_cfg.rlhf.learning_rate, "Learning rate");
  wc->add_option("--beta", wc_cfg.rlhf.beta, "KL weight");
  wc->add_option("--seed", wc_cfg.rlhf.seed, "Seed");
  wc->add_option("--dim", wc_cfg.feature_dim, "Hashed feature dimension");
  wc->callback([&] {
    std::map<std::string, std::string> answers;
    const auto prompts = load_prompts(wc_prompts, &answers);
    const auto backend = make_backend(wc_backend);
    const w2s::Generator base = [&](const Prompt& p) {
      auto it = answers.find(p.id);
      return ResponseText{p.id + "/base", p.id, it != answers.end() ? it->second : generate(*backend, p.text),
                          Provenance::base};
    };
    wc_cfg.out_dir = wc_out;
    const auto qac = w2s::load_qac(wc_qac);
    json metrics = json::array();
    for (const auto& a : w2s::w2s_cycle(qac, prompts, base, wc_iters, wc_cfg)) {
      auto m = w2s::to_json(a.metrics);
      m["pairs_emitted"] = a.manifest.pairs_emitted;
      m["pairs_skipped_identical"] = a.manifest.pairs_skipped_identical;
      metrics.push_back(m);
    }
    print(metrics);
  });

  // index
  auto* idx = app.add_subcommand("index", "Build or query a BM25 index");
  idx->require_subcommand(1);
  auto* ib = idx->add_subcommand("build", "Index a corpus");
  std::string ib_corpus, ib_out;
  ib->add_option("--corpus", ib_corpus, "Corpus JSON-lines")->required()->check(CLI::ExistingFile);
  ib->add_option("--out", ib_out, "Index file")->required();
  ib->callback([&] {
    const auto index = retrieval::InvertedIndex::build(retrieval::load_corpus(ib_corpus));
    index.save(ib_out);
    std::cout << index.doc_count() << " documents, " << index.all_postings().size() << " terms\n";
  });
  auto* iq = idx->add_subcommand("query", "Search an index");
  std::string iq_index, iq_q;
  std::size_t iq_k = 5;
  iq->add_option("--index", iq_index, "Index file")->required()->check(CLI::ExistingFile);
  iq->add_option("--q", iq_q, "Query text")->required();
  iq->add_option("-k", iq_k, "Results");
  iq->callback([&] {
    const auto index = retrieval::InvertedIndex::load(iq_index);
    print(json(retrieval::retrieve(index, iq_q, evalkit::detect_language(iq_q), iq_k)));
  });

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluation runs");
  ev->require_subcommand(1);
  auto* er = ev->add_subcommand("run", "Generate, judge and report");
  std::string er_items, er_judge = "rule", er_judge_config, er_labels, er_url, er_config, er_system = "pipeline", er_out,
                        er_results, er_backend;
  er->add_option("--items", er_items, "Eval items JSON-lines")->required()->check(CLI::ExistingFile);
  er->add_option("--judge", er_judge, "rule, labels or http")->check(CLI::IsMember({"rule", "labels", "http"}));
  er->add_option("--judge-config", er_judge_config, "Rule judge config JSON");
  er->add_option("--labels", er_labels, "Labels JSON object {item_id: verdict} for --judge labels");
  er->add_option("--judge-url", er_url, "Endpoint for --judge http");
  er->add_option("--config", er_config, "Pipeline config; required for --system pipeline");
  er->add_option("--system", er_system, "pipeline or backend")->check(CLI::IsMember({"pipeline", "backend"}));
  er->add_option("--backend", er_backend, "Endpoint for --system backend (mock when omitted)");
  er->add_option("--out", er_out, "Report path (stdout when omitted)");
  er->add_option("--results", er_results, "Raw results JSON-lines path");
  er->callback([&] {
    const auto items = evalkit::load_items(er_items);
    auto fallback = make_rule_judge(er_judge_config);
    std::unique_ptr<evalkit::Judge> judge;
    if (er_judge == "labels") {
      if (er_labels.empty()) throw InvalidArgument("--labels is required for --judge labels");
      std::map<std::string, evalkit::Verdict> labels;
      for (const auto& [id, v] : jsonl::read_json(er_labels).items())
        labels[id] = evalkit::verdict_from_string(v.get<std::string>());
      judge = std::make_unique<evalkit::LabelJudge>(labels, fallback.get());
    } else if (er_judge == "http") {
      if (er_url.empty()) throw InvalidArgument("--judge-url is required for --judge http");
      judge = std::make_unique<evalkit::HttpJudge>(er_url);
    } else {
      judge = std::move(fallback);
    }
    evalkit::System system;
    evalkit::BenchOptions opts;
    std::shared_ptr<pipeline::PipelineContext> ctx;
    std::shared_ptr<pipeline::GenerationBackend> backend;
    if (er_system == "pipeline") {
      if (er_config.empty()) throw InvalidArgument("--config is required for --system pipeline");
      ctx = std::make_shared<pipeline::PipelineContext>(pipeline::make_context(pipeline::load_config(er_config)));
      system = [ctx](const evalkit::EvalItem& item) {
        pipeline::Session s{"eval:" + item.id, {}, 8};
        return pipeline::run_pipeline(s, item.question, *ctx).text;
      };
      for (const auto& [_, t] : ctx->rules->templates()) opts.refusals.templates.push_back(t);
      opts.system_id = "pipeline:" + ctx->backend->id();
    } else {
      backend = make_backend(er_backend);
      system = [backend](const evalkit::EvalItem& item) { return generate(*backend, item.question); };
      opts.system_id = backend->id();
    }
    if (!er_judge_config.empty()) {
      const auto jc = jsonl::read_json(er_judge_config);
      for (const auto& t : jc.value("refusal_templates", std::vector<std::string>{})) opts.refusals.templates.push_back(t);
      opts.refusals.phrases = jc.value("refusal_phrases", std::vector<std::string>{});
    }
    opts.timestamp = service::utc_now();
    const auto run = evalkit::run_bench(items, system, *judge, opts);
    if (!er_results.empty()) evalkit::save_results(er_results, run.results);
    write_or_print(er_out, run.report);
  });

  // chat
  auto* ch = app.add_subcommand("chat", "Answer questions through the pipeline");
  std::string ch_config, ch_q;
  bool ch_json = false;
  ch->add_option("--config", ch_config, "Pipeline config")->required()->check(CLI::ExistingFile);
  ch->add_option("--q", ch_q, "Single question; reads lines from stdin when omitted");
  ch->add_flag("--json", ch_json, "Print the full answer record");
  ch->callback([&] {
    const auto cfg = pipeline::load_config(ch_config);
    const auto ctx = pipeline::make_context(cfg);
    pipeline::Session session{"cli", {}, cfg.memory_budget};
    auto answer = [&](const std::string& q) {
      const auto a = pipeline::run_pipeline(session, q, ctx);
      if (ch_json)
        print(pipeline::to_json(a));
      else
        std::cout << a.text << (a.text.empty() || a.text.back() != '\n' ? "\n" : "");
    };
    if (!ch_q.empty()) {
      answer(ch_q);
      return;
    }
    std::string line;
    while (std::getline(std::cin, line))
      if (!line.empty()) answer(line);
  });

  // serve
  auto* sv = app.add_subcommand("serve", "Run the HTTP service");
  auto sv_cfg = service::ServiceConfig::from_env();
  std::string sv_pipeline, sv_mode = "single";
  sv->add_option("--data-dir", sv_cfg.data_dir, "State directory");
  sv->add_option("--host", sv_cfg.host, "Bind address");
  sv->add_option("--port", sv_cfg.port, "Port (0 picks one)");
  sv->add_option("--config", sv_pipeline, "Pipeline config");
  sv->add_option("--mode", sv_mode, "Default labeling mode")->check(CLI::IsMember({"single", "dual"}));
  sv->callback([&] {
    if (!sv_pipeline.empty()) sv_cfg.pipeline_config = sv_pipeline;
    sv_cfg.default_mode = service::label_mode_from_string(sv_mode);
    service::Service svc(sv_cfg);
    service::Server server(svc);
    const int port = server.bind(sv_cfg.host, sv_cfg.port);
    std::cerr << "listening on " << sv_cfg.host << ":" << port << "\n";
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    server.listen();
    g_server = nullptr;
    svc.shutdown();
    std::cerr << "checkpoint written\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
