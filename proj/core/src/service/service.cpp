#include "align/service/service.hpp"

#include <cstdio>
#include <cstdlib>
#include <set>

#include "align/error.hpp"
#include "align/jsonl.hpp"
#include "align/text.hpp"
#include "align/version.hpp"

namespace align::service {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kDefaultRefusal = "I'm sorry, but I can't help with that request.";

Response ok(json body, int status = 200) {
  body["schema_version"] = kSchemaVersion;
  return {status, std::move(body)};
}

Response error(int status, std::string_view code, const std::string& message) {
  return {status, {{"schema_version", kSchemaVersion}, {"error", {{"code", code}, {"message", message}}}}};
}

template <class F>
Response guarded(F&& f) {
  try {
    return f();
  } catch (const NotFound& e) {
    return error(404, "not_found", e.what());
  } catch (const Conflict& e) {
    return error(409, "conflict", e.what());
  } catch (const InvalidArgument& e) {
    return error(400, "invalid_argument", e.what());
  } catch (const ParseError& e) {
    return error(400, "parse_error", e.what());
  } catch (const json::exception& e) {
    return error(400, "bad_json", e.what());
  } catch (const pipeline::PipelineError& e) {
    return error(502, "pipeline_" + e.stage(), e.what());
  } catch (const BackendError& e) {
    return error(502, "backend", e.what());
  } catch (const std::exception& e) {
    return error(500, "internal", e.what());
  }
}

std::string annotator_of(const json& body, const std::string& header) {
  if (body.is_object() && body.contains("annotator")) return body["annotator"].get<std::string>();
  if (body.is_object() && body.contains("annotator_id")) return body["annotator_id"].get<std::string>();
  if (!header.empty()) return header;
  throw InvalidArgument("annotator id required");
}

}  // namespace

ServiceConfig ServiceConfig::from_env() {
  ServiceConfig c;
  if (const char* d = std::getenv("ALIGN_DATA_DIR"); d && *d) c.data_dir = d;
  if (const char* p = std::getenv("ALIGN_PORT"); p && *p) {
    try {
      c.port = std::stoi(p);
    } catch (const std::exception&) {
      throw InvalidArgument("ALIGN_PORT is not a number: " + std::string(p));
    }
  }
  return c;
}

Service::Service(ServiceConfig config)
    : config_(std::move(config)), store_(config_.data_dir / "annotations", config_.clock) {
  pipeline::PipelineConfig pc;
  std::shared_ptr<const pipeline::RuleSet> rules;
  if (config_.pipeline_config) {
    pc = pipeline::load_config(*config_.pipeline_config);
  } else {
    pc.index_path = config_.data_dir / "index.json";
    pc.rules_path = config_.data_dir / "rules.jsonl";
    pc.templates_path = config_.data_dir / "templates.json";
    if (!fs::exists(pc.rules_path) || !fs::exists(pc.templates_path))
      rules = std::make_shared<pipeline::RuleSet>(
          std::vector<pipeline::PolicyRule>{},
          std::map<std::string, std::string>{{"default", std::string(kDefaultRefusal)}});
  }
  std::shared_ptr<const retrieval::InvertedIndex> index;
  if (pc.index_path.empty() || !fs::exists(pc.index_path)) index = std::make_shared<retrieval::InvertedIndex>();
  pipeline_config_ = pc;
  context_ = std::make_shared<pipeline::PipelineContext>(pipeline::make_context(pc, index, rules));
  sessions_ = std::make_unique<pipeline::SessionStore>(pc.memory_budget);
}

std::shared_ptr<const pipeline::PipelineContext> Service::context() const {
  std::shared_lock lock(context_mutex_);
  return context_;
}

fs::path Service::corpus_path() const { return config_.data_dir / "corpus.jsonl"; }

fs::path Service::index_path() const {
  return pipeline_config_->index_path.empty() ? config_.data_dir / "index.json" : pipeline_config_->index_path;
}

Response Service::healthz() const {
  return ok({{"status", "ok"}, {"version", build_version()}});
}

Response Service::chat(const json& body) {
  return guarded([&] {
    const auto session_id = body.at("session_id").get<std::string>();
    const auto query = body.at("query").get<std::string>();
    if (session_id.empty()) throw InvalidArgument("session_id required");
    const auto ctx = context();
    auto answer = sessions_->answer(session_id, query, *ctx);
    auto j = pipeline::to_json(answer);
    j["session_id"] = session_id;
    return ok(std::move(j));
  });
}

Response Service::add_docs(std::string_view jsonl_body) {
  return guarded([&] {
    auto docs = retrieval::parse_corpus(jsonl_body);
    if (docs.empty()) throw InvalidArgument("no documents in body");
    std::lock_guard lock(corpus_mutex_);
    std::set<std::string> ids;
    if (fs::exists(corpus_path()))
      for (const auto& d : retrieval::load_corpus(corpus_path())) ids.insert(d.id);
    for (const auto& d : docs) {
      if (d.id.empty() || d.text.empty()) throw InvalidArgument("document needs id and text");
      if (!ids.insert(d.id).second) throw Conflict("duplicate document id: " + d.id);
    }
    for (const auto& d : docs) jsonl::append(corpus_path(), json(d));
    return ok({{"added", docs.size()}, {"total", ids.size()}});
  });
}

Response Service::rebuild_index() {
  return guarded([&] {
    std::lock_guard lock(corpus_mutex_);
    if (!fs::exists(corpus_path())) throw InvalidArgument("corpus is empty");
    auto index = std::make_shared<retrieval::InvertedIndex>(retrieval::InvertedIndex::build(retrieval::load_corpus(corpus_path())));
    index->save(index_path());
    auto next = std::make_shared<pipeline::PipelineContext>(*context());
    next->index = index;
    {
      std::unique_lock wl(context_mutex_);
      context_ = next;
    }
    return ok({{"documents", index->doc_count()}, {"terms", index->all_postings().size()}});
  });
}

Response Service::eval_run(const json& body) {
  return guarded([&] {
    std::vector<evalkit::EvalItem> items;
    if (body.contains("items")) {
      for (const auto& j : body["items"]) {
        auto item = j.get<evalkit::EvalItem>();
        evalkit::validate(item);
        items.push_back(std::move(item));
      }
    } else if (body.contains("items_path")) {
      items = evalkit::load_items(body["items_path"].get<std::string>());
    } else {
      throw InvalidArgument("items or items_path required");
    }
    if (items.empty()) throw InvalidArgument("no eval items");

    const auto ctx = context();
    evalkit::RefusalDetector refusals;
    for (const auto& [_, t] : ctx->rules->templates()) refusals.templates.push_back(t);
    std::vector<std::string> unsafe;
    if (body.contains("judge") && body["judge"].is_object()) {
      const auto& jc = body["judge"];
      for (const auto& t : jc.value("refusal_templates", std::vector<std::string>{})) refusals.templates.push_back(t);
      refusals.phrases = jc.value("refusal_phrases", std::vector<std::string>{});
      unsafe = jc.value("unsafe_phrases", std::vector<std::string>{});
    }
    evalkit::RuleJudge judge(refusals, unsafe);

    const auto system_kind = body.value("system", std::string("pipeline"));
    evalkit::System system;
    if (system_kind == "pipeline") {
      system = [ctx](const evalkit::EvalItem& item) {
        pipeline::Session session{"eval:" + item.id, {}, 8};
        return pipeline::run_pipeline(session, item.question, *ctx).text;
      };
    } else if (system_kind == "backend") {
      system = [ctx](const evalkit::EvalItem& item) {
        pipeline::GenerationRequest req;
        req.system_instructions = std::string(pipeline::kBaseInstructions);
        req.query = item.question;
        return ctx->backend->generate(req);
      };
    } else {
      throw InvalidArgument("system must be pipeline or backend");
    }

    evalkit::BenchOptions options;
    options.system_id = system_kind == "pipeline" ? "pipeline:" + ctx->backend->id() : ctx->backend->id();
    options.timestamp = body.value("timestamp", config_.clock ? config_.clock() : utc_now());
    options.refusals = refusals;

    std::lock_guard lock(runs_mutex_);
    std::string run_id = body.value("run_id", std::string());
    if (run_id.empty()) {
      const auto existing = store_.run_ids();
      for (std::size_t n = existing.size() + 1;; ++n) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "run-%04zu", n);
        if (!store_.has_run(buf)) {
          run_id = buf;
          break;
        }
      }
    }
    if (store_.has_run(run_id)) throw Conflict("run exists: " + run_id);

    auto run = evalkit::run_bench(items, system, judge, options);
    RunRecord record{run_id, options.system_id, judge.id(), options.timestamp,
                     body.contains("mode") ? label_mode_from_string(body["mode"].get<std::string>()) : config_.default_mode,
                     items, run.results, refusals};
    store_.register_run(record);
    auto report = store_.report(run_id);
    return ok({{"run_id", run_id}, {"report", report}}, 201);
  });
}

Response Service::eval_report(const std::string& run_id) {
  return guarded([&] { return ok(store_.report(run_id)); });
}

Response Service::enqueue(const json& body) {
  return guarded([&] {
    const auto run_id = body.at("run_id").get<std::string>();
    const auto sampling = Sampling::parse(body.value("sampling", std::string("all")), body.value("n", std::size_t{0}),
                                          body.value("seed", std::uint64_t{0}));
    const auto res = store_.enqueue(run_id, sampling);
    return ok({{"run_id", run_id}, {"created", res.created}, {"task_ids", res.task_ids}});
  });
}

Response Service::next(const std::string& annotator_id) {
  return guarded([&] {
    const auto t = store_.next(annotator_id);
    return ok({{"task", t ? to_json(*t) : json(nullptr)}});
  });
}

Response Service::label(const std::string& task_id, const json& body, const std::string& header_annotator) {
  return guarded([&] {
    const auto who = annotator_of(body, header_annotator);
    const auto verdict = evalkit::verdict_from_string(body.at("label").get<std::string>());
    const auto t = store_.label(task_id, who, verdict, body.value("note", std::string()));
    return ok({{"task", to_json(t)}});
  });
}

Response Service::release(const std::string& task_id, const json& body, const std::string& header_annotator) {
  return guarded([&] {
    const auto t = store_.release(task_id, annotator_of(body, header_annotator));
    return ok({{"task", to_json(t)}});
  });
}

Response Service::agreement(const std::string& run_id) {
  return guarded([&] {
    const auto a = store_.agreement(run_id);
    return ok({{"run_id", run_id}, {"items", a.items}, {"percent_agreement", a.percent_agreement}});
  });
}

Response Service::tasks(const std::optional<std::string>& run_id) {
  return guarded([&] {
    json list = json::array();
    std::size_t labeled = 0;
    const auto all = store_.tasks(run_id);
    for (const auto& t : all) {
      list.push_back(to_json(t));
      labeled += t.status == TaskStatus::labeled ? 1 : 0;
    }
    return ok({{"tasks", list}, {"total", all.size()}, {"labeled", labeled}});
  });
}

Response Service::annotator(const std::string& annotator_id) {
  return guarded([&] {
    const auto r = store_.annotator(annotator_id);
    return ok({{"annotator_id", r.annotator_id},
               {"display_name", r.display_name},
               {"labels_submitted", r.labels_submitted}});
  });
}

void Service::shutdown() { store_.checkpoint(); }

}  // namespace align::service
