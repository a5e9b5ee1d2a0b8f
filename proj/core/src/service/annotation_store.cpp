#include "align/service/annotation_store.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <random>
#include <set>

#include "align/error.hpp"
#include "align/jsonl.hpp"
#include "align/text.hpp"

namespace align::service {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kEvents = "events.jsonl";
constexpr const char* kSnapshot = "snapshot.json";

TaskStatus status_from_string(std::string_view s) {
  if (s == "pending") return TaskStatus::pending;
  if (s == "assigned") return TaskStatus::assigned;
  if (s == "labeled") return TaskStatus::labeled;
  throw ParseError("unknown task status: " + std::string(s));
}

template <class T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

std::optional<std::string> opt_string(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<std::string>();
}

AnnotationTask task_from_json(const json& j) {
  AnnotationTask t;
  t.task_id = j.at("task_id").get<std::string>();
  t.run_id = j.at("run_id").get<std::string>();
  t.item_id = j.at("item_id").get<std::string>();
  t.slot = j.value("slot", 0);
  t.question = j.value("question", std::string());
  t.response = j.value("response", std::string());
  t.status = status_from_string(j.at("status").get<std::string>());
  t.assigned_to = opt_string(j, "assigned_to");
  if (auto l = opt_string(j, "label")) t.label = evalkit::verdict_from_string(*l);
  t.note = opt_string(j, "note");
  t.labeled_at = opt_string(j, "labeled_at");
  return t;
}

void check_run_id(const std::string& id) {
  if (id.empty() || id.size() > 128) throw InvalidArgument("bad run id");
  for (char c : id)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.'))
      throw InvalidArgument("run id may only contain letters, digits, '-', '_' and '.'");
  if (id == "." || id == "..") throw InvalidArgument("bad run id");
}

}  // namespace

std::string_view to_string(TaskStatus s) {
  switch (s) {
    case TaskStatus::pending:
      return "pending";
    case TaskStatus::assigned:
      return "assigned";
    case TaskStatus::labeled:
      return "labeled";
  }
  return "?";
}

std::string_view to_string(LabelMode m) { return m == LabelMode::single ? "single" : "dual"; }

LabelMode label_mode_from_string(std::string_view s) {
  if (s == "single") return LabelMode::single;
  if (s == "dual") return LabelMode::dual;
  throw InvalidArgument("unknown label mode: " + std::string(s));
}

json to_json(const AnnotationTask& t) {
  json j = {{"task_id", t.task_id},   {"run_id", t.run_id},     {"item_id", t.item_id},
            {"slot", t.slot},         {"question", t.question}, {"response", t.response},
            {"status", to_string(t.status)}};
  j["assigned_to"] = opt(t.assigned_to);
  j["label"] = t.label ? json(evalkit::to_string(*t.label)) : json(nullptr);
  j["note"] = opt(t.note);
  j["labeled_at"] = opt(t.labeled_at);
  return j;
}

Sampling Sampling::parse(std::string_view kind, std::size_t n, std::uint64_t seed) {
  Sampling s;
  s.n = n;
  s.seed = seed;
  if (kind == "all")
    s.kind = Kind::all;
  else if (kind == "first-n" || kind == "first_n")
    s.kind = Kind::first_n;
  else if (kind == "seeded-random-n" || kind == "random-n" || kind == "random_n")
    s.kind = Kind::random_n;
  else
    throw InvalidArgument("unknown sampling: " + std::string(kind));
  return s;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string AnnotationStore::task_id_for(const std::string& run_id, const std::string& item_id, int slot) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "t-%016llx",
                static_cast<unsigned long long>(text::hash_fields({run_id, item_id, std::to_string(slot)})));
  return buf;
}

AnnotationStore::AnnotationStore(fs::path dir, Clock clock) : dir_(std::move(dir)), clock_(std::move(clock)) {
  if (!clock_) clock_ = utc_now;
  fs::create_directories(dir_);
  State start;
  if (fs::exists(dir_ / kSnapshot)) start = state_from_json(jsonl::read_json(dir_ / kSnapshot));
  state_ = fold_log(dir_, std::move(start));
}

AnnotationStore::State AnnotationStore::fold_log(const fs::path& dir, State start, std::uint64_t until) {
  if (!fs::exists(dir / kEvents)) return start;
  for (const auto& ev : jsonl::read_file(dir / kEvents)) {
    const auto seq = ev.at("seq").get<std::uint64_t>();
    if (seq <= start.seq) continue;
    if (seq > until) break;
    if (seq != start.seq + 1) throw ParseError("event log gap before seq " + std::to_string(seq));
    apply(start, ev);
  }
  return start;
}

void AnnotationStore::apply(State& s, const json& ev) {
  const auto type = ev.at("type").get<std::string>();
  s.seq = ev.at("seq").get<std::uint64_t>();
  if (type == "run") {
    s.runs[ev.at("run_id").get<std::string>()] = label_mode_from_string(ev.at("mode").get<std::string>());
    return;
  }
  if (type == "annotator") {
    s.display_names[ev.at("annotator").get<std::string>()] = ev.at("display_name").get<std::string>();
    return;
  }
  if (type == "enqueue") {
    auto t = task_from_json(ev.at("task"));
    if (t.status != TaskStatus::pending) throw ParseError("enqueued task must be pending");
    if (s.tasks.count(t.task_id)) throw ParseError("task enqueued twice: " + t.task_id);
    s.order.push_back(t.task_id);
    s.tasks.emplace(t.task_id, std::move(t));
    return;
  }
  const auto task_id = ev.at("task_id").get<std::string>();
  auto it = s.tasks.find(task_id);
  if (it == s.tasks.end()) throw ParseError("event for unknown task: " + task_id);
  auto& t = it->second;
  const auto who = ev.at("annotator").get<std::string>();
  if (type == "assign") {
    if (t.status != TaskStatus::pending) throw ParseError("assign from non-pending task " + task_id);
    t.status = TaskStatus::assigned;
    t.assigned_to = who;
  } else if (type == "release") {
    if (t.status != TaskStatus::assigned || t.assigned_to != who)
      throw ParseError("release of task not held: " + task_id);
    t.status = TaskStatus::pending;
    t.assigned_to.reset();
  } else if (type == "label") {
    if (t.status != TaskStatus::assigned || t.assigned_to != who)
      throw ParseError("label on task not assigned to labeler: " + task_id);
    t.status = TaskStatus::labeled;
    t.label = evalkit::verdict_from_string(ev.at("label").get<std::string>());
    t.note = opt_string(ev, "note");
    t.labeled_at = ev.at("labeled_at").get<std::string>();
    s.label_seq[task_id] = s.seq;
  } else {
    throw ParseError("unknown event type: " + type);
  }
}

json AnnotationStore::state_to_json(const State& s) {
  json tasks = json::array();
  for (const auto& id : s.order) tasks.push_back(to_json(s.tasks.at(id)));
  json runs = json::object();
  for (const auto& [id, mode] : s.runs) runs[id] = to_string(mode);
  return {{"seq", s.seq}, {"runs", runs}, {"tasks", tasks}, {"label_seq", s.label_seq},
          {"display_names", s.display_names}};
}

AnnotationStore::State AnnotationStore::state_from_json(const json& j) {
  State s;
  s.seq = j.at("seq").get<std::uint64_t>();
  for (const auto& [id, mode] : j.at("runs").items()) s.runs[id] = label_mode_from_string(mode.get<std::string>());
  for (const auto& tj : j.at("tasks")) {
    auto t = task_from_json(tj);
    s.order.push_back(t.task_id);
    s.tasks.emplace(t.task_id, std::move(t));
  }
  s.label_seq = j.at("label_seq").get<std::map<std::string, std::uint64_t>>();
  s.display_names = j.at("display_names").get<std::map<std::string, std::string>>();
  return s;
}

void AnnotationStore::emit(json event) {
  // callers have checked the transition under the lock
  event["seq"] = state_.seq + 1;
  jsonl::append(dir_ / kEvents, event);
  apply(state_, event);
}

void AnnotationStore::register_run(const RunRecord& run) {
  check_run_id(run.run_id);
  std::lock_guard lock(mutex_);
  if (state_.runs.count(run.run_id)) throw Conflict("run exists: " + run.run_id);
  const auto rdir = dir_ / "runs" / run.run_id;
  fs::create_directories(rdir);
  std::vector<json> items(run.items.begin(), run.items.end());
  jsonl::write_file(rdir / "items.jsonl", items);
  evalkit::save_results(rdir / "results.jsonl", run.results);
  jsonl::write_json(rdir / "run.json", {{"run_id", run.run_id},
                                        {"system_id", run.system_id},
                                        {"judge_id", run.judge_id},
                                        {"timestamp", run.timestamp},
                                        {"mode", to_string(run.mode)},
                                        {"refusal_templates", run.refusals.templates},
                                        {"refusal_phrases", run.refusals.phrases}});
  emit({{"type", "run"}, {"run_id", run.run_id}, {"mode", to_string(run.mode)}});
}

bool AnnotationStore::has_run(const std::string& run_id) const {
  std::lock_guard lock(mutex_);
  return state_.runs.count(run_id) > 0;
}

std::vector<std::string> AnnotationStore::run_ids() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, _] : state_.runs) out.push_back(id);
  return out;
}

RunRecord AnnotationStore::read_run(const fs::path& dir, const std::string& run_id) {
  const auto rdir = dir / "runs" / run_id;
  const auto meta = jsonl::read_json(rdir / "run.json");
  RunRecord r;
  r.run_id = run_id;
  r.system_id = meta.at("system_id").get<std::string>();
  r.judge_id = meta.at("judge_id").get<std::string>();
  r.timestamp = meta.at("timestamp").get<std::string>();
  r.mode = label_mode_from_string(meta.at("mode").get<std::string>());
  r.refusals.templates = meta.value("refusal_templates", std::vector<std::string>{});
  r.refusals.phrases = meta.value("refusal_phrases", std::vector<std::string>{});
  for (const auto& row : jsonl::read_file(rdir / "items.jsonl")) r.items.push_back(row.get<evalkit::EvalItem>());
  r.results = evalkit::load_results(rdir / "results.jsonl");
  return r;
}

RunRecord AnnotationStore::run(const std::string& run_id) const {
  {
    std::lock_guard lock(mutex_);
    if (!state_.runs.count(run_id)) throw NotFound("unknown run: " + run_id);
  }
  return read_run(dir_, run_id);
}

EnqueueResult AnnotationStore::enqueue(const std::string& run_id, const Sampling& sampling) {
  const auto record = run(run_id);
  std::map<std::string, const evalkit::EvalItem*> items;
  for (const auto& i : record.items) items[i.id] = &i;

  std::vector<const evalkit::RawResult*> eligible;
  for (const auto& r : record.results)
    if (!(r.error && r.error->rfind("generation", 0) == 0)) eligible.push_back(&r);
  std::sort(eligible.begin(), eligible.end(), [](auto* a, auto* b) { return a->item_id < b->item_id; });

  std::vector<const evalkit::RawResult*> chosen;
  switch (sampling.kind) {
    case Sampling::Kind::all:
      chosen = eligible;
      break;
    case Sampling::Kind::first_n:
      chosen.assign(eligible.begin(), eligible.begin() + static_cast<std::ptrdiff_t>(std::min(sampling.n, eligible.size())));
      break;
    case Sampling::Kind::random_n: {
      auto pool = eligible;
      std::mt19937_64 rng(sampling.seed);
      for (std::size_t i = pool.size(); i > 1; --i) std::swap(pool[i - 1], pool[rng() % i]);
      pool.resize(std::min(sampling.n, pool.size()));
      std::sort(pool.begin(), pool.end(), [](auto* a, auto* b) { return a->item_id < b->item_id; });
      chosen = pool;
      break;
    }
  }

  std::lock_guard lock(mutex_);
  EnqueueResult out;
  const int slots = state_.runs.at(run_id) == LabelMode::dual ? 2 : 1;
  for (const auto* r : chosen) {
    for (int slot = 0; slot < slots; ++slot) {
      AnnotationTask t;
      t.task_id = task_id_for(run_id, r->item_id, slot);
      out.task_ids.push_back(t.task_id);
      if (state_.tasks.count(t.task_id)) continue;
      t.run_id = run_id;
      t.item_id = r->item_id;
      t.slot = slot;
      t.question = items.count(r->item_id) ? items[r->item_id]->question : std::string();
      t.response = r->response;
      emit({{"type", "enqueue"}, {"task", to_json(t)}});
      ++out.created;
    }
  }
  return out;
}

AnnotationTask& AnnotationStore::task_locked(const std::string& task_id) {
  auto it = state_.tasks.find(task_id);
  if (it == state_.tasks.end()) throw NotFound("unknown task: " + task_id);
  return it->second;
}

std::optional<AnnotationTask> AnnotationStore::next(const std::string& annotator_id) {
  if (annotator_id.empty()) throw InvalidArgument("annotator id required");
  std::lock_guard lock(mutex_);
  for (const auto& id : state_.order) {
    const auto& t = state_.tasks.at(id);
    if (t.status == TaskStatus::assigned && t.assigned_to == annotator_id) return t;
  }
  std::set<std::pair<std::string, std::string>> touched;  // (run, item) this annotator holds or labeled
  for (const auto& [_, t] : state_.tasks)
    if (t.assigned_to == annotator_id) touched.emplace(t.run_id, t.item_id);
  for (const auto& id : state_.order) {
    const auto& t = state_.tasks.at(id);
    if (t.status != TaskStatus::pending || touched.count({t.run_id, t.item_id})) continue;
    emit({{"type", "assign"}, {"task_id", id}, {"annotator", annotator_id}});
    return state_.tasks.at(id);
  }
  return std::nullopt;
}

AnnotationTask AnnotationStore::release(const std::string& task_id, const std::string& annotator_id) {
  std::lock_guard lock(mutex_);
  const auto& t = task_locked(task_id);
  if (t.status != TaskStatus::assigned || t.assigned_to != annotator_id)
    throw Conflict("task not assigned to " + annotator_id + ": " + task_id);
  emit({{"type", "release"}, {"task_id", task_id}, {"annotator", annotator_id}});
  return state_.tasks.at(task_id);
}

AnnotationTask AnnotationStore::label(const std::string& task_id, const std::string& annotator_id,
                                      evalkit::Verdict verdict, const std::string& note) {
  if (annotator_id.empty()) throw InvalidArgument("annotator id required");
  std::lock_guard lock(mutex_);
  const auto& t = task_locked(task_id);
  if (t.status == TaskStatus::labeled) throw Conflict("task already labeled: " + task_id);
  if (t.status == TaskStatus::assigned && t.assigned_to != annotator_id)
    throw Conflict("task assigned to another annotator: " + task_id);
  if (t.status == TaskStatus::pending) {
    for (const auto& [id, other] : state_.tasks)
      if (id != task_id && other.run_id == t.run_id && other.item_id == t.item_id && other.assigned_to == annotator_id)
        throw Conflict("annotator already holds the other slot of item " + t.item_id);
    emit({{"type", "assign"}, {"task_id", task_id}, {"annotator", annotator_id}});
  }
  json ev = {{"type", "label"},
             {"task_id", task_id},
             {"annotator", annotator_id},
             {"label", evalkit::to_string(verdict)},
             {"labeled_at", clock_()}};
  ev["note"] = note.empty() ? json(nullptr) : json(note);
  emit(std::move(ev));
  return state_.tasks.at(task_id);
}

AnnotationTask AnnotationStore::task(const std::string& task_id) const {
  std::lock_guard lock(mutex_);
  auto it = state_.tasks.find(task_id);
  if (it == state_.tasks.end()) throw NotFound("unknown task: " + task_id);
  return it->second;
}

std::vector<AnnotationTask> AnnotationStore::tasks(const std::optional<std::string>& run_id) const {
  std::lock_guard lock(mutex_);
  std::vector<AnnotationTask> out;
  for (const auto& id : state_.order) {
    const auto& t = state_.tasks.at(id);
    if (!run_id || t.run_id == *run_id) out.push_back(t);
  }
  return out;
}

AnnotatorRecord AnnotationStore::annotator(const std::string& annotator_id) const {
  std::lock_guard lock(mutex_);
  AnnotatorRecord r{annotator_id, annotator_id, 0};
  if (auto it = state_.display_names.find(annotator_id); it != state_.display_names.end()) r.display_name = it->second;
  for (const auto& [_, t] : state_.tasks)
    if (t.status == TaskStatus::labeled && t.assigned_to == annotator_id) ++r.labels_submitted;
  return r;
}

std::map<std::string, evalkit::Verdict> AnnotationStore::labels_of(const State& s, const std::string& run_id) {
  std::map<std::string, std::pair<std::uint64_t, evalkit::Verdict>> first;
  for (const auto& [id, t] : s.tasks) {
    if (t.run_id != run_id || t.status != TaskStatus::labeled) continue;
    const auto seq = s.label_seq.at(id);
    auto it = first.find(t.item_id);
    if (it == first.end() || seq < it->second.first) first[t.item_id] = {seq, *t.label};
  }
  std::map<std::string, evalkit::Verdict> out;
  for (const auto& [item, v] : first) out[item] = v.second;
  return out;
}

std::map<std::string, evalkit::Verdict> AnnotationStore::labels(const std::string& run_id) const {
  std::lock_guard lock(mutex_);
  return labels_of(state_, run_id);
}

AgreementStat AnnotationStore::agreement(const std::string& run_id) const {
  std::lock_guard lock(mutex_);
  if (!state_.runs.count(run_id)) throw NotFound("unknown run: " + run_id);
  std::map<std::string, std::vector<std::pair<std::uint64_t, evalkit::Verdict>>> by_item;
  for (const auto& [id, t] : state_.tasks)
    if (t.run_id == run_id && t.status == TaskStatus::labeled) by_item[t.item_id].emplace_back(state_.label_seq.at(id), *t.label);
  AgreementStat stat;
  std::size_t agree = 0;
  for (auto& [_, labels] : by_item) {
    if (labels.size() < 2) continue;
    std::sort(labels.begin(), labels.end());
    ++stat.items;
    agree += labels[0].second == labels[1].second ? 1 : 0;
  }
  if (stat.items == 0) throw InvalidArgument("insufficient overlap");
  stat.percent_agreement = 100.0 * static_cast<double>(agree) / static_cast<double>(stat.items);
  return stat;
}

json AnnotationStore::report_for(const State& s, const fs::path& dir, const std::string& run_id) {
  if (!s.runs.count(run_id)) throw NotFound("unknown run: " + run_id);
  const auto r = read_run(dir, run_id);
  evalkit::BenchOptions options;
  options.system_id = r.system_id;
  options.timestamp = r.timestamp;
  options.refusals = r.refusals;
  auto report = evalkit::assemble_report(r.items, r.results, options, r.judge_id, labels_of(s, run_id));
  report["run_id"] = run_id;
  report["label_log_seq"] = s.seq;
  return report;
}

std::string AnnotationStore::dump_report(const json& report) { return report.dump(2) + "\n"; }

json AnnotationStore::compute_report(const std::string& run_id) const {
  std::lock_guard lock(mutex_);
  return report_for(state_, dir_, run_id);
}

json AnnotationStore::report(const std::string& run_id) {
  std::lock_guard lock(mutex_);
  auto report = report_for(state_, dir_, run_id);
  jsonl::write_text(dir_ / "reports" / (run_id + ".json"), dump_report(report));
  return report;
}

std::optional<std::string> AnnotationStore::stored_report(const std::string& run_id) const {
  const auto path = dir_ / "reports" / (run_id + ".json");
  if (!fs::exists(path)) return std::nullopt;
  return jsonl::read_text(path);
}

void AnnotationStore::checkpoint() {
  std::lock_guard lock(mutex_);
  const auto tmp = dir_ / (std::string(kSnapshot) + ".tmp");
  jsonl::write_json(tmp, state_to_json(state_));
  fs::rename(tmp, dir_ / kSnapshot);
}

void AnnotationStore::set_display_name(const std::string& annotator_id, const std::string& display_name) {
  if (annotator_id.empty()) throw InvalidArgument("annotator id required");
  std::lock_guard lock(mutex_);
  emit({{"type", "annotator"}, {"annotator", annotator_id}, {"display_name", display_name}});
}

std::uint64_t AnnotationStore::last_seq() const {
  std::lock_guard lock(mutex_);
  return state_.seq;
}

std::vector<std::string> AnnotationStore::verify_reports(const fs::path& dir) {
  std::vector<std::string> mismatched;
  if (!fs::exists(dir / "reports")) return mismatched;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir / "reports"))
    if (e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    const auto run_id = f.stem().string();
    const auto stored = jsonl::read_text(f);
    std::string recomputed;
    try {
      const auto as_of = nlohmann::json::parse(stored).at("label_log_seq").get<std::uint64_t>();
      const auto state = fold_log(dir, State{}, as_of);
      recomputed = dump_report(report_for(state, dir, run_id));
    } catch (const std::exception&) {
      mismatched.push_back(run_id);
      continue;
    }
    if (recomputed != stored) mismatched.push_back(run_id);
  }
  return mismatched;
}

}  // namespace align::service
