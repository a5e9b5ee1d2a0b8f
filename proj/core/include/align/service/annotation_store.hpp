#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "align/evalkit/bench.hpp"

namespace align::service {

inline constexpr int kSchemaVersion = 1;

enum class TaskStatus { pending, assigned, labeled };
enum class LabelMode { single, dual };

std::string_view to_string(TaskStatus s);
std::string_view to_string(LabelMode m);
LabelMode label_mode_from_string(std::string_view s);

struct AnnotationTask {
  std::string task_id;
  std::string run_id;
  std::string item_id;
  int slot = 0;  // 1 for the second label of an item in dual mode
  std::string question;
  std::string response;
  TaskStatus status = TaskStatus::pending;
  std::optional<std::string> assigned_to;
  std::optional<evalkit::Verdict> label;
  std::optional<std::string> note;
  std::optional<std::string> labeled_at;
};

nlohmann::json to_json(const AnnotationTask& t);

struct AnnotatorRecord {
  std::string annotator_id;
  std::string display_name;
  std::size_t labels_submitted = 0;
};

struct AgreementStat {
  std::size_t items = 0;
  double percent_agreement = 0.0;
};

/// An evaluation run as persisted under runs/<run_id>/.
struct RunRecord {
  std::string run_id;
  std::string system_id;
  std::string judge_id;
  std::string timestamp;
  LabelMode mode = LabelMode::single;
  std::vector<evalkit::EvalItem> items;
  std::vector<evalkit::RawResult> results;
  evalkit::RefusalDetector refusals;
};

struct Sampling {
  enum class Kind { all, first_n, random_n } kind = Kind::all;
  std::size_t n = 0;
  std::uint64_t seed = 0;

  /// "all", "first-n" or "seeded-random-n"/"random-n".
  static Sampling parse(std::string_view kind, std::size_t n, std::uint64_t seed);
};

struct EnqueueResult {
  std::size_t created = 0;
  std::vector<std::string> task_ids;  // every sampled task, new or existing
};

/// File-backed annotation state. Every mutation is one line appended to
/// events.jsonl; the in-memory state is a fold over those lines. checkpoint()
/// writes a snapshot that startup resumes from; the log itself is kept.
class AnnotationStore {
public:
  using Clock = std::function<std::string()>;

  explicit AnnotationStore(std::filesystem::path dir, Clock clock = {});

  const std::filesystem::path& dir() const noexcept { return dir_; }

  /// Persists the run and its results. Throws Conflict if the id exists.
  void register_run(const RunRecord& run);
  bool has_run(const std::string& run_id) const;
  RunRecord run(const std::string& run_id) const;
  std::vector<std::string> run_ids() const;

  /// Results with a generation error are never queued. Re-enqueueing the
  /// same (run, item) is a no-op.
  EnqueueResult enqueue(const std::string& run_id, const Sampling& sampling);

  /// The task already assigned to this annotator, else the first pending
  /// one (assigning it). Never hands both slots of an item to one annotator.
  std::optional<AnnotationTask> next(const std::string& annotator_id);

  /// assigned -> pending; only by the holder.
  AnnotationTask release(const std::string& task_id, const std::string& annotator_id);

  /// Compare-and-set: succeeds only on a pending task or one assigned to
  /// this annotator. Throws Conflict otherwise, NotFound for unknown ids.
  AnnotationTask label(const std::string& task_id, const std::string& annotator_id, evalkit::Verdict verdict,
                       const std::string& note = {});

  AnnotationTask task(const std::string& task_id) const;
  std::vector<AnnotationTask> tasks(const std::optional<std::string>& run_id = std::nullopt) const;
  AnnotatorRecord annotator(const std::string& annotator_id) const;
  void set_display_name(const std::string& annotator_id, const std::string& display_name);

  /// Human label per item: the earliest label event of the item.
  std::map<std::string, evalkit::Verdict> labels(const std::string& run_id) const;

  AgreementStat agreement(const std::string& run_id) const;

  /// Report recomputed from the run's results with human labels overriding
  /// judge verdicts; also written to reports/<run_id>.json.
  nlohmann::json report(const std::string& run_id);
  /// Pure recomputation, nothing written.
  nlohmann::json compute_report(const std::string& run_id) const;
  std::optional<std::string> stored_report(const std::string& run_id) const;

  void checkpoint();
  std::uint64_t last_seq() const;

  /// For every stored report, folds the log from its first line up to the
  /// report's label_log_seq and recomputes it; returns the run ids whose
  /// stored bytes differ.
  static std::vector<std::string> verify_reports(const std::filesystem::path& dir);

  static std::string task_id_for(const std::string& run_id, const std::string& item_id, int slot);

private:
  struct State {
    std::uint64_t seq = 0;
    std::map<std::string, LabelMode> runs;
    std::vector<std::string> order;  // task ids in enqueue order
    std::map<std::string, AnnotationTask> tasks;
    std::map<std::string, std::uint64_t> label_seq;  // task -> seq of its label
    std::map<std::string, std::string> display_names;
  };

  static void apply(State& s, const nlohmann::json& event);
  static State fold_log(const std::filesystem::path& dir, State start, std::uint64_t until = UINT64_MAX);
  static RunRecord read_run(const std::filesystem::path& dir, const std::string& run_id);
  static std::map<std::string, evalkit::Verdict> labels_of(const State& s, const std::string& run_id);
  static nlohmann::json report_for(const State& s, const std::filesystem::path& dir, const std::string& run_id);
  static nlohmann::json state_to_json(const State& s);
  static State state_from_json(const nlohmann::json& j);
  static std::string dump_report(const nlohmann::json& report);

  void emit(nlohmann::json event);
  AnnotationTask& task_locked(const std::string& task_id);

  std::filesystem::path dir_;
  Clock clock_;
  mutable std::mutex mutex_;
  State state_;
};

/// ISO-8601 UTC, second precision.
std::string utc_now();

}  // namespace align::service
