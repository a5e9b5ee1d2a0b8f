#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>

#include <nlohmann/json.hpp>

#include "align/pipeline/pipeline.hpp"
#include "align/service/annotation_store.hpp"

namespace align::service {

struct ServiceConfig {
  std::filesystem::path data_dir = "data";
  std::string host = "127.0.0.1";
  int port = 8080;
  /// Pipeline key-value config; without one, rules.jsonl, templates.json and
  /// index.json are looked up in data_dir and the mock backend is used.
  std::optional<std::filesystem::path> pipeline_config;
  LabelMode default_mode = LabelMode::single;
  AnnotationStore::Clock clock;

  /// ALIGN_DATA_DIR and ALIGN_PORT override the defaults.
  static ServiceConfig from_env();
};

struct Response {
  int status = 200;
  nlohmann::json body;
};

/// Endpoint logic independent of the HTTP transport. Every body carries
/// schema_version; errors are {"error": {"code", "message"}}.
class Service {
public:
  explicit Service(ServiceConfig config);

  Response healthz() const;
  Response chat(const nlohmann::json& body);
  Response add_docs(std::string_view jsonl_body);
  Response rebuild_index();
  Response eval_run(const nlohmann::json& body);
  Response eval_report(const std::string& run_id);
  Response enqueue(const nlohmann::json& body);
  Response next(const std::string& annotator_id);
  Response label(const std::string& task_id, const nlohmann::json& body, const std::string& header_annotator = {});
  Response release(const std::string& task_id, const nlohmann::json& body, const std::string& header_annotator = {});
  Response agreement(const std::string& run_id);
  Response tasks(const std::optional<std::string>& run_id);
  Response annotator(const std::string& annotator_id);

  /// Writes the annotation checkpoint.
  void shutdown();

  AnnotationStore& store() { return store_; }
  const ServiceConfig& config() const { return config_; }

private:
  std::shared_ptr<const pipeline::PipelineContext> context() const;
  std::filesystem::path corpus_path() const;
  std::filesystem::path index_path() const;

  ServiceConfig config_;
  AnnotationStore store_;
  std::optional<pipeline::PipelineConfig> pipeline_config_;
  mutable std::shared_mutex context_mutex_;
  std::shared_ptr<const pipeline::PipelineContext> context_;
  std::unique_ptr<pipeline::SessionStore> sessions_;
  std::mutex corpus_mutex_;
  std::mutex runs_mutex_;
};

/// HTTP front end over a Service.
class Server {
public:
  explicit Server(Service& service);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Port 0 picks a free port. Throws Error when the address is unavailable.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void listen();
  void stop();

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace align::service
