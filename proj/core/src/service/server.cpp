#include "align/error.hpp"
#include "align/service/service.hpp"

#include <httplib.h>

namespace align::service {

using nlohmann::json;

struct Server::Impl {
  Service& service;
  httplib::Server http;

  explicit Impl(Service& s) : service(s) {}

  static void send(httplib::Response& res, const Response& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  }

  static json body_json(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    return json::parse(req.body);
  }

  template <class F>
  static void with_json(const httplib::Request& req, httplib::Response& res, F&& f) {
    json body;
    try {
      body = body_json(req);
    } catch (const json::exception& e) {
      send(res, {400, {{"schema_version", kSchemaVersion}, {"error", {{"code", "bad_json"}, {"message", e.what()}}}}});
      return;
    }
    send(res, f(body));
  }

  void routes() {
    http.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) { send(res, service.healthz()); });
    http.Post("/v1/chat", [this](const httplib::Request& req, httplib::Response& res) {
      with_json(req, res, [&](const json& b) { return service.chat(b); });
    });
    http.Post("/v1/corpus/docs", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, service.add_docs(req.body));
    });
    http.Post("/v1/index/rebuild",
              [this](const httplib::Request&, httplib::Response& res) { send(res, service.rebuild_index()); });
    http.Post("/v1/eval/run", [this](const httplib::Request& req, httplib::Response& res) {
      with_json(req, res, [&](const json& b) { return service.eval_run(b); });
    });
    http.Get(R"(/v1/eval/report/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, service.eval_report(req.matches[1]));
    });
    http.Post("/v1/annotations/enqueue", [this](const httplib::Request& req, httplib::Response& res) {
      with_json(req, res, [&](const json& b) { return service.enqueue(b); });
    });
    http.Get("/v1/annotations/next", [this](const httplib::Request& req, httplib::Response& res) {
      auto who = req.get_param_value("annotator");
      if (who.empty()) who = req.get_header_value("X-Annotator-Id");
      send(res, service.next(who));
    });
    http.Get("/v1/annotations/tasks", [this](const httplib::Request& req, httplib::Response& res) {
      std::optional<std::string> run;
      if (req.has_param("run_id")) run = req.get_param_value("run_id");
      send(res, service.tasks(run));
    });
    http.Get(R"(/v1/annotations/agreement/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, service.agreement(req.matches[1]));
    });
    http.Post(R"(/v1/annotations/([^/]+)/label)", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string task_id = req.matches[1];
      with_json(req, res, [&](const json& b) { return service.label(task_id, b, req.get_header_value("X-Annotator-Id")); });
    });
    http.Post(R"(/v1/annotations/([^/]+)/release)", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string task_id = req.matches[1];
      with_json(req, res,
                [&](const json& b) { return service.release(task_id, b, req.get_header_value("X-Annotator-Id")); });
    });
    http.Get(R"(/v1/annotators/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, service.annotator(req.matches[1]));
    });
    http.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (!res.body.empty()) return;
      const std::string code = res.status == 404 ? "not_found" : "http_" + std::to_string(res.status);
      res.set_content(json({{"schema_version", kSchemaVersion}, {"error", {{"code", code}, {"message", "no such route"}}}}).dump(),
                      "application/json");
    });
    http.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      std::string what = "unknown error";
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        what = e.what();
      } catch (...) {
      }
      res.status = 500;
      res.set_content(json({{"schema_version", kSchemaVersion}, {"error", {{"code", "internal"}, {"message", what}}}}).dump(),
                      "application/json");
    });
  }
};

Server::Server(Service& service) : impl_(std::make_unique<Impl>(service)) { impl_->routes(); }

Server::~Server() { stop(); }

int Server::bind(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->http.bind_to_any_port(host);
    if (bound < 0) throw Error("cannot bind " + host);
  } else if (!impl_->http.bind_to_port(host, port)) {
    throw Error("cannot bind " + host + ":" + std::to_string(port));
  }
  return bound;
}

void Server::listen() { impl_->http.listen_after_bind(); }

void Server::stop() {
  if (impl_ && impl_->http.is_running()) impl_->http.stop();
}

}  // namespace align::service
