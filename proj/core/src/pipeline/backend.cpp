#include "align/pipeline/backend.hpp"

#include "align/error.hpp"
#include "common/http_client.hpp"

namespace align::pipeline {

std::string MockBackend::generate(const GenerationRequest& req) const {
  std::string out = "[mock:" + std::string(to_string(req.lang)) + "] " + req.query + "\n";
  if (req.system_instructions.find("Safety:") != std::string::npos) out += "(answered under safety guidance)\n";
  for (std::size_t i = 0; i < req.chunks.size(); ++i) {
    const auto& c = req.chunks[i];
    out += "[" + std::to_string(i + 1) + "] " + c.doc_id + ": " + c.snippet + "\n";
  }
  for (const auto& t : req.tool_results) out += "(" + t.tool + ") " + t.output + "\n";
  if (req.chunks.empty() && req.tool_results.empty()) out += "No sources were consulted.\n";
  return out;
}

HttpBackend::HttpBackend(std::string url, int timeout_seconds) : url_(std::move(url)), timeout_(timeout_seconds) {}

std::string HttpBackend::generate(const GenerationRequest& req) const {
  nlohmann::json tools = nlohmann::json::array();
  for (const auto& t : req.tool_results)
    tools.push_back({{"tool", t.tool}, {"input", t.input}, {"output", t.output}, {"ok", t.ok}});
  const nlohmann::json body = {{"system", req.system_instructions}, {"chunks", req.chunks},
                               {"tool_results", tools},            {"memory", req.memory},
                               {"query", req.query},               {"lang", to_string(req.lang)}};
  const auto reply = http::post_json(url_, body, timeout_);
  if (!reply.contains("text") || !reply["text"].is_string()) throw BackendError("backend reply lacks text");
  return reply["text"].get<std::string>();
}

}  // namespace align::pipeline
