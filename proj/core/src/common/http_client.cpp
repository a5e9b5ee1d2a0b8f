#include "common/http_client.hpp"

#include <httplib.h>

#include "align/error.hpp"

namespace align::http {

namespace {

struct SplitUrl {
  std::string origin;
  std::string path;
};

SplitUrl split(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw BackendError("invalid URL: " + url);
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

}  // namespace

nlohmann::json post_json(const std::string& url, const nlohmann::json& body, int timeout_seconds) {
  const auto target = split(url);
  httplib::Client client(target.origin);
  client.set_connection_timeout(timeout_seconds, 0);
  client.set_read_timeout(timeout_seconds, 0);
  client.set_write_timeout(timeout_seconds, 0);
  auto res = client.Post(target.path, body.dump(), "application/json");
  if (!res) throw BackendError("request to " + url + " failed: " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300)
    throw BackendError("request to " + url + " returned HTTP " + std::to_string(res->status));
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw BackendError("invalid JSON from " + url + ": " + e.what());
  }
}

}  // namespace align::http
