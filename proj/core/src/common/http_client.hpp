#pragma once

#include <string>

#include <nlohmann/json.hpp>

namespace align::http {

/// POSTs a JSON body to an absolute http:// URL and returns the parsed JSON
/// response. Transport errors and non-2xx statuses raise BackendError.
nlohmann::json post_json(const std::string& url, const nlohmann::json& body, int timeout_seconds = 30);

}  // namespace align::http
