#pragma once

// Shared plumbing for the OpenAI-compatible HTTP adapters.

#include <chrono>
#include <string>

#include <json.hpp>

#include "tcfd/embedding.hpp"

namespace tcfd::detail {

struct SplitUrl {
  std::string origin;       // scheme://host[:port]
  std::string path_prefix;  // "/v1" or ""
};

SplitUrl split_url(const std::string& url);

/// POSTs `body` to {base_url}{path} with a bearer token read from the
/// endpoint's token variable and returns the parsed JSON reply. Maps
/// transport failures and HTTP status codes onto tcfd::Error codes.
nlohmann::json post_json(const HttpEndpoint& endpoint, const std::string& path,
                         const nlohmann::json& body, std::chrono::milliseconds timeout);

}  // namespace tcfd::detail
