#pragma once

#include <chrono>
#include <functional>
#include <optional>
#include <string>

#include "json.hpp"

namespace sidefield::texture {

/// HTTP(S) JSON endpoint. Credentials come from the environment only:
/// <PREFIX>_URL and <PREFIX>_API_KEY.
struct ServiceEndpoint {
  std::string url;      // scheme://host[:port]/path
  std::string api_key;  // sent as a bearer token when non-empty

  static std::optional<ServiceEndpoint> from_env(const std::string& prefix);
};

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds initial_backoff{250};
  double backoff_factor = 2.0;
  std::chrono::seconds timeout{60};
  std::function<void(std::chrono::milliseconds)> sleep;  // defaults to std::this_thread::sleep_for
};

/// POSTs a JSON body and parses the JSON reply. Connection failures, 429 and
/// 5xx replies are retried with exponential backoff; when attempts run out the
/// ExternalServiceError is marked retriable. Other failures are not retried.
nlohmann::json post_json(const ServiceEndpoint& endpoint, const nlohmann::json& body, const RetryPolicy& policy = {});

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);

}  // namespace sidefield::texture
