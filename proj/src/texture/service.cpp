#include "sidefield/texture/service.hpp"

#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "sidefield/core/error.hpp"

namespace sidefield::texture {

std::optional<ServiceEndpoint> ServiceEndpoint::from_env(const std::string& prefix) {
  const char* url = std::getenv((prefix + "_URL").c_str());
  if (!url || !*url) return std::nullopt;
  const char* key = std::getenv((prefix + "_API_KEY").c_str());
  return ServiceEndpoint{url, key ? key : ""};
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

namespace {

std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw ConfigError("service url needs a scheme: " + url);
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

}  // namespace

nlohmann::json post_json(const ServiceEndpoint& endpoint, const nlohmann::json& body, const RetryPolicy& policy) {
  const auto [base, path] = split_url(endpoint.url);
  httplib::Client client(base);
  client.set_connection_timeout(policy.timeout);
  client.set_read_timeout(policy.timeout);
  client.set_write_timeout(policy.timeout);
  httplib::Headers headers;
  if (!endpoint.api_key.empty()) headers.emplace("Authorization", "Bearer " + endpoint.api_key);
  const std::string payload = body.dump();
  auto backoff = policy.initial_backoff;
  std::string last;
  for (int attempt = 1; attempt <= policy.attempts; ++attempt) {
    auto res = client.Post(path, headers, payload, "application/json");
    if (res && res->status >= 200 && res->status < 300) {
      try {
        return nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::exception& e) {
        throw ExternalServiceError(std::string("service returned invalid JSON: ") + e.what(), false);
      }
    }
    if (res && res->status != 429 && res->status < 500)
      throw ExternalServiceError("service rejected the request with HTTP " + std::to_string(res->status), false);
    last = res ? "HTTP " + std::to_string(res->status) : httplib::to_string(res.error());
    if (attempt < policy.attempts) {
      if (policy.sleep) policy.sleep(backoff);
      else std::this_thread::sleep_for(backoff);
      backoff = std::chrono::milliseconds(static_cast<long long>(backoff.count() * policy.backoff_factor));
    }
  }
  throw ExternalServiceError("service unavailable after " + std::to_string(policy.attempts) + " attempts (" + last + ")",
                             true);
}

}  // namespace sidefield::texture
