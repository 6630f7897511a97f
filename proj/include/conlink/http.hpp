// Copyright 2026 The conlink Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace conlink {

using Headers = std::vector<std::pair<std::string, std::string>>;

struct HttpResponse {
  int status = 0;  // 0 when no HTTP response was received
  std::string body;
  std::string error;
  bool timed_out = false;
};

/// Minimal JSON-over-HTTP seam. Implementations must be safe to call from
/// several threads at once.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post_json(const std::string& url, const std::string& body,
                                 const Headers& headers,
                                 std::chrono::milliseconds timeout) = 0;
};

/// cpp-httplib backed transport; http:// and https:// URLs.
class HttplibTransport final : public HttpTransport {
 public:
  HttpResponse post_json(const std::string& url, const std::string& body,
                         const Headers& headers,
                         std::chrono::milliseconds timeout) override;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::vector<std::chrono::milliseconds> backoff{std::chrono::seconds(1),
                                                 std::chrono::seconds(2),
                                                 std::chrono::seconds(4)};
  /// Replaced in tests to avoid real sleeping.
  std::function<void(std::chrono::milliseconds)> sleep;

  std::chrono::milliseconds delay_before_retry(int failed_attempts) const;
};

/// Retries transport failures and 5xx replies per `policy`; 4xx fails fast.
/// Returns the 2xx response or throws Error{Transport|Timeout}.
HttpResponse post_with_retry(HttpTransport& transport, const std::string& url,
                             const std::string& body, const Headers& headers,
                             std::chrono::milliseconds timeout,
                             const RetryPolicy& policy);

inline constexpr const char* kApiKeyEnv = "LINKER_API_KEY";

/// Bearer auth header from LINKER_API_KEY, if set.
Headers auth_headers();

}  // namespace conlink
