// Copyright 2026 The conlink Authors
// SPDX-License-Identifier: Apache-2.0

#include "conlink/http.hpp"

#include <cstdlib>
#include <thread>

#include "conlink/error.hpp"
#include "httplib.h"

namespace conlink {

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::Config, "endpoint URL lacks a scheme: " + url);
  }
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

HttpResponse HttplibTransport::post_json(const std::string& url,
                                         const std::string& body,
                                         const Headers& headers,
                                         std::chrono::milliseconds timeout) {
  auto [origin, path] = split_url(url);
  httplib::Client client(origin);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);

  HttpResponse out;
  auto res = client.Post(path, h, body, "application/json");
  if (!res) {
    out.error = httplib::to_string(res.error());
    out.timed_out = res.error() == httplib::Error::ConnectionTimeout ||
                    res.error() == httplib::Error::Read;
    return out;
  }
  out.status = res->status;
  out.body = res->body;
  return out;
}

std::chrono::milliseconds RetryPolicy::delay_before_retry(int failed_attempts) const {
  if (backoff.empty()) return std::chrono::milliseconds(0);
  auto i = static_cast<std::size_t>(failed_attempts - 1);
  return backoff[std::min(i, backoff.size() - 1)];
}

HttpResponse post_with_retry(HttpTransport& transport, const std::string& url,
                             const std::string& body, const Headers& headers,
                             std::chrono::milliseconds timeout,
                             const RetryPolicy& policy) {
  HttpResponse last;
  const int attempts = std::max(1, policy.max_attempts);
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    last = transport.post_json(url, body, headers, timeout);
    if (last.status >= 200 && last.status < 300) return last;
    if (last.status >= 400 && last.status < 500) {
      throw Error(ErrorCode::Transport, "client error from " + url)
          .with_status(last.status);
    }
    if (attempt < attempts) {
      auto delay = policy.delay_before_retry(attempt);
      if (policy.sleep) {
        policy.sleep(delay);
      } else {
        std::this_thread::sleep_for(delay);
      }
    }
  }
  if (last.status == 0 && last.timed_out) {
    throw Error(ErrorCode::Timeout,
                url + " after " + std::to_string(attempts) + " attempts");
  }
  std::string detail = url + " after " + std::to_string(attempts) + " attempts";
  if (!last.error.empty()) detail += ": " + last.error;
  throw Error(ErrorCode::Transport, std::move(detail)).with_status(last.status);
}

Headers auth_headers() {
  Headers h;
  if (const char* key = std::getenv(kApiKeyEnv); key != nullptr && *key != '\0') {
    h.emplace_back("Authorization", std::string("Bearer ") + key);
  }
  return h;
}

}  // namespace conlink
