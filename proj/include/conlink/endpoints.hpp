// Copyright 2026 The conlink Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "conlink/http.hpp"
#include "conlink/ranker.hpp"

namespace conlink {

struct ChatEndpointSpec {
  std::string url;
  std::string model;
  std::chrono::milliseconds timeout{std::chrono::seconds(120)};
  std::optional<std::size_t> max_prompt_tokens;
};

/// Chat-completion style endpoint: {"model", "messages", "temperature": 0};
/// reply text is choices[0].message.content.
class RemoteChatEndpoint final : public LlmEndpoint {
 public:
  RemoteChatEndpoint(ChatEndpointSpec spec, std::shared_ptr<HttpTransport> transport = nullptr,
                     RetryPolicy retry = {});

  std::string complete(const std::string& prompt) override;
  std::optional<std::size_t> max_prompt_tokens() const override {
    return spec_.max_prompt_tokens;
  }

  static std::string request_body(const std::string& model, const std::string& prompt);
  /// Throws Transport when the reply has no first-choice message content.
  static std::string extract_content(const std::string& body);

 private:
  ChatEndpointSpec spec_;
  std::shared_ptr<HttpTransport> transport_;
  RetryPolicy retry_;
};

/// The pieces of a rendered prompt a mock ranker needs.
struct PromptView {
  struct Option {
    std::string name;
    std::optional<std::string> description;
  };
  std::string mention;
  std::optional<std::string> context;
  std::vector<Option> options;
  std::string none_label = "None";
};

/// Reads back a prompt produced by build_prompt. Throws Invariant when the
/// text does not follow the template.
PromptView parse_prompt(std::string_view prompt);

/// Offline ranker stand-in. Exact mode answers the first option whose name
/// equals the mention (case-insensitive), else the none label. Keyword mode
/// breaks ties among same-named options by word overlap between option
/// description and query context, and abstains when it cannot.
class MatchingMockEndpoint final : public LlmEndpoint {
 public:
  enum class Mode { Exact, Keyword };
  explicit MatchingMockEndpoint(Mode mode) : mode_(mode) {}

  std::string complete(const std::string& prompt) override;
  std::size_t calls() const { return calls_.load(); }

 private:
  Mode mode_;
  std::atomic<std::size_t> calls_{0};
};

/// Record/replay layer keyed by SHA-256 of the prompt. Fixture file is JSON
/// Lines of {"digest", "response"}. Replays hits; on a miss it forwards to
/// `inner` and appends the exchange, or throws MissingFixture without one.
class FixtureEndpoint final : public LlmEndpoint {
 public:
  FixtureEndpoint(std::filesystem::path path, std::shared_ptr<LlmEndpoint> inner);

  std::string complete(const std::string& prompt) override;
  std::optional<std::size_t> max_prompt_tokens() const override;

  std::size_t size() const;
  std::size_t replayed() const { return replayed_.load(); }
  std::size_t recorded() const { return recorded_.load(); }

 private:
  std::filesystem::path path_;
  std::shared_ptr<LlmEndpoint> inner_;
  mutable std::mutex mutex_;
  std::unordered_map<std::string, std::string> transcripts_;
  std::atomic<std::size_t> replayed_{0};
  std::atomic<std::size_t> recorded_{0};
};

/// Counts calls reaching the wrapped endpoint.
class CountingEndpoint final : public LlmEndpoint {
 public:
  explicit CountingEndpoint(std::shared_ptr<LlmEndpoint> inner) : inner_(std::move(inner)) {}

  std::string complete(const std::string& prompt) override {
    ++calls_;
    return inner_->complete(prompt);
  }
  std::optional<std::size_t> max_prompt_tokens() const override {
    return inner_->max_prompt_tokens();
  }
  std::size_t calls() const { return calls_.load(); }

 private:
  std::shared_ptr<LlmEndpoint> inner_;
  std::atomic<std::size_t> calls_{0};
};

}  // namespace conlink
