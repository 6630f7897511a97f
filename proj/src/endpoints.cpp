// Copyright 2026 The conlink Authors
// SPDX-License-Identifier: Apache-2.0

#include "conlink/endpoints.hpp"

#include <fstream>
#include <set>

#include "conlink/error.hpp"
#include "conlink/text.hpp"
#include "json.hpp"

namespace conlink {

// RemoteChatEndpoint

RemoteChatEndpoint::RemoteChatEndpoint(ChatEndpointSpec spec,
                                       std::shared_ptr<HttpTransport> transport,
                                       RetryPolicy retry)
    : spec_(std::move(spec)), transport_(std::move(transport)), retry_(std::move(retry)) {
  if (spec_.url.empty()) throw Error(ErrorCode::Config, "LLM endpoint URL is empty");
  if (!transport_) transport_ = std::make_shared<HttplibTransport>();
}

std::string RemoteChatEndpoint::request_body(const std::string& model,
                                             const std::string& prompt) {
  nlohmann::ordered_json body;
  body["model"] = model;
  body["messages"] = nlohmann::ordered_json::array(
      {nlohmann::ordered_json{{"role", "user"}, {"content", prompt}}});
  body["temperature"] = 0;
  return body.dump();
}

std::string RemoteChatEndpoint::extract_content(const std::string& body) {
  try {
    auto reply = nlohmann::json::parse(body);
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Transport, std::string("unexpected completion reply: ") + e.what());
  }
}

std::string RemoteChatEndpoint::complete(const std::string& prompt) {
  if (spec_.max_prompt_tokens && estimate_tokens(prompt) > *spec_.max_prompt_tokens) {
    throw Error(ErrorCode::BudgetExceeded, "prompt needs ~" +
                                               std::to_string(estimate_tokens(prompt)) +
                                               " tokens");
  }
  auto res = post_with_retry(*transport_, spec_.url, request_body(spec_.model, prompt),
                             auth_headers(), spec_.timeout, retry_);
  return extract_content(res.body);
}

// Prompt reading for mocks

namespace {

constexpr std::string_view kTaskMarker = "### Task";
constexpr std::string_view kNoneSuffix = ": none of the options above";

bool starts_with(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

std::set<std::string> keywords(std::string_view text) {
  std::set<std::string> out;
  std::string word;
  auto flush = [&] {
    if (word.size() >= 4) out.insert(word);
    word.clear();
  };
  for (char c : to_lower_ascii(text)) {
    if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
      word.push_back(c);
    } else {
      flush();
    }
  }
  flush();
  return out;
}

}  // namespace

PromptView parse_prompt(std::string_view prompt) {
  auto lines = split(prompt, '\n');
  std::size_t i = 0;
  while (i < lines.size() && lines[i] != kTaskMarker) ++i;
  if (i == lines.size()) throw Error(ErrorCode::Invariant, "prompt has no task section");
  ++i;

  PromptView view;
  if (i >= lines.size() || !starts_with(lines[i], "Query: ")) {
    throw Error(ErrorCode::Invariant, "prompt has no query line");
  }
  view.mention = lines[i].substr(7);
  ++i;
  if (i < lines.size() && starts_with(lines[i], "Query context: ")) {
    view.context = lines[i].substr(15);
    ++i;
  } else if (i < lines.size() && lines[i] == "<abstract>") {
    std::string ctx;
    for (++i; i < lines.size() && lines[i] != "</abstract>"; ++i) {
      if (!ctx.empty()) ctx += '\n';
      ctx += lines[i];
    }
    view.context = ctx;
    ++i;
  }
  while (i < lines.size() && lines[i] != "Options:") ++i;
  if (i == lines.size()) throw Error(ErrorCode::Invariant, "prompt has no options");

  for (++i; i < lines.size(); ++i) {
    const auto& line = lines[i];
    if (line.empty()) break;
    if (starts_with(line, "   Description: ")) {
      if (view.options.empty()) throw Error(ErrorCode::Invariant, "orphan description");
      view.options.back().description = line.substr(16);
      continue;
    }
    if (line.size() > kNoneSuffix.size() &&
        line.compare(line.size() - kNoneSuffix.size(), kNoneSuffix.size(), kNoneSuffix) == 0) {
      view.none_label = line.substr(0, line.size() - kNoneSuffix.size());
      continue;
    }
    auto colon = line.find(": ");
    auto expected = std::to_string(view.options.size());
    if (colon == std::string::npos || line.substr(0, colon) != expected) {
      throw Error(ErrorCode::Invariant, "unexpected option line: " + line);
    }
    view.options.push_back({line.substr(colon + 2), std::nullopt});
  }
  return view;
}

// MatchingMockEndpoint

std::string MatchingMockEndpoint::complete(const std::string& prompt) {
  ++calls_;
  const auto view = parse_prompt(prompt);
  const auto mention = to_lower_ascii(view.mention);

  std::vector<std::size_t> matches;
  for (std::size_t i = 0; i < view.options.size(); ++i) {
    if (to_lower_ascii(view.options[i].name) == mention) matches.push_back(i);
  }

  auto answer = [&](std::size_t i) {
    return "option " + std::to_string(i) + ": " + view.options[i].name +
           ". It is the same concept as the query.";
  };
  const std::string abstain =
      view.none_label + ". No single option is the same concept as the query.";

  if (matches.empty()) return abstain;
  if (mode_ == Mode::Exact || matches.size() == 1) return answer(matches.front());

  if (!view.context) return abstain;
  const auto query_words = keywords(*view.context);
  std::size_t best = 0, best_overlap = 0;
  bool tied = false;
  for (auto i : matches) {
    const auto& desc = view.options[i].description;
    if (!desc) continue;
    std::size_t overlap = 0;
    for (const auto& w : keywords(*desc)) overlap += query_words.count(w);
    if (overlap > best_overlap) {
      best = i;
      best_overlap = overlap;
      tied = false;
    } else if (overlap == best_overlap && overlap > 0) {
      tied = true;
    }
  }
  if (best_overlap == 0 || tied) return abstain;
  return answer(best);
}

// FixtureEndpoint

FixtureEndpoint::FixtureEndpoint(std::filesystem::path path, std::shared_ptr<LlmEndpoint> inner)
    : path_(std::move(path)), inner_(std::move(inner)) {
  if (!std::filesystem::exists(path_)) return;
  std::size_t line_no = 0;
  for (const auto& line : split(read_file(path_), '\n')) {
    ++line_no;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      transcripts_.emplace(j.at("digest").get<std::string>(), j.at("response").get<std::string>());
    } catch (const nlohmann::json::exception&) {
      throw Error(ErrorCode::Config, "malformed fixture line in " + path_.string())
          .at_line(line_no);
    }
  }
}

std::optional<std::size_t> FixtureEndpoint::max_prompt_tokens() const {
  return inner_ ? inner_->max_prompt_tokens() : std::nullopt;
}

std::size_t FixtureEndpoint::size() const {
  std::lock_guard lock(mutex_);
  return transcripts_.size();
}

std::string FixtureEndpoint::complete(const std::string& prompt) {
  const auto digest = sha256_hex(prompt);
  {
    std::lock_guard lock(mutex_);
    if (auto it = transcripts_.find(digest); it != transcripts_.end()) {
      ++replayed_;
      return it->second;
    }
  }
  if (!inner_) throw Error(ErrorCode::MissingFixture, digest);

  auto response = inner_->complete(prompt);

  std::lock_guard lock(mutex_);
  if (transcripts_.emplace(digest, response).second) {
    nlohmann::ordered_json j;
    j["digest"] = digest;
    j["response"] = response;
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot append to " + path_.string());
    out << j.dump() << '\n';
    ++recorded_;
  }
  return response;
}

}  // namespace conlink
