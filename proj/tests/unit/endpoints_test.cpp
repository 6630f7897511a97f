// Copyright 2026 The conlink Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstdlib>

#include "conlink/endpoints.hpp"
#include "conlink/error.hpp"
#include "conlink/text.hpp"
#include "json.hpp"
#include "temp_dir.hpp"

namespace conlink {
namespace {

Ontology homonyms() {
  return Ontology("t", {
                           Concept{"A", "cold", "A viral infection of the nose and throat", {}, "t"},
                           Concept{"B", "cold", "Low ambient temperature exposure injury", {}, "t"},
                           Concept{"C", "fever", std::nullopt, {}, "t"},
                       });
}

std::vector<Candidate> all_candidates() {
  return {{"A", 0.9, Variant::NameOnly}, {"B", 0.9, Variant::NameOnly}, {"C", 0.2, Variant::NameOnly}};
}

class FixedEndpoint : public LlmEndpoint {
 public:
  explicit FixedEndpoint(std::string reply) : reply_(std::move(reply)) {}
  int calls = 0;
  std::string complete(const std::string&) override {
    ++calls;
    return reply_;
  }

 private:
  std::string reply_;
};

class RecordingTransport : public HttpTransport {
 public:
  std::vector<HttpResponse> replies;
  std::string last_body;
  std::string last_url;
  std::size_t calls = 0;
  HttpResponse post_json(const std::string& url, const std::string& body, const Headers&,
                         std::chrono::milliseconds) override {
    last_url = url;
    last_body = body;
    return replies.at(std::min(calls++, replies.size() - 1));
  }
};

TEST(PromptView, ReadsBackWhatTheBuilderWrote) {
  PromptConfig config;
  config.none_label = "<none>";
  const auto p = build_prompt({"q", "cold", "sneezing", std::nullopt}, all_candidates(), homonyms(), config);
  const auto v = parse_prompt(p);
  EXPECT_EQ(v.mention, "cold");
  EXPECT_EQ(v.context, "sneezing");
  ASSERT_EQ(v.options.size(), 3u);
  EXPECT_EQ(v.options[0].description, "A viral infection of the nose and throat");
  EXPECT_FALSE(v.options[2].description);
  EXPECT_EQ(v.none_label, "<none>");

  config.abstract_tags = true;
  const auto tagged = parse_prompt(
      build_prompt({"q", "cold", "line one\nline two", std::nullopt}, all_candidates(), homonyms(), config));
  EXPECT_EQ(tagged.context, "line one\nline two");
}

TEST(MatchingMock, ExactModeAnswersFirstMatchOrNone) {
  MatchingMockEndpoint ep(MatchingMockEndpoint::Mode::Exact);
  const PromptConfig config;
  const auto r = rank({"q", "FEVER", std::nullopt, std::nullopt}, all_candidates(), homonyms(), config, ep);
  EXPECT_EQ(r.resolved, "C");
  EXPECT_EQ(r.responses.at(0), "option 2: fever. It is the same concept as the query.");
  const auto none = rank({"q", "gout", std::nullopt, std::nullopt}, all_candidates(), homonyms(), config, ep);
  EXPECT_EQ(none.selection.kind, SelectionKind::NoneOfTheAbove);
  EXPECT_EQ(ep.calls(), 2u);
}

TEST(MatchingMock, KeywordModeDisambiguatesWithDescriptions) {
  MatchingMockEndpoint ep(MatchingMockEndpoint::Mode::Keyword);
  PromptConfig config;
  const Query viral{"q", "cold", "runny nose and sore throat after infection", std::nullopt};
  const Query frost{"q", "cold", "injury from exposure to low temperature", std::nullopt};
  EXPECT_EQ(rank(viral, all_candidates(), homonyms(), config, ep).resolved, "A");
  EXPECT_EQ(rank(frost, all_candidates(), homonyms(), config, ep).resolved, "B");

  config.include_candidate_context = false;
  EXPECT_EQ(rank(viral, all_candidates(), homonyms(), config, ep).selection.kind,
            SelectionKind::NoneOfTheAbove);
  config = {};
  config.include_source_context = false;
  EXPECT_EQ(rank(viral, all_candidates(), homonyms(), config, ep).selection.kind,
            SelectionKind::NoneOfTheAbove);
}

TEST(Fixtures, RecordThenReplayIdentically) {
  testing::TempDir dir;
  const auto path = dir / "fixtures.jsonl";
  auto inner = std::make_shared<FixedEndpoint>("option 1 because reasons");
  const Query q{"q", "cold", "throat", std::nullopt};
  LinkResult first;
  {
    FixtureEndpoint rec(path, inner);
    first = rank(q, all_candidates(), homonyms(), PromptConfig{}, rec);
    EXPECT_EQ(rec.recorded(), 1u);
  }
  EXPECT_EQ(inner->calls, 1);

  const auto line = nlohmann::json::parse(split(read_file(path), '\n').front());
  EXPECT_EQ(line["digest"], first.prompt_digest);
  EXPECT_EQ(line["response"], "option 1 because reasons");

  FixtureEndpoint replay(path, nullptr);
  EXPECT_EQ(replay.size(), 1u);
  const auto second = rank(q, all_candidates(), homonyms(), PromptConfig{}, replay);
  EXPECT_EQ(second.selection, first.selection);
  EXPECT_EQ(second.resolved, first.resolved);
  EXPECT_EQ(second.prompt_digest, first.prompt_digest);
  EXPECT_EQ(replay.replayed(), 1u);
  EXPECT_EQ(inner->calls, 1);
}

TEST(Fixtures, MissingTranscriptIsAnEndpointFailure) {
  testing::TempDir dir;
  FixtureEndpoint replay(dir / "none.jsonl", nullptr);
  const auto r = rank({"q", "cold", std::nullopt, std::nullopt}, all_candidates(), homonyms(), PromptConfig{}, replay);
  EXPECT_EQ(r.selection.kind, SelectionKind::EndpointFailure);
  EXPECT_NE(r.error.find("MissingFixture"), std::string::npos);
}

TEST(Counting, CountsEveryCall) {
  auto inner = std::make_shared<FixedEndpoint>("None");
  CountingEndpoint counter(inner);
  counter.complete("a");
  counter.complete("b");
  EXPECT_EQ(counter.calls(), 2u);
}

TEST(RemoteChat, RequestBodyShape) {
  const auto body = nlohmann::json::parse(RemoteChatEndpoint::request_body("gpt-4", "hello"));
  EXPECT_EQ(body["model"], "gpt-4");
  EXPECT_EQ(body["messages"][0]["role"], "user");
  EXPECT_EQ(body["messages"][0]["content"], "hello");
  EXPECT_EQ(body["temperature"], 0);
}

TEST(RemoteChat, ExtractsFirstChoice) {
  auto transport = std::make_shared<RecordingTransport>();
  transport->replies.push_back(
      {200, R"({"choices":[{"message":{"role":"assistant","content":"Option 1 ..."}}]})", "", false});
  RetryPolicy fast;
  fast.sleep = [](auto) {};
  RemoteChatEndpoint ep({"http://llm.invalid/v1/chat", "gpt-4", std::chrono::seconds(1), std::nullopt}, transport, fast);
  EXPECT_EQ(ep.complete("prompt"), "Option 1 ...");
  EXPECT_EQ(transport->last_url, "http://llm.invalid/v1/chat");
  EXPECT_THROW(RemoteChatEndpoint::extract_content("{}"), Error);
}

TEST(RemoteChat, ThreeServerErrorsExhaustRetries) {
  auto transport = std::make_shared<RecordingTransport>();
  transport->replies.push_back({500, "oops", "", false});
  RetryPolicy fast;
  int sleeps = 0;
  fast.sleep = [&](auto) { ++sleeps; };
  RemoteChatEndpoint ep({"http://llm.invalid/v1/chat", "gpt-4", std::chrono::seconds(1), std::nullopt}, transport, fast);
  const auto r = rank({"q", "cold", std::nullopt, std::nullopt}, all_candidates(), homonyms(), PromptConfig{}, ep);
  EXPECT_EQ(r.selection.kind, SelectionKind::EndpointFailure);
  EXPECT_EQ(transport->calls, 3u);
  EXPECT_EQ(sleeps, 2);
}

TEST(RemoteChat, PromptOverBudgetIsRejectedBeforeSending) {
  auto transport = std::make_shared<RecordingTransport>();
  RemoteChatEndpoint ep({"http://llm.invalid/v1/chat", "gpt-4", std::chrono::seconds(1), 2}, transport);
  EXPECT_THROW(ep.complete("a prompt that is clearly longer than eight bytes"), Error);
  EXPECT_EQ(transport->calls, 0u);
}

}  // namespace
}  // namespace conlink
