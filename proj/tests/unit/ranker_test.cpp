// Copyright 2026 The conlink Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <deque>
#include <random>

#include "conlink/endpoints.hpp"
#include "conlink/error.hpp"
#include "conlink/ranker.hpp"
#include "conlink/text.hpp"
#include "parser_fixtures.hpp"

#ifndef CONLINK_TEST_DATA_DIR
#error "CONLINK_TEST_DATA_DIR must be defined"
#endif

namespace conlink {
namespace {

const Ontology& golden_ontology() {
  static const Ontology o = parse_ontology_text(
      "{\"id\":\"ORPHA:1\",\"name\":\"Bleeding disorder due to P2Y12 defect\","
      "\"description\":\"A rare, genetic, isolated constitutional thrombocytopathy characterized "
      "by a defective platelet response to ADP due to a P2Y12 receptor defect.\"}\n"
      "{\"id\":\"ORPHA:2\",\"name\":\"Glanzmann thrombasthenia\","
      "\"description\":\"A rare inherited platelet disorder with absent aggregation.\"}\n"
      "{\"id\":\"ORPHA:3\",\"name\":\"Platelet-type bleeding disorder\"}\n",
      "ordo");
  return o;
}

const Query& golden_query() {
  static const Query q{"q-golden", "bleeding disorder, platelet-type, 8",
                       "Mild mucocutaneous bleeding with impaired ADP-induced aggregation.",
                       "ORPHA:1"};
  return q;
}

std::vector<Candidate> golden_candidates() {
  return {{"ORPHA:1", 0.91, Variant::NameWithContext},
          {"ORPHA:2", 0.74, Variant::NameOnly},
          {"ORPHA:3", 0.70, Variant::NameOnly}};
}

class ScriptedEndpoint : public LlmEndpoint {
 public:
  std::deque<std::string> replies;
  std::vector<std::string> prompts;
  std::optional<std::size_t> budget;
  std::string complete(const std::string& prompt) override {
    prompts.push_back(prompt);
    if (replies.empty()) throw Error(ErrorCode::Transport, "script exhausted").with_status(500);
    auto r = replies.front();
    replies.pop_front();
    return r;
  }
  std::optional<std::size_t> max_prompt_tokens() const override { return budget; }
};

TEST(Prompt, MatchesGoldenFixture) {
  PromptConfig config;
  config.max_option_context_chars = 80;
  const auto prompt = build_prompt(golden_query(), golden_candidates(), golden_ontology(), config);
  const auto golden = read_file(std::filesystem::path(CONLINK_TEST_DATA_DIR) / "golden_prompt.txt");
  EXPECT_EQ(prompt, golden);
}

TEST(Prompt, OneShotAndAbstractTagsGolden) {
  PromptConfig config;
  config.one_shot = OneShotExample{"cystic fibrosis", "0: Cystic fibrosis\n1: Asthma", "option 0"};
  config.abstract_tags = true;
  config.none_label = "<none>";
  const auto prompt = build_prompt(golden_query(), golden_candidates(), golden_ontology(), config);
  const auto golden =
      read_file(std::filesystem::path(CONLINK_TEST_DATA_DIR) / "golden_prompt_one_shot.txt");
  EXPECT_EQ(prompt, golden);
}

TEST(Prompt, ContextFlags) {
  PromptConfig config;
  config.include_candidate_context = false;
  config.include_source_context = false;
  const auto p = build_prompt(golden_query(), golden_candidates(), golden_ontology(), config);
  EXPECT_NE(p.find("0: Bleeding disorder due to P2Y12 defect\n"), std::string::npos);
  EXPECT_EQ(p.find("Description:"), std::string::npos);
  EXPECT_EQ(p.find("thrombocytopathy"), std::string::npos);
  EXPECT_EQ(p.find("mucocutaneous"), std::string::npos);
}

TEST(Prompt, LongDescriptionCutAtWordWithinBudget) {
  std::string desc;
  for (int i = 0; desc.size() < 5000; ++i) desc += "token" + std::to_string(i) + " ";
  const auto o = Ontology("t", {Concept{"A", "alpha", desc, {}, "t"}});
  PromptConfig config;  // 600-char budget
  const auto p = build_prompt({"q", "alpha", std::nullopt, std::nullopt},
                              {{"A", 1.0, Variant::NameOnly}}, o, config);
  const auto start = p.find("   Description: ") + 16;
  const auto shown = p.substr(start, p.find('\n', start) - start);
  EXPECT_LE(shown.size(), 600u);
  EXPECT_GT(shown.size(), 550u);
  EXPECT_EQ(desc.substr(0, shown.size()), shown);
  EXPECT_EQ(desc[shown.size()], ' ');
}

TEST(Prompt, DeterministicDigest) {
  PromptConfig config;
  EXPECT_EQ(sha256_hex(build_prompt(golden_query(), golden_candidates(), golden_ontology(), config)),
            sha256_hex(build_prompt(golden_query(), golden_candidates(), golden_ontology(), config)));
}

TEST(Prompt, Preconditions) {
  PromptConfig config;
  try {
    build_prompt(golden_query(), {}, golden_ontology(), config);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyCandidates);
  }
  try {
    build_prompt(golden_query(), {{"NOPE", 0.5, Variant::NameOnly}}, golden_ontology(), config);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnresolvableCandidate);
  }
}

TEST(PromptConfig, Validation) {
  PromptConfig c;
  EXPECT_NO_THROW(c.validate());
  c.none_label = "3";
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.none_label = "";
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.max_option_context_chars = 49;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.template_id = "retrieve-rank-v0";
  EXPECT_THROW(c.validate(), Error);
}

TEST(Budget, ShrinksDescriptionsThenDropsThemThenFails) {
  std::string desc;
  for (int i = 0; desc.size() < 3000; ++i) desc += "w" + std::to_string(i) + " ";
  const auto o = Ontology("t", {Concept{"A", "alpha", desc, {}, "t"}, Concept{"B", "beta", desc, {}, "t"}});
  const Query q{"q", "alpha", std::nullopt, std::nullopt};
  const std::vector<Candidate> cands{{"A", 1, Variant::NameOnly}, {"B", 0.5, Variant::NameOnly}};
  PromptConfig config;

  const auto full = build_prompt(q, cands, o, config);
  EXPECT_EQ(build_prompt_within_budget(q, cands, o, config, std::nullopt), full);

  const auto shrunk = build_prompt_within_budget(q, cands, o, config, estimate_tokens(full) - 50);
  EXPECT_LT(shrunk.size(), full.size());
  EXPECT_NE(shrunk.find("Description:"), std::string::npos);

  PromptConfig bare = config;
  bare.include_candidate_context = false;
  const auto no_desc = build_prompt(q, cands, o, bare);
  EXPECT_EQ(build_prompt_within_budget(q, cands, o, config, estimate_tokens(no_desc)), no_desc);

  try {
    build_prompt_within_budget(q, cands, o, config, estimate_tokens(no_desc) - 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BudgetExceeded);
  }
}

TEST(Parser, FixtureSuite) {
  for (const auto& f : testing::parser_fixtures()) {
    const auto s = parse_response(f.response, f.n_options, "None");
    EXPECT_EQ(s.kind, f.kind) << f.name;
    if (f.kind == SelectionKind::Option) {
      EXPECT_EQ(s.index, f.index) << f.name;
    }
    EXPECT_EQ(s.raw_response, f.response);
  }
}

TEST(Parser, CustomNoneLabel) {
  EXPECT_EQ(parse_response("<none>. No option fits.", 3, "<none>").kind, SelectionKind::NoneOfTheAbove);
  EXPECT_EQ(parse_response("None of these.", 3, "<none>").kind, SelectionKind::ParseFailure);
}

TEST(Parser, TotalOverArbitraryBytes) {
  std::mt19937 rng(1);
  for (int i = 0; i < 2000; ++i) {
    std::string s(rng() % 40, '\0');
    for (auto& c : s) c = static_cast<char>(rng() % 256);
    const auto sel = parse_response(s, 1 + rng() % 12, "None");
    if (sel.kind == SelectionKind::Option) {
      EXPECT_LT(sel.index, 12u);
    }
    EXPECT_NE(sel.kind, SelectionKind::EndpointFailure);
  }
}

TEST(Rank, EmptyCandidatesNeverCallEndpoint) {
  ScriptedEndpoint ep;
  const auto r = rank(golden_query(), {}, golden_ontology(), PromptConfig{}, ep);
  EXPECT_EQ(r.selection.kind, SelectionKind::NoneOfTheAbove);
  EXPECT_TRUE(ep.prompts.empty());
  EXPECT_FALSE(r.resolved);
}

TEST(Rank, ExactMockResolvesMatchingName) {
  MatchingMockEndpoint ep(MatchingMockEndpoint::Mode::Exact);
  Query q = golden_query();
  q.mention = "glanzmann THROMBASTHENIA";
  const auto r = rank(q, golden_candidates(), golden_ontology(), PromptConfig{}, ep);
  EXPECT_EQ(r.selection.kind, SelectionKind::Option);
  EXPECT_EQ(r.resolved, "ORPHA:2");
  EXPECT_EQ(r.attempts, 1);
  EXPECT_EQ(r.prompt_digest,
            sha256_hex(build_prompt(q, golden_candidates(), golden_ontology(), PromptConfig{})));
}

TEST(Rank, ReasksOnceAfterGarbage) {
  ScriptedEndpoint ep;
  ep.replies = {"I recommend consulting a professional.", "2"};
  const auto r = rank(golden_query(), golden_candidates(), golden_ontology(), PromptConfig{}, ep);
  EXPECT_EQ(r.attempts, 2);
  EXPECT_EQ(r.selection.kind, SelectionKind::Option);
  EXPECT_EQ(r.resolved, "ORPHA:3");
  ASSERT_EQ(ep.prompts.size(), 2u);
  EXPECT_EQ(ep.prompts[1], ep.prompts[0] + "\nAnswer with only the option number or None.\n");
}

TEST(Rank, TerminalParseFailureIsKept) {
  ScriptedEndpoint ep;
  ep.replies = {"hmm", "still unsure"};
  const auto r = rank(golden_query(), golden_candidates(), golden_ontology(), PromptConfig{}, ep);
  EXPECT_EQ(r.selection.kind, SelectionKind::ParseFailure);
  EXPECT_EQ(r.attempts, 2);
  EXPECT_FALSE(r.resolved);
  EXPECT_EQ(r.responses.size(), 2u);
}

TEST(Rank, TransportErrorBecomesEndpointFailure) {
  ScriptedEndpoint ep;
  const auto r = rank(golden_query(), golden_candidates(), golden_ontology(), PromptConfig{}, ep);
  EXPECT_EQ(r.selection.kind, SelectionKind::EndpointFailure);
  EXPECT_FALSE(r.resolved);
  EXPECT_NE(r.error.find("Transport"), std::string::npos);
}

TEST(Rank, BudgetOverflowBecomesEndpointFailure) {
  ScriptedEndpoint ep;
  ep.budget = 10;
  const auto r = rank(golden_query(), golden_candidates(), golden_ontology(), PromptConfig{}, ep);
  EXPECT_EQ(r.selection.kind, SelectionKind::EndpointFailure);
  EXPECT_TRUE(ep.prompts.empty());
}

TEST(Rank, ResolvedIsAlwaysOffered) {
  ScriptedEndpoint ep;
  for (int i = 0; i < 10; ++i) ep.replies.push_back("option " + std::to_string(i));
  const auto offered = golden_candidates();
  for (int i = 0; i < 5; ++i) {
    const auto r = rank(golden_query(), offered, golden_ontology(), PromptConfig{}, ep);
    if (r.resolved) {
      EXPECT_TRUE(std::any_of(offered.begin(), offered.end(),
                              [&](const Candidate& c) { return c.concept_id == *r.resolved; }));
    }
  }
}

TEST(SelectionKind, StringRoundTrip) {
  for (auto k : {SelectionKind::Option, SelectionKind::NoneOfTheAbove, SelectionKind::ParseFailure,
                 SelectionKind::EndpointFailure}) {
    EXPECT_EQ(parse_selection_kind(to_string(k)), k);
  }
  EXPECT_FALSE(parse_selection_kind("bogus"));
}

}  // namespace
}  // namespace conlink
