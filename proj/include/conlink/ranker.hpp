// Copyright 2026 The conlink Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "conlink/memory.hpp"
#include "conlink/ontology.hpp"

namespace conlink {

inline constexpr std::string_view kDefaultTemplateId = "retrieve-rank-v1";

struct OneShotExample {
  std::string query;
  std::string options;
  std::string answer;
};

/// Reads a one-shot block from a small text file with three sections headed
/// by lines "[query]", "[options]" and "[answer]".
OneShotExample load_one_shot(const std::filesystem::path& path);

struct PromptConfig {
  bool include_source_context = true;
  bool include_candidate_context = true;
  std::optional<OneShotExample> one_shot;
  std::string none_label = "None";
  std::size_t max_option_context_chars = 600;
  std::string template_id{kDefaultTemplateId};
  /// Wrap source context in <abstract> tags (free-text tasks).
  bool abstract_tags = false;

  /// Throws Config on an empty or numeric none_label, a budget below 50, or
  /// an unknown template id.
  void validate() const;
};

enum class SelectionKind { Option, NoneOfTheAbove, ParseFailure, EndpointFailure };

std::string_view to_string(SelectionKind kind);
std::optional<SelectionKind> parse_selection_kind(std::string_view s);

struct Selection {
  SelectionKind kind = SelectionKind::ParseFailure;
  std::size_t index = 0;  // meaningful for Option only
  std::string raw_response;

  friend bool operator==(const Selection&, const Selection&) = default;
};

struct LinkResult {
  std::string query_id;
  Selection selection;
  std::optional<std::string> resolved;
  std::string prompt_digest;
  int attempts = 0;
  std::chrono::milliseconds latency{0};
  std::vector<Candidate> candidates;   // as offered, in prompt order
  std::vector<std::string> responses;  // one per endpoint call
  std::string error;                   // EndpointFailure detail
};

/// Rough token estimate used for budget checks: one token per four bytes.
std::size_t estimate_tokens(std::string_view text);

/// Deterministic prompt for `query` over `candidates` (in the given order).
/// Throws EmptyCandidates / UnresolvableCandidate.
std::string build_prompt(const Query& query, const std::vector<Candidate>& candidates,
                         const Ontology& ontology, const PromptConfig& config);

/// As build_prompt, but when the estimate exceeds `max_tokens` first shrinks
/// candidate descriptions (halving down to 50 chars), then drops them.
/// Throws BudgetExceeded if even the bare prompt is too long.
std::string build_prompt_within_budget(const Query& query,
                                       const std::vector<Candidate>& candidates,
                                       const Ontology& ontology, const PromptConfig& config,
                                       std::optional<std::size_t> max_tokens);

/// Follow-up line appended when a reply could not be parsed.
std::string reask_suffix(const PromptConfig& config);

/// Never throws. Rules, highest priority first: "option N"; a line that is
/// "N" or starts with "N:"; the none label as a whole word. N must be below
/// n_options; earlier text wins within a rule.
Selection parse_response(std::string_view text, std::size_t n_options,
                         std::string_view none_label);

class LlmEndpoint {
 public:
  virtual ~LlmEndpoint() = default;
  /// Raw completion text. Throws Error{Transport|Timeout|BudgetExceeded|MissingFixture}.
  virtual std::string complete(const std::string& prompt) = 0;
  virtual std::optional<std::size_t> max_prompt_tokens() const { return std::nullopt; }
};

struct RankOptions {
  int max_reasks = 1;
};

/// Build prompt, complete, parse; re-asks on ParseFailure. External failures
/// are captured as SelectionKind::EndpointFailure rather than thrown.
LinkResult rank(const Query& query, const std::vector<Candidate>& candidates,
                const Ontology& ontology, const PromptConfig& config, LlmEndpoint& endpoint,
                const RankOptions& options = {});

}  // namespace conlink
