// Copyright 2026 The conlink Authors
// SPDX-License-Identifier: Apache-2.0

#include "conlink/ranker.hpp"

#include <algorithm>
#include <cctype>

#include "conlink/error.hpp"
#include "conlink/text.hpp"

namespace conlink {

namespace {

constexpr std::size_t kMinOptionContextChars = 50;

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
bool is_word(char c) { return is_alpha(c) || is_digit(c) || c == '_'; }

/// Parses a run of digits; nullopt when it would not fit comfortably.
std::optional<std::size_t> parse_index(std::string_view digits) {
  if (digits.empty() || digits.size() > 9) return std::nullopt;
  std::size_t n = 0;
  for (char c : digits) n = n * 10 + static_cast<std::size_t>(c - '0');
  return n;
}

std::optional<std::size_t> match_option_phrase(std::string_view text, std::size_t n_options) {
  const std::string lower = to_lower_ascii(text);
  constexpr std::string_view kWord = "option";
  for (auto pos = lower.find(kWord); pos != std::string::npos;
       pos = lower.find(kWord, pos + 1)) {
    if (pos > 0 && is_alpha(lower[pos - 1])) continue;
    auto i = pos + kWord.size();
    while (i < lower.size() && (lower[i] == ' ' || lower[i] == '\t')) ++i;
    auto start = i;
    while (i < lower.size() && is_digit(lower[i])) ++i;
    auto n = parse_index(std::string_view(lower).substr(start, i - start));
    if (n && *n < n_options) return n;
  }
  return std::nullopt;
}

std::optional<std::size_t> match_numbered_line(std::string_view text, std::size_t n_options) {
  for (const auto& raw : split(text, '\n')) {
    auto line = normalize_whitespace(raw);
    std::size_t i = 0;
    while (i < line.size() && is_digit(line[i])) ++i;
    if (i == 0) continue;
    if (i != line.size() && line[i] != ':') continue;
    auto n = parse_index(std::string_view(line).substr(0, i));
    if (n && *n < n_options) return n;
  }
  return std::nullopt;
}

bool contains_word(std::string_view text, std::string_view word) {
  if (word.empty()) return false;
  const std::string lower = to_lower_ascii(text);
  const std::string needle = to_lower_ascii(word);
  for (auto pos = lower.find(needle); pos != std::string::npos;
       pos = lower.find(needle, pos + 1)) {
    const bool left_ok = pos == 0 || !is_word(lower[pos - 1]);
    const auto end = pos + needle.size();
    const bool right_ok = end == lower.size() || !is_word(lower[end]);
    if (left_ok && right_ok) return true;
  }
  return false;
}

std::string render_prompt(const Query& query, const std::vector<Candidate>& candidates,
                          const Ontology& ontology, const PromptConfig& config,
                          bool with_descriptions, std::size_t description_chars) {
  const auto& none = config.none_label;
  std::string p;
  p += "You are an expert in biomedical ontologies. Your task is to link a query concept to "
       "the concept in a target ontology that denotes the same entity. The candidate concepts "
       "below were retrieved from the target ontology; each one is an option. Select the "
       "option that is the same concept as the query. If none of the options is the same "
       "concept, select the \"";
  p += none;
  p += "\" option.\n";

  if (config.one_shot) {
    p += "\n### Example\nQuery: ";
    p += config.one_shot->query;
    p += "\nOptions:\n";
    p += config.one_shot->options;
    if (!config.one_shot->options.empty() && config.one_shot->options.back() != '\n') p += '\n';
    p += "Answer: ";
    p += config.one_shot->answer;
    p += '\n';
  }

  p += "\n### Task\nQuery: ";
  p += query.mention;
  p += '\n';
  if (config.include_source_context && query.context && !query.context->empty()) {
    if (config.abstract_tags) {
      p += "<abstract>\n";
      p += *query.context;
      p += "\n</abstract>\n";
    } else {
      p += "Query context: ";
      p += *query.context;
      p += '\n';
    }
  }

  p += "\nOptions:\n";
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = ontology.get(candidates[i].concept_id);
    p += std::to_string(i);
    p += ": ";
    p += c.name;
    p += '\n';
    if (with_descriptions && c.has_description()) {
      p += "   Description: ";
      p += truncate_at_word(*c.description, description_chars);
      p += '\n';
    }
  }
  p += none;
  p += ": none of the options above\n";

  p += "\nAnswer with exactly one option, written as \"option N\", or with \"";
  p += none;
  p += "\", then give a brief justification.\n";
  return p;
}

void check_candidates(const std::vector<Candidate>& candidates, const Ontology& ontology) {
  if (candidates.empty()) throw Error(ErrorCode::EmptyCandidates, "");
  for (const auto& c : candidates) {
    if (!ontology.find(c.concept_id)) {
      throw Error(ErrorCode::UnresolvableCandidate, c.concept_id);
    }
  }
}

}  // namespace

OneShotExample load_one_shot(const std::filesystem::path& path) {
  OneShotExample ex;
  std::string* current = nullptr;
  bool seen_query = false, seen_options = false, seen_answer = false;
  for (auto& line : split(read_file(path), '\n')) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line == "[query]") {
      current = &ex.query;
      seen_query = true;
    } else if (line == "[options]") {
      current = &ex.options;
      seen_options = true;
    } else if (line == "[answer]") {
      current = &ex.answer;
      seen_answer = true;
    } else if (current) {
      *current += line;
      *current += '\n';
    }
  }
  if (!seen_query || !seen_options || !seen_answer) {
    throw Error(ErrorCode::Config,
                "one-shot file needs [query], [options] and [answer] sections: " + path.string());
  }
  auto trim_tail = [](std::string& s) {
    while (!s.empty() && (s.back() == '\n' || s.back() == ' ')) s.pop_back();
  };
  trim_tail(ex.query);
  trim_tail(ex.options);
  trim_tail(ex.answer);
  return ex;
}

void PromptConfig::validate() const {
  if (none_label.empty() || none_label.find('\n') != std::string::npos) {
    throw Error(ErrorCode::Config, "none_label must be a non-empty single line");
  }
  if (std::all_of(none_label.begin(), none_label.end(), is_digit)) {
    throw Error(ErrorCode::Config, "none_label must not look like an option index");
  }
  if (max_option_context_chars < kMinOptionContextChars) {
    throw Error(ErrorCode::Config, "max_option_context_chars must be at least 50");
  }
  if (template_id != kDefaultTemplateId) {
    throw Error(ErrorCode::Config, "unknown template '" + template_id + "'");
  }
}

std::string_view to_string(SelectionKind kind) {
  switch (kind) {
    case SelectionKind::Option: return "option";
    case SelectionKind::NoneOfTheAbove: return "none";
    case SelectionKind::ParseFailure: return "parse_failure";
    case SelectionKind::EndpointFailure: return "endpoint_failure";
  }
  return "unknown";
}

std::optional<SelectionKind> parse_selection_kind(std::string_view s) {
  for (auto k : {SelectionKind::Option, SelectionKind::NoneOfTheAbove,
                 SelectionKind::ParseFailure, SelectionKind::EndpointFailure}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

std::size_t estimate_tokens(std::string_view text) { return (text.size() + 3) / 4; }

std::string build_prompt(const Query& query, const std::vector<Candidate>& candidates,
                         const Ontology& ontology, const PromptConfig& config) {
  check_candidates(candidates, ontology);
  return render_prompt(query, candidates, ontology, config, config.include_candidate_context,
                       config.max_option_context_chars);
}

std::string build_prompt_within_budget(const Query& query,
                                       const std::vector<Candidate>& candidates,
                                       const Ontology& ontology, const PromptConfig& config,
                                       std::optional<std::size_t> max_tokens) {
  auto prompt = build_prompt(query, candidates, ontology, config);
  if (!max_tokens || estimate_tokens(prompt) <= *max_tokens) return prompt;

  if (config.include_candidate_context) {
    auto chars = config.max_option_context_chars;
    while (chars > kMinOptionContextChars) {
      chars = std::max(kMinOptionContextChars, chars / 2);
      prompt = render_prompt(query, candidates, ontology, config, true, chars);
      if (estimate_tokens(prompt) <= *max_tokens) return prompt;
    }
    prompt = render_prompt(query, candidates, ontology, config, false, 0);
    if (estimate_tokens(prompt) <= *max_tokens) return prompt;
  }
  throw Error(ErrorCode::BudgetExceeded, "prompt needs ~" +
                                             std::to_string(estimate_tokens(prompt)) +
                                             " tokens, budget " + std::to_string(*max_tokens));
}

std::string reask_suffix(const PromptConfig& config) {
  return "\nAnswer with only the option number or " + config.none_label + ".\n";
}

Selection parse_response(std::string_view text, std::size_t n_options,
                         std::string_view none_label) {
  Selection s;
  s.raw_response = std::string(text);
  if (auto n = match_option_phrase(text, n_options)) {
    s.kind = SelectionKind::Option;
    s.index = *n;
  } else if (auto m = match_numbered_line(text, n_options)) {
    s.kind = SelectionKind::Option;
    s.index = *m;
  } else if (contains_word(text, none_label)) {
    s.kind = SelectionKind::NoneOfTheAbove;
  } else {
    s.kind = SelectionKind::ParseFailure;
  }
  return s;
}

LinkResult rank(const Query& query, const std::vector<Candidate>& candidates,
                const Ontology& ontology, const PromptConfig& config, LlmEndpoint& endpoint,
                const RankOptions& options) {
  LinkResult r;
  r.query_id = query.id;
  r.candidates = candidates;
  if (candidates.empty()) {
    r.selection.kind = SelectionKind::NoneOfTheAbove;
    return r;
  }

  const auto started = std::chrono::steady_clock::now();
  auto finish = [&] {
    r.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - started);
  };

  std::string prompt;
  try {
    prompt = build_prompt_within_budget(query, candidates, ontology, config,
                                        endpoint.max_prompt_tokens());
  } catch (const Error& e) {
    if (e.code() != ErrorCode::BudgetExceeded) throw;
    r.selection.kind = SelectionKind::EndpointFailure;
    r.error = e.what();
    finish();
    return r;
  }
  r.prompt_digest = sha256_hex(prompt);

  const int max_calls = 1 + std::max(0, options.max_reasks);
  std::string current = prompt;
  for (int call = 0; call < max_calls; ++call) {
    std::string response;
    try {
      ++r.attempts;
      response = endpoint.complete(current);
    } catch (const Error& e) {
      if (!e.is_external() && e.code() != ErrorCode::BudgetExceeded) throw;
      r.selection = Selection{SelectionKind::EndpointFailure, 0, ""};
      r.error = e.what();
      finish();
      return r;
    }
    r.responses.push_back(response);
    r.selection = parse_response(response, candidates.size(), config.none_label);
    if (r.selection.kind != SelectionKind::ParseFailure) break;
    current = prompt + reask_suffix(config);
  }

  if (r.selection.kind == SelectionKind::Option) {
    r.resolved = candidates[r.selection.index].concept_id;
  }
  finish();
  return r;
}

}  // namespace conlink
