// Copyright 2026 The conlink Authors
// SPDX-License-Identifier: Apache-2.0

#include "conlink/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>
#include <unordered_map>

#include "conlink/error.hpp"
#include "conlink/text.hpp"
#include "json.hpp"

namespace conlink {

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json candidates_json(const std::vector<Candidate>& candidates) {
  auto arr = ordered_json::array();
  for (const auto& c : candidates) {
    ordered_json j;
    j["cid"] = c.concept_id;
    // Round-trippable but short: nine significant digits.
    j["score"] = std::stod(format_float9(c.score));
    j["variant"] = variant_tag(c.variant);
    arr.push_back(std::move(j));
  }
  return arr;
}

std::vector<Candidate> candidates_from_json(const nlohmann::json& arr) {
  std::vector<Candidate> out;
  for (const auto& j : arr) {
    auto variant = parse_variant(j.at("variant").get<std::string>());
    if (!variant) throw Error(ErrorCode::MalformedRecord, "unknown variant");
    out.push_back({j.at("cid").get<std::string>(), j.at("score").get<double>(), *variant});
  }
  return out;
}

/// Retrieval score reported next to a prediction: the chosen candidate's
/// score, or the top candidate's when nothing was chosen.
double prediction_score(const LinkResult& r) {
  if (r.candidates.empty()) return 0.0;
  if (r.selection.kind == SelectionKind::Option && r.selection.index < r.candidates.size()) {
    return r.candidates[r.selection.index].score;
  }
  return r.candidates.front().score;
}

bool same_concepts(const std::vector<Candidate>& a, const std::vector<Candidate>& b) {
  return std::equal(a.begin(), a.end(), b.begin(), b.end(),
                    [](const Candidate& x, const Candidate& y) {
                      return x.concept_id == y.concept_id;
                    });
}

}  // namespace

std::vector<RetrievalRecord> retrieve_all(const Memory& memory, Embedder& embedder,
                                          std::span<const Query> queries, std::size_t k,
                                          std::size_t workers) {
  std::vector<std::string> texts;
  texts.reserve(queries.size());
  for (const auto& q : queries) texts.push_back(query_text(q));
  auto vectors = embedder.embed_batch(texts);

  std::vector<RetrievalRecord> out;
  out.reserve(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    out.push_back({queries[i].id, retrieve_top_k(memory, vectors[i], k, workers)});
  }
  return out;
}

std::string serialize_retrievals(std::span<const RetrievalRecord> records) {
  std::string out;
  for (const auto& r : records) {
    ordered_json j;
    j["query_id"] = r.query_id;
    j["candidates"] = candidates_json(r.candidates);
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<RetrievalRecord> parse_retrievals(std::string_view text) {
  std::vector<RetrievalRecord> out;
  std::size_t line_no = 0;
  for (const auto& line : split(text, '\n')) {
    ++line_no;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      out.push_back({j.at("query_id").get<std::string>(), candidates_from_json(j.at("candidates"))});
    } catch (const nlohmann::json::exception&) {
      throw Error(ErrorCode::MalformedRecord, "bad retrieval record").at_line(line_no);
    }
  }
  return out;
}

std::vector<RetrievalRecord> load_retrievals(const std::filesystem::path& path) {
  return parse_retrievals(read_file(path));
}

std::string retrieval_digest(std::span<const RetrievalRecord> records) {
  return sha256_hex(serialize_retrievals(records));
}

void run_ordered(std::size_t n, std::size_t workers,
                 const std::function<LinkResult(std::size_t)>& work,
                 const std::function<void(std::size_t, LinkResult&&)>& emit) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) emit(i, work(i));
    return;
  }

  std::vector<std::optional<LinkResult>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  std::mutex mutex;
  std::condition_variable ready;
  std::atomic<std::size_t> next_task{0};
  std::atomic<bool> stop{false};

  auto worker = [&] {
    while (!stop.load()) {
      const auto i = next_task.fetch_add(1);
      if (i >= n) return;
      std::optional<LinkResult> result;
      std::exception_ptr error;
      try {
        result = work(i);
      } catch (...) {
        error = std::current_exception();
        stop = true;
      }
      {
        std::lock_guard lock(mutex);
        slots[i] = std::move(result);
        errors[i] = error;
      }
      ready.notify_all();
    }
  };

  std::exception_ptr failure;
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);

    for (std::size_t i = 0; i < n; ++i) {
      std::unique_lock lock(mutex);
      // Task i will be filled iff some worker fetched it before stopping.
      ready.wait(lock, [&] {
        return slots[i].has_value() || errors[i] != nullptr ||
               (stop.load() && next_task.load() <= i);
      });
      if (!slots[i]) {
        stop = true;
        for (std::size_t j = i; j < n && !failure; ++j) failure = errors[j];
        break;
      }
      auto value = std::move(*slots[i]);
      slots[i].reset();
      lock.unlock();
      try {
        emit(i, std::move(value));
      } catch (...) {
        failure = std::current_exception();
        stop = true;
        break;
      }
    }
  }
  if (failure) std::rethrow_exception(failure);
}

std::vector<LinkResult> rank_all(std::span<const Query> queries,
                                 std::span<const RetrievalRecord> retrievals,
                                 const Ontology& ontology, const PromptConfig& config,
                                 LlmEndpoint& endpoint, std::size_t concurrency,
                                 const RankOptions& options) {
  if (queries.size() != retrievals.size()) {
    throw Error(ErrorCode::Invariant, "queries and retrievals differ in length");
  }
  std::vector<LinkResult> out;
  out.reserve(queries.size());
  run_ordered(
      queries.size(), concurrency,
      [&](std::size_t i) {
        return rank(queries[i], retrievals[i].candidates, ontology, config, endpoint, options);
      },
      [&](std::size_t, LinkResult&& r) { out.push_back(std::move(r)); });
  return out;
}

std::string detail_log_line(const LinkResult& r, std::string_view template_id) {
  ordered_json j;
  j["query_id"] = r.query_id;
  j["template_id"] = template_id;
  j["prompt_digest"] = r.prompt_digest;
  j["candidates"] = candidates_json(r.candidates);
  j["selection"] = to_string(r.selection.kind);
  if (r.selection.kind == SelectionKind::Option) j["index"] = r.selection.index;
  j["resolved"] = r.resolved ? ordered_json(*r.resolved) : ordered_json(nullptr);
  j["attempts"] = r.attempts;
  j["responses"] = r.responses;
  if (!r.error.empty()) j["error"] = r.error;
  return j.dump();
}

std::vector<LinkResult> parse_detail_log(std::string_view text) {
  std::vector<LinkResult> out;
  std::unordered_map<std::string, std::size_t> position;
  for (const auto& line : split(text, '\n')) {
    if (line.empty()) continue;
    LinkResult r;
    try {
      auto j = nlohmann::json::parse(line);
      r.query_id = j.at("query_id").get<std::string>();
      r.prompt_digest = j.at("prompt_digest").get<std::string>();
      r.candidates = candidates_from_json(j.at("candidates"));
      auto kind = parse_selection_kind(j.at("selection").get<std::string>());
      if (!kind) continue;
      r.selection.kind = *kind;
      if (*kind == SelectionKind::Option) {
        r.selection.index = j.at("index").get<std::size_t>();
        if (r.selection.index >= r.candidates.size()) continue;
        r.resolved = r.candidates[r.selection.index].concept_id;
      }
      r.attempts = j.at("attempts").get<int>();
      r.responses = j.at("responses").get<std::vector<std::string>>();
      if (!r.responses.empty()) r.selection.raw_response = r.responses.back();
      r.error = j.value("error", "");
    } catch (const std::exception&) {
      continue;
    }
    if (auto it = position.find(r.query_id); it != position.end()) {
      out[it->second] = std::move(r);
    } else {
      position.emplace(r.query_id, out.size());
      out.push_back(std::move(r));
    }
  }
  return out;
}

std::vector<LinkResult> run_link(std::span<const Query> queries,
                                 std::span<const RetrievalRecord> retrievals,
                                 const Ontology& ontology, const PromptConfig& config,
                                 LlmEndpoint& endpoint, const std::filesystem::path& detail_log,
                                 const LinkRunOptions& options, LinkRunSummary* summary) {
  if (queries.size() != retrievals.size()) {
    throw Error(ErrorCode::Invariant, "queries and retrievals differ in length");
  }

  std::unordered_map<std::string, LinkResult> logged;
  bool needs_newline = false;
  if (std::filesystem::exists(detail_log)) {
    const auto text = read_file(detail_log);
    needs_newline = !text.empty() && text.back() != '\n';
    for (auto& r : parse_detail_log(text)) logged.insert_or_assign(r.query_id, std::move(r));
  }

  LinkRunSummary local;
  local.total = queries.size();
  std::vector<std::optional<LinkResult>> results(queries.size());
  std::vector<std::size_t> pending;

  for (std::size_t i = 0; i < queries.size(); ++i) {
    auto it = logged.find(queries[i].id);
    if (it == logged.end() || it->second.selection.kind == SelectionKind::EndpointFailure) {
      pending.push_back(i);
      continue;
    }
    std::string digest;
    if (!retrievals[i].candidates.empty()) {
      try {
        digest = sha256_hex(build_prompt_within_budget(queries[i], retrievals[i].candidates,
                                                       ontology, config,
                                                       endpoint.max_prompt_tokens()));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::BudgetExceeded) throw;
      }
    }
    if (digest == it->second.prompt_digest &&
        same_concepts(it->second.candidates, retrievals[i].candidates)) {
      results[i] = std::move(it->second);
      ++local.resumed;
    } else {
      pending.push_back(i);
    }
  }
  if (options.limit && pending.size() > *options.limit) pending.resize(*options.limit);

  std::ofstream log(detail_log, std::ios::app | std::ios::binary);
  if (!log) throw Error(ErrorCode::Io, "cannot open detail log " + detail_log.string());
  if (needs_newline) log << '\n';

  run_ordered(
      pending.size(), options.concurrency,
      [&](std::size_t j) {
        const auto i = pending[j];
        return rank(queries[i], retrievals[i].candidates, ontology, config, endpoint,
                    options.rank);
      },
      [&](std::size_t j, LinkResult&& r) {
        log << detail_log_line(r, config.template_id) << '\n';
        log.flush();
        if (r.selection.kind == SelectionKind::EndpointFailure) ++local.endpoint_failures;
        ++local.ranked;
        results[pending[j]] = std::move(r);
      });

  std::vector<LinkResult> out;
  out.reserve(queries.size());
  for (auto& r : results) {
    if (r) out.push_back(std::move(*r));
  }
  local.complete = out.size() == queries.size();
  if (summary) *summary = local;
  return out;
}

std::string serialize_predictions(std::span<const LinkResult> results) {
  std::string out;
  for (const auto& r : results) {
    out += r.query_id;
    out += '\t';
    out += r.resolved ? *r.resolved : std::string("NONE");
    out += '\t';
    out += format_float9(prediction_score(r));
    out += '\t';
    out += to_string(r.selection.kind);
    out += '\n';
  }
  return out;
}

std::vector<LinkResult> parse_predictions(std::string_view text) {
  std::vector<LinkResult> out;
  std::size_t line_no = 0;
  for (auto line : split(text, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split(line, '\t');
    if (fields.size() != 4) {
      throw Error(ErrorCode::MalformedRecord, "expected 4 tab-separated fields").at_line(line_no);
    }
    auto kind = parse_selection_kind(fields[3]);
    if (!kind) throw Error(ErrorCode::MalformedRecord, "unknown selection kind").at_line(line_no);
    LinkResult r;
    r.query_id = fields[0];
    r.selection.kind = *kind;
    if (*kind == SelectionKind::Option) {
      if (fields[1] == "NONE") {
        throw Error(ErrorCode::MalformedRecord, "option row without an id").at_line(line_no);
      }
      r.resolved = fields[1];
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<LinkResult> load_predictions(const std::filesystem::path& path) {
  return parse_predictions(read_file(path));
}

}  // namespace conlink
