// Copyright 2026 The conlink Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "conlink/embedding.hpp"
#include "conlink/memory.hpp"
#include "conlink/ontology.hpp"
#include "conlink/ranker.hpp"

namespace conlink {

struct RetrievalRecord {
  std::string query_id;
  std::vector<Candidate> candidates;

  friend bool operator==(const RetrievalRecord&, const RetrievalRecord&) = default;
};

/// Embeds every query (see query_text) and retrieves its top-k candidates.
std::vector<RetrievalRecord> retrieve_all(const Memory& memory, Embedder& embedder,
                                          std::span<const Query> queries, std::size_t k,
                                          std::size_t workers = 1);

/// JSON Lines: {"query_id", "candidates": [{"cid", "score", "variant"}]}.
std::string serialize_retrievals(std::span<const RetrievalRecord> records);
std::vector<RetrievalRecord> parse_retrievals(std::string_view text);
std::vector<RetrievalRecord> load_retrievals(const std::filesystem::path& path);
/// SHA-256 of the serialized form; identifies a retrieval run.
std::string retrieval_digest(std::span<const RetrievalRecord> records);

/// Runs work(i) for i in [0, n) on up to `workers` threads and calls
/// emit(i, result) on the calling thread in index order. The first exception
/// stops further work; results before the failing index are still emitted.
void run_ordered(std::size_t n, std::size_t workers,
                 const std::function<LinkResult(std::size_t)>& work,
                 const std::function<void(std::size_t, LinkResult&&)>& emit);

/// Ranks each query against its retrieval record (matched by position).
std::vector<LinkResult> rank_all(std::span<const Query> queries,
                                 std::span<const RetrievalRecord> retrievals,
                                 const Ontology& ontology, const PromptConfig& config,
                                 LlmEndpoint& endpoint, std::size_t concurrency = 1,
                                 const RankOptions& options = {});

struct LinkRunOptions {
  std::size_t concurrency = 1;
  RankOptions rank;
  /// Rank at most this many pending queries, then stop (partial run).
  std::optional<std::size_t> limit;
};

struct LinkRunSummary {
  std::size_t total = 0;
  std::size_t resumed = 0;  // taken from the detail log
  std::size_t ranked = 0;   // ranked in this run
  std::size_t endpoint_failures = 0;
  bool complete = false;    // every query has a result
};

/// One detail-log line per ranked query; the log doubles as the resume state.
std::string detail_log_line(const LinkResult& result, std::string_view template_id);
/// Parses a detail log, keeping the last well-formed line per query id.
/// Malformed lines (e.g. a torn final write) are ignored.
std::vector<LinkResult> parse_detail_log(std::string_view text);

/// Ranks every query whose current prompt digest is not already recorded in
/// `detail_log` with a usable selection, appending each new result to the log
/// in input order. Returns results for all queries in input order; queries
/// left pending by `limit` are absent.
std::vector<LinkResult> run_link(std::span<const Query> queries,
                                 std::span<const RetrievalRecord> retrievals,
                                 const Ontology& ontology, const PromptConfig& config,
                                 LlmEndpoint& endpoint, const std::filesystem::path& detail_log,
                                 const LinkRunOptions& options, LinkRunSummary* summary = nullptr);

/// TSV: query_id, predicted id or NONE, retrieval score, selection kind.
std::string serialize_predictions(std::span<const LinkResult> results);
std::vector<LinkResult> parse_predictions(std::string_view text);
std::vector<LinkResult> load_predictions(const std::filesystem::path& path);

}  // namespace conlink
