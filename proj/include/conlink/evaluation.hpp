// Copyright 2026 The conlink Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "conlink/pipeline.hpp"
#include "conlink/ranker.hpp"

namespace conlink {

struct GoldPair {
  std::string source_id;
  std::string target_id;

  friend bool operator==(const GoldPair&, const GoldPair&) = default;
};

struct GoldSet {
  std::vector<GoldPair> pairs;
  /// Records whose target names several concepts ("A|B"); not scored.
  std::size_t skipped_composite = 0;
};

/// Composite ids join several concept ids with '|'.
bool is_composite_id(std::string_view id);

/// JSON Lines {"source", "target"}; duplicate pairs are rejected.
GoldSet parse_gold(std::string_view text);
GoldSet load_gold(const std::filesystem::path& path);
/// Gold pairs taken from the queries' own gold fields.
GoldSet gold_from_queries(std::span<const Query> queries);

/// query id -> concept id. Throws MalformedRecord when one source has
/// several targets.
std::map<std::string, std::string> gold_map(std::span<const GoldPair> pairs);

struct Counts {
  std::size_t n_queries = 0;
  std::size_t n_predicted = 0;
  std::size_t n_correct = 0;
  std::size_t n_gold = 0;

  friend bool operator==(const Counts&, const Counts&) = default;
};

struct PrfScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  Counts counts;
};

/// Harmonic mean; 0 when p + r is 0.
double f1_from(double precision, double recall);

/// Correct resolutions over gold size. None, ParseFailure and endpoint
/// failures count as wrong. Throws MissingPrediction.
double accuracy(std::span<const LinkResult> results,
                const std::map<std::string, std::string>& gold);

/// Precision over results that resolved to a concept; recall over gold pairs.
PrfScores prf1(std::span<const LinkResult> results, std::span<const GoldPair> gold);

/// Fraction of gold queries whose target is among the first k retrieved ids.
/// `ks` must be ascending. Throws MissingRetrieval.
std::map<std::size_t, double> hits_at_k(
    const std::map<std::string, std::vector<std::string>>& retrievals,
    const std::map<std::string, std::string>& gold, std::span<const std::size_t> ks);

std::map<std::string, std::vector<std::string>> ranked_ids(
    std::span<const RetrievalRecord> records);

struct MetricsReport {
  std::optional<double> accuracy;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
  std::map<std::size_t, double> hits_at;
  Counts counts;
};

/// Accuracy (when gold is one-to-one) plus precision/recall/F1.
MetricsReport evaluate_links(std::span<const LinkResult> results, std::span<const GoldPair> gold);
MetricsReport evaluate_retrievals(std::span<const RetrievalRecord> records,
                                  std::span<const GoldPair> gold,
                                  std::span<const std::size_t> ks);

struct ReportRow {
  std::string name;
  std::optional<MetricsReport> metrics;
  std::string retrieval_digest;
  std::string error;
};

/// One run's report. `provenance` is written first, in insertion order.
struct Report {
  std::vector<std::pair<std::string, std::string>> provenance;
  std::vector<ReportRow> rows;
};

/// JSON object with "provenance" and "rows"; metric values at 4 d.p.
std::string report_to_json(const Report& report);
/// Aligned plain-text table.
std::string report_to_text(const Report& report);

struct GridEntry {
  std::string name;
  PromptConfig config;
  /// Optional per-row endpoint; the run's default endpoint otherwise.
  std::shared_ptr<LlmEndpoint> endpoint;
};

/// JSON Lines grid: {"name", "include_source_context", "include_candidate_context",
/// "one_shot_file", "none_label", "max_option_context_chars", "abstract_tags",
/// "template_id"}. Relative one-shot paths resolve against the grid file.
std::vector<GridEntry> load_grid(const std::filesystem::path& path, const PromptConfig& base);

struct AblationOptions {
  std::size_t concurrency = 1;
  RankOptions rank;
};

/// One row per grid entry, in grid order, all sharing `retrievals`. A row
/// whose pipeline throws, or in which any query hit an endpoint failure, is
/// reported as an error row; the remaining rows still run.
std::vector<ReportRow> run_ablation(std::span<const Query> queries, const Ontology& ontology,
                                    std::span<const RetrievalRecord> retrievals,
                                    LlmEndpoint& endpoint, std::span<const GridEntry> grid,
                                    std::span<const GoldPair> gold,
                                    const AblationOptions& options = {});

/// Convenience overload that retrieves once from `memory`, then ablates.
std::vector<ReportRow> run_ablation(std::span<const Query> queries, const Ontology& ontology,
                                    const Memory& memory, Embedder& embedder, std::size_t k,
                                    LlmEndpoint& endpoint, std::span<const GridEntry> grid,
                                    std::span<const GoldPair> gold,
                                    const AblationOptions& options = {});

}  // namespace conlink
