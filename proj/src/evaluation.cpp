// Copyright 2026 The conlink Authors
// SPDX-License-Identifier: Apache-2.0

#include "conlink/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

#include "conlink/error.hpp"
#include "conlink/text.hpp"
#include "json.hpp"

namespace conlink {

namespace {

using ordered_json = nlohmann::ordered_json;

double round4(double x) { return std::round(x * 1e4) / 1e4; }

std::string cell(const std::optional<double>& v) {
  return v ? format_fixed(*v, 4) : std::string("-");
}

}  // namespace

bool is_composite_id(std::string_view id) { return id.find('|') != std::string_view::npos; }

GoldSet parse_gold(std::string_view text) {
  GoldSet out;
  std::set<std::pair<std::string, std::string>> seen;
  std::size_t line_no = 0;
  for (const auto& line : split(text, '\n')) {
    ++line_no;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    GoldPair p;
    try {
      auto j = nlohmann::json::parse(line);
      p.source_id = j.at("source").get<std::string>();
      p.target_id = j.at("target").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      throw Error(ErrorCode::MalformedRecord, "gold record needs string source and target")
          .at_line(line_no);
    }
    if (is_composite_id(p.target_id)) {
      ++out.skipped_composite;
      continue;
    }
    if (!seen.emplace(p.source_id, p.target_id).second) {
      throw Error(ErrorCode::MalformedRecord, "duplicate gold pair").at_line(line_no);
    }
    out.pairs.push_back(std::move(p));
  }
  return out;
}

GoldSet load_gold(const std::filesystem::path& path) { return parse_gold(read_file(path)); }

GoldSet gold_from_queries(std::span<const Query> queries) {
  GoldSet out;
  for (const auto& q : queries) {
    if (!q.gold) continue;
    if (is_composite_id(*q.gold)) {
      ++out.skipped_composite;
      continue;
    }
    out.pairs.push_back({q.id, *q.gold});
  }
  return out;
}

std::map<std::string, std::string> gold_map(std::span<const GoldPair> pairs) {
  std::map<std::string, std::string> out;
  for (const auto& p : pairs) {
    if (!out.emplace(p.source_id, p.target_id).second) {
      throw Error(ErrorCode::MalformedRecord, "source " + p.source_id + " has several targets");
    }
  }
  return out;
}

double f1_from(double precision, double recall) {
  if (precision + recall <= 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

double accuracy(std::span<const LinkResult> results,
                const std::map<std::string, std::string>& gold) {
  std::unordered_map<std::string, const LinkResult*> by_id;
  for (const auto& r : results) by_id.emplace(r.query_id, &r);
  std::size_t correct = 0;
  for (const auto& [qid, target] : gold) {
    auto it = by_id.find(qid);
    if (it == by_id.end()) throw Error(ErrorCode::MissingPrediction, qid);
    if (it->second->resolved && *it->second->resolved == target) ++correct;
  }
  return gold.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(gold.size());
}

PrfScores prf1(std::span<const LinkResult> results, std::span<const GoldPair> gold) {
  std::set<std::pair<std::string, std::string>> gold_set;
  for (const auto& p : gold) gold_set.emplace(p.source_id, p.target_id);

  PrfScores s;
  s.counts.n_queries = results.size();
  s.counts.n_gold = gold_set.size();
  for (const auto& r : results) {
    if (!r.resolved) continue;
    ++s.counts.n_predicted;
    if (gold_set.count({r.query_id, *r.resolved})) ++s.counts.n_correct;
  }
  if (s.counts.n_predicted > 0) {
    s.precision = static_cast<double>(s.counts.n_correct) / static_cast<double>(s.counts.n_predicted);
  }
  if (s.counts.n_gold > 0) {
    s.recall = static_cast<double>(s.counts.n_correct) / static_cast<double>(s.counts.n_gold);
  }
  s.f1 = f1_from(s.precision, s.recall);
  return s;
}

std::map<std::size_t, double> hits_at_k(
    const std::map<std::string, std::vector<std::string>>& retrievals,
    const std::map<std::string, std::string>& gold, std::span<const std::size_t> ks) {
  if (ks.empty()) throw Error(ErrorCode::Config, "no k values for hits@k");
  if (ks.front() == 0 || !std::is_sorted(ks.begin(), ks.end()) ||
      std::adjacent_find(ks.begin(), ks.end()) != ks.end()) {
    throw Error(ErrorCode::Config, "hits@k values must be positive and strictly ascending");
  }

  std::map<std::size_t, std::size_t> hits;
  for (auto k : ks) hits[k] = 0;
  for (const auto& [qid, target] : gold) {
    auto it = retrievals.find(qid);
    if (it == retrievals.end()) throw Error(ErrorCode::MissingRetrieval, qid);
    const auto& ranked = it->second;
    auto pos = std::find(ranked.begin(), ranked.end(), target);
    if (pos == ranked.end()) continue;
    const auto rank = static_cast<std::size_t>(pos - ranked.begin()) + 1;
    for (auto k : ks) {
      if (rank <= k) ++hits[k];
    }
  }

  std::map<std::size_t, double> out;
  for (auto k : ks) {
    out[k] = gold.empty() ? 0.0
                          : static_cast<double>(hits[k]) / static_cast<double>(gold.size());
  }
  return out;
}

std::map<std::string, std::vector<std::string>> ranked_ids(
    std::span<const RetrievalRecord> records) {
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& r : records) {
    auto& ids = out[r.query_id];
    for (const auto& c : r.candidates) ids.push_back(c.concept_id);
  }
  return out;
}

MetricsReport evaluate_links(std::span<const LinkResult> results, std::span<const GoldPair> gold) {
  MetricsReport m;
  std::optional<std::map<std::string, std::string>> one_to_one;
  try {
    one_to_one = gold_map(gold);
  } catch (const Error&) {
  }
  if (one_to_one) m.accuracy = accuracy(results, *one_to_one);
  auto s = prf1(results, gold);
  m.precision = s.precision;
  m.recall = s.recall;
  m.f1 = s.f1;
  m.counts = s.counts;
  return m;
}

MetricsReport evaluate_retrievals(std::span<const RetrievalRecord> records,
                                  std::span<const GoldPair> gold,
                                  std::span<const std::size_t> ks) {
  MetricsReport m;
  const auto g = gold_map(gold);
  m.hits_at = hits_at_k(ranked_ids(records), g, ks);
  m.counts.n_queries = records.size();
  m.counts.n_gold = g.size();
  return m;
}

std::string report_to_json(const Report& report) {
  ordered_json j;
  ordered_json prov = ordered_json::object();
  for (const auto& [k, v] : report.provenance) prov[k] = v;
  j["provenance"] = prov;
  j["rows"] = ordered_json::array();
  for (const auto& row : report.rows) {
    ordered_json r;
    r["name"] = row.name;
    if (!row.retrieval_digest.empty()) r["retrieval_digest"] = row.retrieval_digest;
    if (row.metrics) {
      const auto& m = *row.metrics;
      auto put = [&](const char* key, const std::optional<double>& v) {
        if (v) r[key] = round4(*v);
      };
      put("accuracy", m.accuracy);
      put("precision", m.precision);
      put("recall", m.recall);
      put("f1", m.f1);
      if (!m.hits_at.empty()) {
        ordered_json h = ordered_json::object();
        for (const auto& [k, v] : m.hits_at) h[std::to_string(k)] = round4(v);
        r["hits_at"] = h;
      }
      r["counts"] = {{"n_queries", m.counts.n_queries},
                     {"n_predicted", m.counts.n_predicted},
                     {"n_correct", m.counts.n_correct},
                     {"n_gold", m.counts.n_gold}};
    }
    if (!row.error.empty()) r["error"] = row.error;
    j["rows"].push_back(std::move(r));
  }
  return j.dump(2) + "\n";
}

std::string report_to_text(const Report& report) {
  std::set<std::size_t> ks;
  for (const auto& row : report.rows) {
    if (row.metrics) {
      for (const auto& [k, v] : row.metrics->hits_at) ks.insert(k);
    }
  }

  std::vector<std::string> header{"row", "accuracy", "precision", "recall", "f1"};
  for (auto k : ks) header.push_back("hits@" + std::to_string(k));
  header.push_back("note");

  std::vector<std::vector<std::string>> table{header};
  for (const auto& row : report.rows) {
    std::vector<std::string> line{row.name};
    const MetricsReport empty;
    const auto& m = row.metrics ? *row.metrics : empty;
    line.push_back(cell(m.accuracy));
    line.push_back(cell(m.precision));
    line.push_back(cell(m.recall));
    line.push_back(cell(m.f1));
    for (auto k : ks) {
      auto it = m.hits_at.find(k);
      line.push_back(it == m.hits_at.end() ? "-" : format_fixed(it->second, 4));
    }
    line.push_back(row.error.empty() ? "" : "error: " + row.error);
    table.push_back(std::move(line));
  }

  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& line : table) {
    for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], line[c].size());
  }

  std::string out;
  for (const auto& [k, v] : report.provenance) out += "# " + k + ": " + v + "\n";
  for (const auto& line : table) {
    std::string text;
    for (std::size_t c = 0; c < line.size(); ++c) {
      text += line[c];
      if (c + 1 < line.size()) text += std::string(width[c] - line[c].size() + 2, ' ');
    }
    while (!text.empty() && text.back() == ' ') text.pop_back();
    out += text + "\n";
  }
  return out;
}

std::vector<GridEntry> load_grid(const std::filesystem::path& path, const PromptConfig& base) {
  std::vector<GridEntry> grid;
  std::size_t line_no = 0;
  for (const auto& line : split(read_file(path), '\n')) {
    ++line_no;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    GridEntry e;
    e.config = base;
    try {
      auto j = nlohmann::json::parse(line);
      e.name = j.at("name").get<std::string>();
      auto& c = e.config;
      c.include_source_context = j.value("include_source_context", c.include_source_context);
      c.include_candidate_context =
          j.value("include_candidate_context", c.include_candidate_context);
      c.none_label = j.value("none_label", c.none_label);
      c.max_option_context_chars = j.value("max_option_context_chars", c.max_option_context_chars);
      c.abstract_tags = j.value("abstract_tags", c.abstract_tags);
      c.template_id = j.value("template_id", c.template_id);
      if (auto it = j.find("one_shot_file"); it != j.end() && !it->is_null()) {
        std::filesystem::path shot = it->get<std::string>();
        if (shot.is_relative()) shot = path.parent_path() / shot;
        c.one_shot = load_one_shot(shot);
      } else if (j.contains("one_shot_file")) {
        c.one_shot.reset();
      }
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorCode::Config, std::string("bad grid row: ") + ex.what()).at_line(line_no);
    }
    try {
      e.config.validate();
    } catch (Error& ex) {
      throw std::move(ex).at_line(line_no);
    }
    grid.push_back(std::move(e));
  }
  if (grid.empty()) throw Error(ErrorCode::Config, "grid file has no rows: " + path.string());
  return grid;
}

std::vector<ReportRow> run_ablation(std::span<const Query> queries, const Ontology& ontology,
                                    std::span<const RetrievalRecord> retrievals,
                                    LlmEndpoint& endpoint, std::span<const GridEntry> grid,
                                    std::span<const GoldPair> gold,
                                    const AblationOptions& options) {
  if (grid.empty()) throw Error(ErrorCode::Config, "ablation grid is empty");
  const auto digest = retrieval_digest(retrievals);

  std::vector<ReportRow> rows;
  rows.reserve(grid.size());
  for (const auto& entry : grid) {
    ReportRow row;
    row.name = entry.name;
    row.retrieval_digest = digest;
    try {
      entry.config.validate();
      auto& ep = entry.endpoint ? *entry.endpoint : endpoint;
      auto results =
          rank_all(queries, retrievals, ontology, entry.config, ep, options.concurrency,
                   options.rank);
      std::size_t failures = 0;
      std::string first_error;
      for (const auto& r : results) {
        if (r.selection.kind == SelectionKind::EndpointFailure) {
          if (failures++ == 0) first_error = r.error;
        }
      }
      if (failures > 0) {
        row.error = std::to_string(failures) + " of " + std::to_string(results.size()) +
                    " queries failed at the endpoint; first: " + first_error;
      } else {
        row.metrics = evaluate_links(results, gold);
      }
    } catch (const Error& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<ReportRow> run_ablation(std::span<const Query> queries, const Ontology& ontology,
                                    const Memory& memory, Embedder& embedder, std::size_t k,
                                    LlmEndpoint& endpoint, std::span<const GridEntry> grid,
                                    std::span<const GoldPair> gold,
                                    const AblationOptions& options) {
  const auto retrievals = retrieve_all(memory, embedder, queries, k);
  return run_ablation(queries, ontology, retrievals, endpoint, grid, gold, options);
}

}  // namespace conlink
