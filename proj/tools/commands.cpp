// Copyright 2026 The conlink Authors
// SPDX-License-Identifier: Apache-2.0

#include "commands.hpp"

#include <CLI11.hpp>

#include "conlink/embedding.hpp"
#include "conlink/endpoints.hpp"
#include "conlink/error.hpp"
#include "conlink/evaluation.hpp"
#include "conlink/memory.hpp"
#include "conlink/ontology.hpp"
#include "conlink/pipeline.hpp"
#include "conlink/text.hpp"

namespace conlink::cli {

namespace fs = std::filesystem;

namespace {

const fs::path& require_input(const std::optional<fs::path>& p, const char* what) {
  if (!p) throw Error(ErrorCode::Config, std::string("missing --") + what);
  if (!fs::exists(*p)) throw Error(ErrorCode::Config, std::string(what) + " not found: " + p->string());
  return *p;
}

const fs::path& require_output(const std::optional<fs::path>& p, const char* what) {
  if (!p) throw Error(ErrorCode::Config, std::string("missing --") + what);
  return *p;
}

fs::path with_suffix(const fs::path& p, const char* suffix) {
  auto out = p;
  out += suffix;
  return out;
}

struct EndpointStack {
  std::shared_ptr<CountingEndpoint> counter;  // null in replay-only mode
  std::shared_ptr<FixtureEndpoint> fixtures;
  std::shared_ptr<LlmEndpoint> top;
};

EndpointStack make_endpoint_stack(const RunConfig& c) {
  const auto& target = c.endpoint.target;
  std::shared_ptr<LlmEndpoint> inner;
  if (target == "mock:exact") {
    inner = std::make_shared<MatchingMockEndpoint>(MatchingMockEndpoint::Mode::Exact);
  } else if (target == "mock:keyword") {
    inner = std::make_shared<MatchingMockEndpoint>(MatchingMockEndpoint::Mode::Keyword);
  } else if (target.rfind("http://", 0) == 0 || target.rfind("https://", 0) == 0) {
    inner = std::make_shared<RemoteChatEndpoint>(
        ChatEndpointSpec{target, c.endpoint.model, c.endpoint.timeout, c.endpoint.max_prompt_tokens});
  } else if (target != "replay") {
    throw Error(ErrorCode::Config, "unknown endpoint '" + target + "'");
  }

  EndpointStack s;
  if (inner) {
    s.counter = std::make_shared<CountingEndpoint>(inner);
    s.top = s.counter;
  }
  if (c.paths.fixtures) {
    s.fixtures = std::make_shared<FixtureEndpoint>(*c.paths.fixtures, s.top);
    s.top = s.fixtures;
  } else if (!inner) {
    throw Error(ErrorCode::Config, "endpoint 'replay' needs --fixtures");
  }
  return s;
}

Memory load_checked_memory(const RunConfig& c, std::ostream& err) {
  auto memory = load_memory(require_input(c.paths.memory, "memory"));
  if (auto warning = check_fingerprint(memory, c.provider, c.strict)) {
    err << "warning: " << *warning << "\n";
  }
  return memory;
}

std::unique_ptr<Embedder> query_embedder(const RunConfig& c) {
  return make_embedder(c.provider, c.paths.cache_dir);
}

std::vector<std::pair<std::string, std::string>> provenance(const RunConfig& c,
                                                            const std::string& command) {
  std::string ks;
  for (auto k : c.ks) ks += (ks.empty() ? "" : ",") + std::to_string(k);
  return {
      {"command", command},
      {"provider", c.provider.fingerprint()},
      {"dim", std::to_string(c.provider.dim)},
      {"seed", std::to_string(c.provider.seed)},
      {"k", std::to_string(c.k)},
      {"ks", ks},
      {"template_id", c.prompt.template_id},
      {"endpoint", c.endpoint.target},
  };
}

void write_report(const RunConfig& c, const Report& report, std::ostream& out) {
  if (c.paths.output) write_file_atomic(*c.paths.output, report_to_json(report));
  out << report_to_text(report);
}

GoldSet resolve_gold(const RunConfig& c) {
  if (c.paths.gold) return load_gold(require_input(c.paths.gold, "gold"));
  if (c.paths.queries) return gold_from_queries(parse_queries(require_input(c.paths.queries, "queries")));
  throw Error(ErrorCode::Config, "missing --gold (or --queries carrying gold ids)");
}

}  // namespace

int cmd_build_memory(const RunConfig& c, std::ostream& out, std::ostream&) {
  const auto& ontology_path = require_input(c.paths.ontology, "ontology");
  const auto& memory_path = require_output(c.paths.memory ? c.paths.memory : c.paths.output, "memory");

  auto ontology = parse_ontology(ontology_path, c.ontology_tag);
  auto embedder = make_embedder(c.provider, c.paths.cache_dir);
  auto memory = build_memory(ontology, *embedder);
  save_memory(memory, memory_path);

  const auto described = memory.size() - ontology.size();
  out << "entries: " << ontology.size() << "+" << described << " = " << memory.size() << "\n";
  out << "provider: " << c.provider.fingerprint() << " (dim " << c.provider.dim << ")\n";
  out << "memory: " << memory_path.string() << "\n";
  out << "sha256: " << sha256_file(memory_path) << "\n";
  return kExitOk;
}

int cmd_retrieve(const RunConfig& c, std::ostream& out, std::ostream& err) {
  auto queries = parse_queries(require_input(c.paths.queries, "queries"));
  const auto& output = require_output(c.paths.output ? c.paths.output : c.paths.retrievals, "output");
  auto memory = load_checked_memory(c, err);
  auto embedder = query_embedder(c);

  auto records = retrieve_all(memory, *embedder, queries, c.k, c.concurrency);
  write_file_atomic(output, serialize_retrievals(records));
  out << "queries: " << records.size() << "\n";
  out << "k: " << c.k << "\n";
  out << "retrievals: " << output.string() << "\n";
  out << "sha256: " << retrieval_digest(records) << "\n";
  return kExitOk;
}

int cmd_link(const RunConfig& c, std::ostream& out, std::ostream& err) {
  auto ontology = parse_ontology(require_input(c.paths.ontology, "ontology"), c.ontology_tag);
  auto queries = parse_queries(require_input(c.paths.queries, "queries"));
  const auto& output = require_output(c.paths.output ? c.paths.output : c.paths.predictions, "output");
  auto memory = load_checked_memory(c, err);
  if (memory.ontology_tag() != ontology.tag()) {
    err << "warning: memory was built from ontology '" << memory.ontology_tag() << "', linking against '"
        << ontology.tag() << "'\n";
  }
  auto embedder = query_embedder(c);
  auto stack = make_endpoint_stack(c);

  auto retrievals = retrieve_all(memory, *embedder, queries, c.k, c.concurrency);
  const auto detail_log = c.paths.detail_log ? *c.paths.detail_log : with_suffix(output, ".log.jsonl");

  LinkRunOptions options;
  options.concurrency = c.concurrency;
  options.limit = c.limit;
  LinkRunSummary summary;
  auto results = run_link(queries, retrievals, ontology, c.prompt, *stack.top, detail_log, options, &summary);

  out << "queries: " << summary.total << "\n";
  out << "resumed: " << summary.resumed << "\n";
  out << "ranked: " << summary.ranked << "\n";
  out << "endpoint calls: " << (stack.counter ? stack.counter->calls() : 0) << "\n";
  if (stack.fixtures) out << "fixture replays: " << stack.fixtures->replayed() << "\n";
  out << "endpoint failures: " << summary.endpoint_failures << "\n";
  out << "detail log: " << detail_log.string() << "\n";

  if (!summary.complete) {
    out << "pending: " << (summary.total - results.size()) << " (predictions not written)\n";
    return kExitOk;
  }
  write_file_atomic(output, serialize_predictions(results));
  out << "predictions: " << output.string() << "\n";
  return summary.endpoint_failures > 0 ? kExitExternal : kExitOk;
}

int cmd_evaluate(const RunConfig& c, std::ostream& out, std::ostream&) {
  const auto gold = resolve_gold(c);
  Report report;
  report.provenance = provenance(c, "evaluate");
  report.provenance.emplace_back("skipped_composite", std::to_string(gold.skipped_composite));

  std::string mode = c.mode;
  if (mode.empty()) mode = c.paths.predictions ? "all" : "hits";
  if (mode != "accuracy" && mode != "prf" && mode != "hits" && mode != "all") {
    throw Error(ErrorCode::Config, "unknown --mode '" + mode + "'");
  }
  report.provenance.emplace_back("mode", mode);

  if (mode == "hits" || (mode == "all" && c.paths.retrievals)) {
    auto records = load_retrievals(require_input(c.paths.retrievals, "retrievals"));
    ReportRow row;
    row.name = "retrieval";
    row.retrieval_digest = retrieval_digest(records);
    row.metrics = evaluate_retrievals(records, gold.pairs, c.ks);
    report.rows.push_back(std::move(row));
  }
  if (mode != "hits") {
    auto results = load_predictions(require_input(c.paths.predictions, "predictions"));
    auto m = evaluate_links(results, gold.pairs);
    if (mode == "accuracy") {
      if (!m.accuracy) throw Error(ErrorCode::Config, "accuracy needs one gold target per query");
      m.precision.reset();
      m.recall.reset();
      m.f1.reset();
    } else if (mode == "prf") {
      m.accuracy.reset();
    }
    report.rows.push_back({"predictions", std::move(m), "", ""});
  }
  write_report(c, report, out);
  return kExitOk;
}

int cmd_ablate(const RunConfig& c, std::ostream& out, std::ostream& err) {
  auto ontology = parse_ontology(require_input(c.paths.ontology, "ontology"), c.ontology_tag);
  auto queries = parse_queries(require_input(c.paths.queries, "queries"));
  auto grid = load_grid(require_input(c.paths.grid, "grid"), c.prompt);
  const auto& output = require_output(c.paths.output, "output");
  const auto gold = c.paths.gold ? load_gold(*c.paths.gold) : gold_from_queries(queries);
  auto memory = load_checked_memory(c, err);
  auto embedder = query_embedder(c);
  auto stack = make_endpoint_stack(c);

  auto retrievals = retrieve_all(memory, *embedder, queries, c.k, c.concurrency);
  const auto retrieval_log = c.paths.retrievals ? *c.paths.retrievals : with_suffix(output, ".retrievals.jsonl");
  write_file_atomic(retrieval_log, serialize_retrievals(retrievals));

  AblationOptions options;
  options.concurrency = c.concurrency;
  Report report;
  report.provenance = provenance(c, "ablate");
  report.provenance.emplace_back("retrieval_digest", retrieval_digest(retrievals));
  report.provenance.emplace_back("skipped_composite", std::to_string(gold.skipped_composite));
  report.rows = run_ablation(queries, ontology, retrievals, *stack.top, grid, gold.pairs, options);
  write_report(c, report, out);

  const bool any_error = std::any_of(report.rows.begin(), report.rows.end(),
                                     [](const ReportRow& r) { return !r.error.empty(); });
  return any_error ? kExitExternal : kExitOk;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Retrieve-and-rank concept linker"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_file;
  std::string ontology, queries, memory, gold, output, cache_dir, fixtures, detail_log, predictions,
      retrievals, grid, one_shot;
  std::string provider, model, embedding_endpoint, endpoint, llm_model, template_id, none_label, mode, ks,
      ontology_tag;
  std::size_t k = 0, concurrency = 0, dim = 0, max_prompt_tokens = 0, option_chars = 0, limit = 0;
  std::uint64_t seed = 0;
  bool strict = false, no_source_context = false, no_candidate_context = false, abstract_tags = false;

  auto* o_config = app.add_option("--config", config_file, "Config file ([section] key = value)");
  std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> overrides;
  auto path_opt = [&](const char* flag, std::string& target, std::optional<fs::path> RunConfig::Paths::*field,
                      const char* help) {
    overrides.emplace_back(app.add_option(flag, target, help),
                           [&target, field](RunConfig& c) { c.paths.*field = fs::path(target); });
  };
  path_opt("--ontology", ontology, &RunConfig::Paths::ontology, "Ontology JSON Lines file");
  path_opt("--queries", queries, &RunConfig::Paths::queries, "Query JSON Lines file");
  path_opt("--memory", memory, &RunConfig::Paths::memory, "Memory file");
  path_opt("--gold", gold, &RunConfig::Paths::gold, "Gold pairs JSON Lines file");
  path_opt("--output", output, &RunConfig::Paths::output, "Output file");
  path_opt("--cache-dir", cache_dir, &RunConfig::Paths::cache_dir, "Embedding cache directory");
  path_opt("--fixtures", fixtures, &RunConfig::Paths::fixtures, "Record/replay transcript file");
  path_opt("--detail-log", detail_log, &RunConfig::Paths::detail_log, "Link detail log (resume state)");
  path_opt("--predictions", predictions, &RunConfig::Paths::predictions, "Predictions TSV");
  path_opt("--retrievals", retrievals, &RunConfig::Paths::retrievals, "Retrieval JSON Lines file");
  path_opt("--grid", grid, &RunConfig::Paths::grid, "Ablation grid JSON Lines file");
  path_opt("--one-shot", one_shot, &RunConfig::Paths::one_shot, "One-shot example file");

  auto add = [&](CLI::Option* opt, std::function<void(RunConfig&)> apply) {
    overrides.emplace_back(opt, std::move(apply));
  };
  add(app.add_option("--k", k, "Candidates per query"), [&](RunConfig& c) { c.k = k; });
  add(app.add_option("--provider", provider, "Embedding provider: local-trigram | remote"),
      [&](RunConfig& c) { c.provider.provider_id = provider; });
  add(app.add_option("--model", model, "Embedding model id"), [&](RunConfig& c) { c.provider.model_id = model; });
  add(app.add_option("--dim", dim, "Embedding dimension"), [&](RunConfig& c) { c.provider.dim = dim; });
  add(app.add_option("--seed", seed, "Local embedder seed"), [&](RunConfig& c) { c.provider.seed = seed; });
  add(app.add_option("--embedding-endpoint", embedding_endpoint, "Remote embedding URL"),
      [&](RunConfig& c) { c.provider.endpoint = embedding_endpoint; });
  add(app.add_option("--endpoint", endpoint, "Ranker: mock:exact | mock:keyword | replay | URL"),
      [&](RunConfig& c) { c.endpoint.target = endpoint; });
  add(app.add_option("--llm-model", llm_model, "Ranker model id"), [&](RunConfig& c) { c.endpoint.model = llm_model; });
  add(app.add_option("--max-prompt-tokens", max_prompt_tokens, "Ranker prompt budget (estimated tokens)"),
      [&](RunConfig& c) { c.endpoint.max_prompt_tokens = max_prompt_tokens; });
  add(app.add_option("--concurrency", concurrency, "Parallel ranker calls"),
      [&](RunConfig& c) { c.concurrency = concurrency; });
  add(app.add_flag("--strict", strict, "Fail on provider fingerprint mismatch"), [&](RunConfig& c) { c.strict = strict; });
  add(app.add_option("--template", template_id, "Prompt template id"),
      [&](RunConfig& c) { c.prompt.template_id = template_id; });
  add(app.add_flag("--no-source-context", no_source_context, "Omit query context from prompts"),
      [&](RunConfig& c) { c.prompt.include_source_context = !no_source_context; });
  add(app.add_flag("--no-candidate-context", no_candidate_context, "Omit candidate descriptions from prompts"),
      [&](RunConfig& c) { c.prompt.include_candidate_context = !no_candidate_context; });
  add(app.add_flag("--abstract-tags", abstract_tags, "Wrap query context in <abstract> tags"),
      [&](RunConfig& c) { c.prompt.abstract_tags = abstract_tags; });
  add(app.add_option("--none-label", none_label, "Label of the none option"),
      [&](RunConfig& c) { c.prompt.none_label = none_label; });
  add(app.add_option("--option-chars", option_chars, "Description budget per option"),
      [&](RunConfig& c) { c.prompt.max_option_context_chars = option_chars; });
  add(app.add_option("--mode", mode, "evaluate: accuracy | prf | hits | all"), [&](RunConfig& c) { c.mode = mode; });
  bool hits_only = false;
  add(app.add_flag("--hits", hits_only, "evaluate: shorthand for --mode hits"), [&](RunConfig& c) {
    if (hits_only) c.mode = "hits";
  });
  add(app.add_option("--ks", ks, "evaluate: hits@k cutoffs, e.g. 1,5,10"), [&](RunConfig& c) { c.ks = parse_ks(ks); });
  add(app.add_option("--ontology-tag", ontology_tag, "Name recorded for the ontology"),
      [&](RunConfig& c) { c.ontology_tag = ontology_tag; });
  add(app.add_option("--limit", limit, "link: rank at most N pending queries"), [&](RunConfig& c) { c.limit = limit; });

  auto* build = app.add_subcommand("build-memory", "Embed an ontology into a memory file");
  auto* retrieve = app.add_subcommand("retrieve", "Top-k candidates per query, no ranker");
  auto* link = app.add_subcommand("link", "Retrieve and rank; write predictions");
  auto* evaluate = app.add_subcommand("evaluate", "Score predictions or retrievals");
  auto* ablate = app.add_subcommand("ablate", "Run a prompt-configuration grid");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    RunConfig config;
    if (o_config->count() > 0) {
      const fs::path cfg = config_file;
      if (!fs::exists(cfg)) throw Error(ErrorCode::Config, "config not found: " + cfg.string());
      apply_ini(parse_ini(read_file(cfg)), cfg.parent_path(), config);
    }
    for (const auto& [opt, apply] : overrides) {
      if (opt->count() > 0) apply(config);
    }
    config.finalize();

    if (*build) return cmd_build_memory(config, out, err);
    if (*retrieve) return cmd_retrieve(config, out, err);
    if (*link) return cmd_link(config, out, err);
    if (*evaluate) return cmd_evaluate(config, out, err);
    if (*ablate) return cmd_ablate(config, out, err);
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    if (e.is_external()) return kExitExternal;
    if (e.code() == ErrorCode::Invariant) return kExitInternal;
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

}  // namespace conlink::cli
