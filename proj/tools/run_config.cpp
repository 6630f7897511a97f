// Copyright 2026 The conlink Authors
// SPDX-License-Identifier: Apache-2.0

#include "run_config.hpp"

#include <algorithm>
#include <charconv>
#include <functional>

#include "conlink/error.hpp"
#include "conlink/text.hpp"

namespace conlink::cli {

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::size_t parse_size(const std::string& key, const std::string& value) {
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw Error(ErrorCode::Config, key + ": expected a non-negative integer, got '" + value + "'");
  }
  return out;
}

}  // namespace

void RunConfig::validate() const {
  if (k == 0) throw Error(ErrorCode::Config, "k must be at least 1");
  if (concurrency == 0) throw Error(ErrorCode::Config, "concurrency must be at least 1");
  provider.validate();
  prompt.validate();
}

std::string local_model_id(std::uint64_t seed) {
  return "fnv1a-trigram-s" + std::to_string(seed);
}

bool parse_bool(const std::string& value) {
  const auto v = to_lower_ascii(value);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error(ErrorCode::Config, "expected a boolean, got '" + value + "'");
}

std::vector<std::size_t> parse_ks(const std::string& value) {
  std::vector<std::size_t> ks;
  for (const auto& part : split(value, ',')) {
    auto t = trim(part);
    if (!t.empty()) ks.push_back(parse_size("ks", t));
  }
  if (ks.empty()) throw Error(ErrorCode::Config, "ks list is empty");
  return ks;
}

IniMap parse_ini(std::string_view text) {
  IniMap out;
  std::string section;
  std::size_t line_no = 0;
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    auto line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw Error(ErrorCode::Config, "bad section header").at_line(line_no);
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::Config, "expected key = value").at_line(line_no);
    auto key = trim(std::string_view(line).substr(0, eq));
    auto value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) throw Error(ErrorCode::Config, "empty key").at_line(line_no);
    out[section.empty() ? key : section + "." + key] = value;
  }
  return out;
}

void apply_ini(const IniMap& ini, const std::filesystem::path& base_dir, RunConfig& c) {
  auto path = [&](const std::string& v) {
    std::filesystem::path p = v;
    return p.is_relative() ? base_dir / p : p;
  };
  using Setter = std::function<void(const std::string& key, const std::string& value)>;
  const std::map<std::string, Setter> setters{
      {"paths.ontology", [&](auto&, auto& v) { c.paths.ontology = path(v); }},
      {"paths.queries", [&](auto&, auto& v) { c.paths.queries = path(v); }},
      {"paths.memory", [&](auto&, auto& v) { c.paths.memory = path(v); }},
      {"paths.gold", [&](auto&, auto& v) { c.paths.gold = path(v); }},
      {"paths.output", [&](auto&, auto& v) { c.paths.output = path(v); }},
      {"paths.cache_dir", [&](auto&, auto& v) { c.paths.cache_dir = path(v); }},
      {"paths.fixtures", [&](auto&, auto& v) { c.paths.fixtures = path(v); }},
      {"paths.detail_log", [&](auto&, auto& v) { c.paths.detail_log = path(v); }},
      {"paths.predictions", [&](auto&, auto& v) { c.paths.predictions = path(v); }},
      {"paths.retrievals", [&](auto&, auto& v) { c.paths.retrievals = path(v); }},
      {"paths.grid", [&](auto&, auto& v) { c.paths.grid = path(v); }},
      {"provider.id", [&](auto&, auto& v) { c.provider.provider_id = v; }},
      {"provider.model", [&](auto&, auto& v) { c.provider.model_id = v; }},
      {"provider.dim", [&](auto& k, auto& v) { c.provider.dim = parse_size(k, v); }},
      {"provider.seed", [&](auto& k, auto& v) { c.provider.seed = parse_size(k, v); }},
      {"provider.endpoint", [&](auto&, auto& v) { c.provider.endpoint = v; }},
      {"provider.timeout_ms",
       [&](auto& k, auto& v) { c.provider.timeout = std::chrono::milliseconds(parse_size(k, v)); }},
      {"endpoint.url", [&](auto&, auto& v) { c.endpoint.target = v; }},
      {"endpoint.model", [&](auto&, auto& v) { c.endpoint.model = v; }},
      {"endpoint.max_prompt_tokens",
       [&](auto& k, auto& v) { c.endpoint.max_prompt_tokens = parse_size(k, v); }},
      {"endpoint.timeout_ms",
       [&](auto& k, auto& v) { c.endpoint.timeout = std::chrono::milliseconds(parse_size(k, v)); }},
      {"run.k", [&](auto& k, auto& v) { c.k = parse_size(k, v); }},
      {"run.concurrency", [&](auto& k, auto& v) { c.concurrency = parse_size(k, v); }},
      {"run.strict", [&](auto&, auto& v) { c.strict = parse_bool(v); }},
      {"run.ontology_tag", [&](auto&, auto& v) { c.ontology_tag = v; }},
      {"run.mode", [&](auto&, auto& v) { c.mode = v; }},
      {"run.ks", [&](auto&, auto& v) { c.ks = parse_ks(v); }},
      {"prompt.template", [&](auto&, auto& v) { c.prompt.template_id = v; }},
      {"prompt.source_context", [&](auto&, auto& v) { c.prompt.include_source_context = parse_bool(v); }},
      {"prompt.candidate_context",
       [&](auto&, auto& v) { c.prompt.include_candidate_context = parse_bool(v); }},
      {"prompt.none_label", [&](auto&, auto& v) { c.prompt.none_label = v; }},
      {"prompt.max_option_context_chars",
       [&](auto& k, auto& v) { c.prompt.max_option_context_chars = parse_size(k, v); }},
      {"prompt.abstract_tags", [&](auto&, auto& v) { c.prompt.abstract_tags = parse_bool(v); }},
      {"prompt.one_shot", [&](auto&, auto& v) { c.paths.one_shot = path(v); }},
  };

  for (const auto& [key, value] : ini) {
    auto it = setters.find(key);
    if (it == setters.end()) throw Error(ErrorCode::Config, "unknown config key '" + key + "'");
    it->second(key, value);
  }
}

void RunConfig::finalize() {
  if (provider.model_id.empty()) {
    if (provider.is_remote()) throw Error(ErrorCode::Config, "remote provider needs --model");
    provider.model_id = local_model_id(provider.seed);
  }
  if (paths.one_shot) prompt.one_shot = load_one_shot(*paths.one_shot);
  validate();
}

}  // namespace conlink::cli
