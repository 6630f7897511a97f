// Copyright 2026 The conlink Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "conlink/embedding.hpp"
#include "conlink/ranker.hpp"

namespace conlink::cli {

struct EndpointConfig {
  /// "mock:exact", "mock:keyword", "replay" (fixtures only) or an http(s) URL.
  std::string target = "mock:exact";
  std::string model = "gpt-4";
  std::chrono::milliseconds timeout{std::chrono::seconds(120)};
  std::optional<std::size_t> max_prompt_tokens;
};

struct RunConfig {
  struct Paths {
    std::optional<std::filesystem::path> ontology;
    std::optional<std::filesystem::path> queries;
    std::optional<std::filesystem::path> memory;
    std::optional<std::filesystem::path> gold;
    std::optional<std::filesystem::path> output;
    std::optional<std::filesystem::path> cache_dir;
    std::optional<std::filesystem::path> fixtures;
    std::optional<std::filesystem::path> detail_log;
    std::optional<std::filesystem::path> predictions;
    std::optional<std::filesystem::path> retrievals;
    std::optional<std::filesystem::path> grid;
    std::optional<std::filesystem::path> one_shot;
  } paths;

  ProviderSpec provider;
  EndpointConfig endpoint;
  std::size_t k = 10;
  PromptConfig prompt;
  std::size_t concurrency = 4;
  bool strict = false;
  std::string ontology_tag = "target";
  std::string mode;  // evaluate: accuracy | prf | hits | all
  std::vector<std::size_t> ks{1, 5, 10};
  std::optional<std::size_t> limit;

  RunConfig() { provider.model_id.clear(); }

  /// Throws Config when k or concurrency is zero or the provider/prompt
  /// settings are inconsistent.
  void validate() const;
  /// Fills defaults that depend on other settings (local model id, one-shot
  /// block), then validates.
  void finalize();
};

/// Flat "[section]" + "key = value" text. '#' and ';' start comments.
using IniMap = std::map<std::string, std::string>;  // "section.key" -> value

IniMap parse_ini(std::string_view text);

/// Applies a parsed config file on top of `config`. Relative paths resolve
/// against `base_dir`. Unknown keys are rejected.
void apply_ini(const IniMap& ini, const std::filesystem::path& base_dir, RunConfig& config);

/// Default local model id; encodes the seed so fingerprints differ by seed.
std::string local_model_id(std::uint64_t seed);

bool parse_bool(const std::string& value);
std::vector<std::size_t> parse_ks(const std::string& value);

}  // namespace conlink::cli
