// Copyright 2026 The conlink Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace conlink {

struct Concept {
  std::string id;
  std::string name;
  std::optional<std::string> description;
  std::vector<std::string> synonyms;
  std::string ontology_tag;

  bool has_description() const {
    return description.has_value() && !description->empty();
  }

  friend bool operator==(const Concept&, const Concept&) = default;
};

/// Immutable, id-addressable concept inventory. Iteration follows file order.
class Ontology {
 public:
  Ontology() = default;
  /// Throws DuplicateId if two concepts share an id.
  Ontology(std::string tag, std::vector<Concept> concepts);

  const std::string& tag() const noexcept { return tag_; }
  const std::vector<Concept>& concepts() const noexcept { return concepts_; }
  std::size_t size() const noexcept { return concepts_.size(); }
  bool empty() const noexcept { return concepts_.empty(); }

  auto begin() const noexcept { return concepts_.begin(); }
  auto end() const noexcept { return concepts_.end(); }

  const Concept* find(std::string_view id) const;
  /// Throws UnknownId.
  const Concept& get(std::string_view id) const;

  friend bool operator==(const Ontology& a, const Ontology& b) {
    return a.tag_ == b.tag_ && a.concepts_ == b.concepts_;
  }

 private:
  std::string tag_;
  std::vector<Concept> concepts_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct Query {
  std::string id;
  std::string mention;
  std::optional<std::string> context;
  std::optional<std::string> gold;

  friend bool operator==(const Query&, const Query&) = default;
};

struct OntologyOptions {
  /// Descriptions longer than this are cut at the last whole word.
  std::size_t description_budget = 2000;
};

/// An id is usable if it is non-empty and free of tabs, newlines and other
/// control characters (ids end up in TSV output).
bool is_valid_id(std::string_view id);

Ontology parse_ontology(const std::filesystem::path& path, std::string tag,
                        const OntologyOptions& options = {});
Ontology parse_ontology_text(std::string_view text, std::string tag,
                             const OntologyOptions& options = {});

std::vector<Query> parse_queries(const std::filesystem::path& path);
std::vector<Query> parse_queries_text(std::string_view text);

/// JSON Lines in the same format parse_ontology reads.
std::string serialize_ontology(const Ontology& ontology);
std::string serialize_queries(const std::vector<Query>& queries);

inline const Concept& get_concept(const Ontology& ontology,
                                  std::string_view id) {
  return ontology.get(id);
}

}  // namespace conlink
