// Copyright 2026 The conlink Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "conlink/embedding.hpp"
#include "conlink/ontology.hpp"

namespace conlink {

enum class Variant : std::uint8_t { NameOnly, NameWithContext };

/// "n" / "nc", as written in memory files.
std::string_view variant_tag(Variant v);
std::optional<Variant> parse_variant(std::string_view tag);

struct MemoryEntry {
  std::string concept_id;
  Variant variant = Variant::NameOnly;
  Vector vector;

  friend bool operator==(const MemoryEntry&, const MemoryEntry&) = default;
};

/// The persisted long-term store: every concept's name-only vector plus a
/// name+description vector for described concepts. Immutable once built.
class Memory {
 public:
  inline static constexpr int kFormatVersion = 1;

  /// Validates: uniform dim, unit-norm vectors, at most one entry per
  /// (concept, variant). Throws DimMismatch / Invariant.
  Memory(std::size_t dim, std::string provider_id, std::string model_id,
         std::string ontology_tag, std::vector<MemoryEntry> entries);

  std::size_t dim() const noexcept { return dim_; }
  const std::string& provider_id() const noexcept { return provider_id_; }
  const std::string& model_id() const noexcept { return model_id_; }
  const std::string& ontology_tag() const noexcept { return ontology_tag_; }
  const std::vector<MemoryEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t concept_count() const noexcept { return concept_ids_.size(); }

  /// Concept ordinal (first-appearance order) for entry i.
  std::size_t concept_of(std::size_t entry) const { return concept_of_[entry]; }
  const std::string& concept_id(std::size_t ordinal) const { return concept_ids_[ordinal]; }
  /// L2 norm of entry i, computed once at construction.
  double norm(std::size_t entry) const { return norms_[entry]; }

  friend bool operator==(const Memory& a, const Memory& b) {
    return a.dim_ == b.dim_ && a.provider_id_ == b.provider_id_ &&
           a.model_id_ == b.model_id_ && a.ontology_tag_ == b.ontology_tag_ &&
           a.entries_ == b.entries_;
  }

 private:
  std::size_t dim_;
  std::string provider_id_;
  std::string model_id_;
  std::string ontology_tag_;
  std::vector<MemoryEntry> entries_;
  std::vector<std::size_t> concept_of_;
  std::vector<double> norms_;
  std::vector<std::string> concept_ids_;
};

struct Candidate {
  std::string concept_id;
  double score = 0.0;
  Variant variant = Variant::NameOnly;

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

/// Text embedded for a concept's name+description variant.
std::string name_with_context_text(const Concept& c);
/// Text embedded for a query: the mention, joined with its context when present.
std::string query_text(const Query& q);

/// Embeds the ontology in file order: entry count is N + M for N concepts of
/// which M have descriptions. Embedding errors are rethrown naming the concept.
Memory build_memory(const Ontology& ontology, Embedder& embedder,
                    std::size_t batch_size = 256);

/// Dot product of unit vectors, clamped to [-1, 1]. Throws DimMismatch.
/// dot(a, b) / (|a| |b|) in double, clamped to [-1, 1]; 0 when either is zero.
double cosine(std::span<const float> a, std::span<const float> b);

/// Exact scan. Returns the k distinct concepts with the highest best-variant
/// score, ordered by (score desc, concept id asc); ties between a concept's
/// own variants resolve to NameOnly. `workers` > 1 splits the scan across
/// threads with identical results.
std::vector<Candidate> retrieve_top_k(const Memory& memory, std::span<const float> query,
                                      std::size_t k, std::size_t workers = 1);

std::string serialize_memory(const Memory& memory);
Memory parse_memory(std::string_view text);
void save_memory(const Memory& memory, const std::filesystem::path& path);
Memory load_memory(const std::filesystem::path& path);

/// Compares the memory's provider fingerprint and dim with the query-time
/// provider. Returns a warning message on mismatch, or throws
/// FingerprintMismatch when `strict`.
std::optional<std::string> check_fingerprint(const Memory& memory, const ProviderSpec& spec,
                                             bool strict);

}  // namespace conlink
