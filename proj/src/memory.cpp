// Copyright 2026 The conlink Authors
// SPDX-License-Identifier: Apache-2.0

#include "conlink/memory.hpp"

#include <algorithm>
#include <cmath>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "conlink/error.hpp"
#include "conlink/text.hpp"
#include "json.hpp"

namespace conlink {

namespace {

constexpr double kUnitTolerance = 1e-6;

double dot(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i]) * b[i];
  return acc;
}

double clamp_unit(double x) { return std::clamp(x, -1.0, 1.0); }

double cosine_from(double dot_product, double norm_a, double norm_b) {
  if (norm_a == 0.0 || norm_b == 0.0) return 0.0;
  return clamp_unit(dot_product / (norm_a * norm_b));
}

Error annotate(const Error& e, const std::string& concept_id) {
  Error out(e.code(), e.detail() + " [concept " + concept_id + "]");
  out.status = e.status;
  if (e.index) return std::move(out).at_index(*e.index);
  return out;
}

}  // namespace

std::string_view variant_tag(Variant v) {
  return v == Variant::NameOnly ? "n" : "nc";
}

std::optional<Variant> parse_variant(std::string_view tag) {
  if (tag == "n") return Variant::NameOnly;
  if (tag == "nc") return Variant::NameWithContext;
  return std::nullopt;
}

Memory::Memory(std::size_t dim, std::string provider_id, std::string model_id,
               std::string ontology_tag, std::vector<MemoryEntry> entries)
    : dim_(dim),
      provider_id_(std::move(provider_id)),
      model_id_(std::move(model_id)),
      ontology_tag_(std::move(ontology_tag)),
      entries_(std::move(entries)) {
  if (dim_ == 0) throw Error(ErrorCode::Invariant, "memory dim must be positive");
  std::unordered_map<std::string, std::size_t> ordinals;
  std::unordered_set<std::string> seen_pairs;
  concept_of_.reserve(entries_.size());
  norms_.reserve(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    if (e.vector.size() != dim_) {
      throw Error(ErrorCode::DimMismatch, "entry for " + e.concept_id + " has dim " +
                                              std::to_string(e.vector.size()))
          .at_index(i);
    }
    norms_.push_back(l2_norm(e.vector));
    if (std::abs(norms_.back() - 1.0) > kUnitTolerance) {
      throw Error(ErrorCode::Invariant, "entry for " + e.concept_id + " is not unit-norm")
          .at_index(i);
    }
    if (!seen_pairs.insert(e.concept_id + '\x1f' + std::string(variant_tag(e.variant))).second) {
      throw Error(ErrorCode::Invariant, "duplicate (concept, variant) for " + e.concept_id)
          .at_index(i);
    }
    auto [it, inserted] = ordinals.emplace(e.concept_id, concept_ids_.size());
    if (inserted) concept_ids_.push_back(e.concept_id);
    concept_of_.push_back(it->second);
  }
}

std::string name_with_context_text(const Concept& c) {
  return c.name + ": " + c.description.value_or("");
}

std::string query_text(const Query& q) {
  if (q.context && !q.context->empty()) return q.mention + ": " + *q.context;
  return q.mention;
}

Memory build_memory(const Ontology& ontology, Embedder& embedder, std::size_t batch_size) {
  if (ontology.empty()) throw Error(ErrorCode::EmptyOntology, ontology.tag());
  batch_size = std::max<std::size_t>(1, batch_size);

  struct Pending {
    const Concept* source;
    Variant variant;
  };
  std::vector<Pending> pending;
  std::vector<std::string> texts;
  for (const auto& c : ontology) {
    pending.push_back({&c, Variant::NameOnly});
    texts.push_back(c.name);
    if (c.has_description()) {
      pending.push_back({&c, Variant::NameWithContext});
      texts.push_back(name_with_context_text(c));
    }
  }

  std::vector<MemoryEntry> entries;
  entries.reserve(texts.size());
  for (std::size_t start = 0; start < texts.size(); start += batch_size) {
    const auto n = std::min(batch_size, texts.size() - start);
    std::vector<Vector> vecs;
    try {
      vecs = embedder.embed_batch(std::span<const std::string>(texts).subspan(start, n));
    } catch (const Error& e) {
      auto offending = start + (e.index ? *e.index : 0);
      throw annotate(e, pending[std::min(offending, pending.size() - 1)].source->id);
    }
    for (std::size_t j = 0; j < n; ++j) {
      const auto& p = pending[start + j];
      entries.push_back({p.source->id, p.variant, std::move(vecs[j])});
    }
  }

  const auto& spec = embedder.spec();
  return Memory(spec.dim, spec.provider_id, spec.model_id, ontology.tag(), std::move(entries));
}

double cosine(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::DimMismatch,
                "expected " + std::to_string(a.size()) + ", got " + std::to_string(b.size()));
  }
  return cosine_from(dot(a, b), l2_norm(a), l2_norm(b));
}

std::vector<Candidate> retrieve_top_k(const Memory& memory, std::span<const float> query,
                                      std::size_t k, std::size_t workers) {
  if (k == 0) throw Error(ErrorCode::Config, "k must be at least 1");
  if (query.size() != memory.dim()) {
    throw Error(ErrorCode::DimMismatch, "expected " + std::to_string(memory.dim()) +
                                            ", got " + std::to_string(query.size()));
  }

  const auto& entries = memory.entries();
  const double query_norm = l2_norm(query);
  std::vector<double> scores(entries.size());
  auto score_range = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      scores[i] = cosine_from(dot(entries[i].vector, query), memory.norm(i), query_norm);
    }
  };

  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(1, entries.size() / 64));
  if (workers == 1) {
    score_range(0, entries.size());
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (entries.size() + workers - 1) / workers;
    for (std::size_t lo = 0; lo < entries.size(); lo += chunk) {
      pool.emplace_back(score_range, lo, std::min(entries.size(), lo + chunk));
    }
  }

  struct Best {
    double score;
    Variant variant;
    bool set = false;
  };
  std::vector<Best> best(memory.concept_count());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto& b = best[memory.concept_of(i)];
    const bool better = !b.set || scores[i] > b.score ||
                        (scores[i] == b.score && entries[i].variant < b.variant);
    if (better) b = {scores[i], entries[i].variant, true};
  }

  std::vector<std::size_t> order(best.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto ranked_before = [&](std::size_t a, std::size_t b) {
    if (best[a].score != best[b].score) return best[a].score > best[b].score;
    return memory.concept_id(a) < memory.concept_id(b);
  };
  const std::size_t take = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    ranked_before);

  std::vector<Candidate> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    const auto c = order[i];
    out.push_back({memory.concept_id(c), best[c].score, best[c].variant});
  }
  return out;
}

std::string serialize_memory(const Memory& memory) {
  nlohmann::ordered_json header;
  header["format_version"] = Memory::kFormatVersion;
  header["dim"] = memory.dim();
  header["provider_id"] = memory.provider_id();
  header["model_id"] = memory.model_id();
  header["ontology_tag"] = memory.ontology_tag();
  header["entry_count"] = memory.size();

  std::string out = header.dump();
  out += '\n';
  for (const auto& e : memory.entries()) {
    out += "{\"cid\":";
    out += nlohmann::json(e.concept_id).dump();
    out += ",\"variant\":\"";
    out += variant_tag(e.variant);
    out += "\",\"v\":[";
    for (std::size_t i = 0; i < e.vector.size(); ++i) {
      if (i) out += ',';
      out += format_float9(e.vector[i]);
    }
    out += "]}\n";
  }
  return out;
}

Memory parse_memory(std::string_view text) {
  auto lines = split(text, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw Error(ErrorCode::BadMagic, "empty memory file");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(lines[0]);
  } catch (const nlohmann::json::parse_error&) {
    throw Error(ErrorCode::BadMagic, "header is not JSON");
  }
  if (!header.is_object() || !header.contains("format_version") ||
      !header["format_version"].is_number_integer()) {
    throw Error(ErrorCode::BadMagic, "header lacks format_version");
  }
  if (header["format_version"].get<int>() != Memory::kFormatVersion) {
    throw Error(ErrorCode::VersionMismatch,
                "format_version " + header["format_version"].dump());
  }

  std::size_t dim = 0;
  std::size_t count = 0;
  std::string provider_id, model_id, tag;
  try {
    dim = header.at("dim").get<std::size_t>();
    count = header.at("entry_count").get<std::size_t>();
    provider_id = header.at("provider_id").get<std::string>();
    model_id = header.at("model_id").get<std::string>();
    tag = header.at("ontology_tag").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadMagic, std::string("malformed header: ") + e.what());
  }
  if (lines.size() - 1 != count) {
    throw Error(ErrorCode::BadMagic, "truncated: header announces " + std::to_string(count) +
                                         " entries, found " + std::to_string(lines.size() - 1));
  }

  std::vector<MemoryEntry> entries;
  entries.reserve(count);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    try {
      auto j = nlohmann::json::parse(lines[i]);
      MemoryEntry e;
      e.concept_id = j.at("cid").get<std::string>();
      auto variant = parse_variant(j.at("variant").get<std::string>());
      if (!variant) throw Error(ErrorCode::BadMagic, "unknown variant");
      e.variant = *variant;
      const auto& v = j.at("v");
      e.vector.reserve(v.size());
      for (const auto& x : v) e.vector.push_back(static_cast<float>(x.get<double>()));
      entries.push_back(std::move(e));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::BadMagic, std::string("malformed entry: ") + e.what())
          .at_line(i + 1);
    } catch (Error& e) {
      throw std::move(e).at_line(i + 1);
    }
  }
  return Memory(dim, std::move(provider_id), std::move(model_id), std::move(tag),
                std::move(entries));
}

void save_memory(const Memory& memory, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_memory(memory));
}

Memory load_memory(const std::filesystem::path& path) { return parse_memory(read_file(path)); }

std::optional<std::string> check_fingerprint(const Memory& memory, const ProviderSpec& spec,
                                             bool strict) {
  if (memory.provider_id() == spec.provider_id && memory.model_id() == spec.model_id &&
      memory.dim() == spec.dim) {
    return std::nullopt;
  }
  std::string msg = "memory was built with " + memory.provider_id() + "/" + memory.model_id() +
                    " (dim " + std::to_string(memory.dim()) + ") but queries use " +
                    spec.fingerprint() + " (dim " + std::to_string(spec.dim) + ")";
  if (strict) throw Error(ErrorCode::FingerprintMismatch, msg);
  return msg;
}

}  // namespace conlink
