// Copyright 2026 The conlink Authors
// SPDX-License-Identifier: Apache-2.0

#include "conlink/ontology.hpp"

#include <algorithm>
#include <unordered_set>

#include "conlink/error.hpp"
#include "conlink/text.hpp"
#include "json.hpp"

namespace conlink {

namespace {

using ordered_json = nlohmann::ordered_json;

bool skip_line(std::string_view line) {
  auto first = line.find_first_not_of(" \t\r");
  return first == std::string_view::npos || line[first] == '#';
}

/// Calls fn(json_object, line_number) for every record line.
template <typename Fn>
void for_each_record(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    auto line = text.substr(pos, nl == std::string_view::npos ? text.npos
                                                              : nl - pos);
    ++line_no;
    if (!skip_line(line)) {
      nlohmann::json record;
      try {
        record = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error&) {
        throw Error(ErrorCode::MalformedRecord, "invalid JSON").at_line(line_no);
      }
      if (!record.is_object()) {
        throw Error(ErrorCode::MalformedRecord, "record is not an object")
            .at_line(line_no);
      }
      fn(record, line_no);
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
}

std::optional<std::string> optional_string(const nlohmann::json& record,
                                           const char* field,
                                           std::size_t line_no) {
  auto it = record.find(field);
  if (it == record.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) {
    throw Error(ErrorCode::MalformedRecord,
                std::string("field '") + field + "' must be a string")
        .at_line(line_no);
  }
  return it->get<std::string>();
}

std::string required_string(const nlohmann::json& record, const char* field,
                            std::size_t line_no) {
  auto value = optional_string(record, field, line_no);
  if (!value) throw Error(ErrorCode::MissingField, field).at_line(line_no);
  return *value;
}

std::optional<std::string> normalized_optional(std::optional<std::string> s) {
  if (!s) return std::nullopt;
  auto n = normalize_whitespace(*s);
  if (n.empty()) return std::nullopt;
  return n;
}

}  // namespace

Ontology::Ontology(std::string tag, std::vector<Concept> concepts)
    : tag_(std::move(tag)), concepts_(std::move(concepts)) {
  index_.reserve(concepts_.size());
  for (std::size_t i = 0; i < concepts_.size(); ++i) {
    if (!index_.emplace(concepts_[i].id, i).second) {
      throw Error(ErrorCode::DuplicateId, concepts_[i].id);
    }
  }
}

const Concept* Ontology::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &concepts_[it->second];
}

const Concept& Ontology::get(std::string_view id) const {
  if (const auto* c = find(id)) return *c;
  throw Error(ErrorCode::UnknownId, std::string(id));
}

bool is_valid_id(std::string_view id) {
  if (id.empty()) return false;
  return std::none_of(id.begin(), id.end(), [](char c) {
    return static_cast<unsigned char>(c) < 0x20 || c == 0x7f;
  });
}

Ontology parse_ontology_text(std::string_view text, std::string tag,
                             const OntologyOptions& options) {
  std::vector<Concept> concepts;
  std::unordered_map<std::string, std::size_t> seen;

  for_each_record(text, [&](const nlohmann::json& record, std::size_t line) {
    Concept c;
    c.id = required_string(record, "id", line);
    if (!is_valid_id(c.id)) {
      throw Error(ErrorCode::MalformedRecord, "invalid id").at_line(line);
    }
    c.name = normalize_whitespace(required_string(record, "name", line));
    if (c.name.empty()) throw Error(ErrorCode::MissingField, "name").at_line(line);

    c.description = normalized_optional(optional_string(record, "description", line));
    if (c.description) {
      c.description = truncate_at_word(*c.description, options.description_budget);
    }

    if (auto it = record.find("synonyms"); it != record.end() && !it->is_null()) {
      if (!it->is_array()) {
        throw Error(ErrorCode::MalformedRecord, "synonyms must be an array")
            .at_line(line);
      }
      std::unordered_set<std::string> unique{c.name};
      for (const auto& s : *it) {
        if (!s.is_string()) {
          throw Error(ErrorCode::MalformedRecord, "synonym must be a string")
              .at_line(line);
        }
        auto syn = normalize_whitespace(s.get<std::string>());
        if (!syn.empty() && unique.insert(syn).second) {
          c.synonyms.push_back(std::move(syn));
        }
      }
    }

    c.ontology_tag = tag;
    if (auto [it, inserted] = seen.emplace(c.id, line); !inserted) {
      throw Error(ErrorCode::DuplicateId,
                  c.id + " (first defined on line " + std::to_string(it->second) + ")")
          .at_line(line);
    }
    concepts.push_back(std::move(c));
  });

  if (concepts.empty()) throw Error(ErrorCode::EmptyFile, "no concept records");
  return Ontology(std::move(tag), std::move(concepts));
}

Ontology parse_ontology(const std::filesystem::path& path, std::string tag,
                        const OntologyOptions& options) {
  return parse_ontology_text(read_file(path), std::move(tag), options);
}

std::vector<Query> parse_queries_text(std::string_view text) {
  std::vector<Query> queries;
  std::unordered_set<std::string> ids;

  for_each_record(text, [&](const nlohmann::json& record, std::size_t line) {
    Query q;
    auto id = optional_string(record, "id", line);
    if (!id || !is_valid_id(*id)) {
      throw Error(ErrorCode::MalformedRecord, "missing or invalid id").at_line(line);
    }
    q.id = std::move(*id);
    if (!ids.insert(q.id).second) {
      throw Error(ErrorCode::MalformedRecord, "duplicate query id " + q.id)
          .at_line(line);
    }
    auto mention = optional_string(record, "mention", line);
    if (!mention) {
      throw Error(ErrorCode::MalformedRecord, "missing mention").at_line(line);
    }
    q.mention = normalize_whitespace(*mention);
    if (q.mention.empty()) throw Error(ErrorCode::EmptyMention, q.id).at_line(line);
    q.context = normalized_optional(optional_string(record, "context", line));
    q.gold = optional_string(record, "gold", line);
    if (q.gold && !is_valid_id(*q.gold)) {
      throw Error(ErrorCode::MalformedRecord, "invalid gold id").at_line(line);
    }
    queries.push_back(std::move(q));
  });
  return queries;
}

std::vector<Query> parse_queries(const std::filesystem::path& path) {
  return parse_queries_text(read_file(path));
}

std::string serialize_ontology(const Ontology& ontology) {
  std::string out;
  for (const auto& c : ontology) {
    ordered_json j;
    j["id"] = c.id;
    j["name"] = c.name;
    if (c.description) j["description"] = *c.description;
    if (!c.synonyms.empty()) j["synonyms"] = c.synonyms;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::string serialize_queries(const std::vector<Query>& queries) {
  std::string out;
  for (const auto& q : queries) {
    ordered_json j;
    j["id"] = q.id;
    j["mention"] = q.mention;
    if (q.context) j["context"] = *q.context;
    if (q.gold) j["gold"] = *q.gold;
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace conlink
