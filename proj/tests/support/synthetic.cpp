// Copyright 2026 The conlink Authors
// SPDX-License-Identifier: Apache-2.0

#include "synthetic.hpp"

#include <algorithm>
#include <numeric>
#include <set>

namespace conlink::testing {

namespace {

constexpr const char* kSyllables[] = {
    "ka", "lo", "mi", "ne", "pu", "ra", "si", "to", "ve", "zu", "bra", "chi", "dro",
    "fen", "gli", "hox", "ith", "jun", "kel", "lum", "mor", "nyx", "opa", "pex",
};

constexpr const char* kWords[] = {
    "protein",  "kinase",    "receptor", "membrane", "syndrome", "deficiency", "hepatic",
    "cardiac",  "neuronal",  "vascular", "chronic",  "acute",    "congenital", "platelet",
    "bleeding", "disorder",  "muscle",   "enzyme",   "signal",   "pathway",    "tumour",
    "renal",    "pulmonary", "skeletal", "immune",   "storage",  "transport",  "channel",
};

std::string pseudo_word(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> n_syl(2, 4);
  std::uniform_int_distribution<std::size_t> pick(0, std::size(kSyllables) - 1);
  std::string w;
  for (std::size_t i = n_syl(rng); i > 0; --i) w += kSyllables[pick(rng)];
  return w;
}

std::string sentence(std::mt19937_64& rng, std::size_t words) {
  std::uniform_int_distribution<std::size_t> pick(0, std::size(kWords) - 1);
  std::string s;
  for (std::size_t i = 0; i < words; ++i) {
    if (i) s += ' ';
    s += kWords[pick(rng)];
  }
  return s;
}

}  // namespace

Ontology random_ontology(std::uint64_t seed, std::size_t n_concepts, double described_fraction,
                         std::string tag) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution described(described_fraction);
  std::uniform_int_distribution<std::size_t> n_words(1, 3);
  std::uniform_int_distribution<std::size_t> desc_len(4, 20);

  std::set<std::string> used;
  std::vector<Concept> concepts;
  concepts.reserve(n_concepts);
  for (std::size_t i = 0; i < n_concepts; ++i) {
    std::string name;
    do {
      name.clear();
      for (std::size_t w = n_words(rng); w > 0; --w) {
        if (!name.empty()) name += ' ';
        name += pseudo_word(rng);
      }
    } while (!used.insert(name).second);

    Concept c;
    c.id = "SYN:" + std::to_string(100000 + i);
    c.name = name;
    if (described(rng)) c.description = sentence(rng, desc_len(rng));
    c.ontology_tag = tag;
    concepts.push_back(std::move(c));
  }
  return Ontology(std::move(tag), std::move(concepts));
}

std::vector<Query> exact_match_queries(const Ontology& ontology, std::size_t n,
                                       std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(ontology.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(std::min(n, order.size()));

  std::vector<Query> out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& c = ontology.concepts()[order[i]];
    out.push_back({"q" + std::to_string(i), c.name, std::nullopt, c.id});
  }
  return out;
}

std::vector<std::string> random_query_texts(std::uint64_t seed, std::size_t n) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> len(1, 6);
  std::bernoulli_distribution real_word(0.5);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::string t;
    for (std::size_t w = len(rng); w > 0; --w) {
      if (!t.empty()) t += ' ';
      t += real_word(rng) ? sentence(rng, 1) : pseudo_word(rng);
    }
    out.push_back(std::move(t));
  }
  return out;
}

HomonymDataset homonym_dataset(std::size_t n_pairs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Concept> concepts;
  std::vector<Query> queries;
  std::set<std::string> used;

  // Each pair member gets its own disjoint topic vocabulary.
  constexpr const char* kTopics[][4] = {
      {"cardiac", "rhythm", "ventricle", "arrhythmia"},
      {"hepatic", "liver", "bilirubin", "jaundice"},
      {"renal", "kidney", "nephron", "filtration"},
      {"neuronal", "seizure", "cortex", "synapse"},
      {"skeletal", "bone", "fracture", "cartilage"},
      {"pulmonary", "lung", "alveolar", "breathing"},
  };
  std::uniform_int_distribution<std::size_t> topic(0, std::size(kTopics) - 1);

  for (std::size_t p = 0; p < n_pairs; ++p) {
    std::string name;
    do {
      name = pseudo_word(rng) + " " + pseudo_word(rng);
    } while (!used.insert(name).second);

    const auto ta = topic(rng);
    auto tb = topic(rng);
    while (tb == ta) tb = topic(rng);

    for (int member = 0; member < 2; ++member) {
      const auto& words = kTopics[member == 0 ? ta : tb];
      Concept c;
      c.id = "HOM:" + std::to_string(p) + (member == 0 ? "a" : "b");
      c.name = name;
      c.description = std::string("A ") + words[0] + " condition affecting the " + words[1] +
                      " with " + words[2] + " involvement and " + words[3] + ".";
      c.ontology_tag = "homonym";
      concepts.push_back(std::move(c));
    }

    const int target = static_cast<int>(rng() % 2);
    const auto& words = kTopics[target == 0 ? ta : tb];
    Query q;
    q.id = "h" + std::to_string(p);
    q.mention = name;
    q.context = std::string("Patient presented with ") + words[1] + " problems and " + words[3] +
                "; " + words[2] + " findings were noted.";
    q.gold = "HOM:" + std::to_string(p) + (target == 0 ? "a" : "b");
    queries.push_back(std::move(q));
  }

  for (std::size_t d = 0; d < n_pairs; ++d) {
    std::string name;
    do {
      name = pseudo_word(rng) + " " + pseudo_word(rng);
    } while (!used.insert(name).second);
    Concept c;
    c.id = "DIS:" + std::to_string(d);
    c.name = name;
    c.description = sentence(rng, 8);
    c.ontology_tag = "homonym";
    concepts.push_back(std::move(c));
  }
  return {Ontology("homonym", std::move(concepts)), std::move(queries)};
}

}  // namespace conlink::testing
