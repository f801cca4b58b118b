#include "kalm/contexts/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <string>

#include "kalm/errors.hpp"
#include "kalm/num/random.hpp"

namespace kalm::ctx {

namespace {

constexpr std::size_t kFillerVocabulary = 10;
constexpr std::size_t kDescriptionVocabulary = 60;
// One document in kCorefPeriod carries the coreference signal.
constexpr std::size_t kCorefPeriod = 4;
constexpr std::size_t kSharedPerDoc = 2;
constexpr kg::RelationId kPartOf = 0;
constexpr kg::RelationId kMemberOf = 1;
constexpr kg::RelationId kRelatedTo = 2;

std::string padded(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%04zu", prefix, i);
  return buf;
}

struct Territory {
  std::vector<kg::EntityId> connectors;
  std::vector<kg::EntityId> leaves;
};

}  // namespace

SyntheticCorpus generate_synthetic_corpus(const SyntheticSpec& spec) {
  const std::size_t n_classes = spec.n_classes;
  if (n_classes < 2) throw ConfigError("synthetic corpus needs at least 2 classes");
  if (spec.n_docs < n_classes) throw ConfigError("n_docs must be at least n_classes");
  if (spec.kg_size < 20 * n_classes) {
    throw ConfigError("kg_size must be at least 20 * n_classes (" + std::to_string(20 * n_classes) + ")");
  }

  num::Rng rng(spec.seed);
  SyntheticCorpus out;
  auto& kg = out.kg;

  auto description = [&rng]() {
    std::string d;
    for (int w = 0; w < 3; ++w) {
      if (w) d += ' ';
      d += "d" + std::to_string(rng.index(kDescriptionVocabulary));
    }
    return d;
  };

  kg.add_relation(kPartOf, "part_of", "is a part of");
  kg.add_relation(kMemberOf, "member_of", "is a member of");
  kg.add_relation(kRelatedTo, "related_to", "is related to");

  std::vector<Territory> territories(n_classes);
  for (std::size_t c = 0; c < n_classes; ++c) kg.add_entity(static_cast<kg::EntityId>(c), "hub_" + std::to_string(c), description());
  std::vector<std::vector<kg::EntityId>> members(n_classes);
  for (std::size_t id = n_classes; id < spec.kg_size; ++id) members[(id - n_classes) % n_classes].push_back(static_cast<kg::EntityId>(id));
  for (std::size_t c = 0; c < n_classes; ++c) {
    auto& t = territories[c];
    const auto& m = members[c];
    const std::size_t n_conn = std::max<std::size_t>(2, m.size() / 5);
    for (std::size_t k = 0; k < m.size(); ++k) {
      if (k < n_conn) {
        t.connectors.push_back(m[k]);
        kg.add_entity(m[k], padded("conn_", m[k]), description());
      } else {
        t.leaves.push_back(m[k]);
        kg.add_entity(m[k], padded("ent_", m[k]), description());
      }
    }
    for (auto conn : t.connectors) kg.add_triple({conn, kPartOf, static_cast<kg::EntityId>(c)});
    for (std::size_t k = 0; k < t.leaves.size(); ++k) {
      kg.add_triple({t.leaves[k], kMemberOf, t.connectors[k % t.connectors.size()]});
    }
    for (std::size_t k = 0; k < t.leaves.size() / 4; ++k) {
      const auto a = t.leaves[rng.index(t.leaves.size())];
      const auto b = t.leaves[rng.index(t.leaves.size())];
      if (a != b) kg.add_triple({a, kRelatedTo, b});
    }
  }

  std::vector<std::size_t> order(spec.n_docs);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);

  for (std::size_t d = 0; d < spec.n_docs; ++d) {
    const std::size_t slot = order[d];
    const std::size_t hub = slot % n_classes;
    const bool coref = (slot / n_classes) % kCorefPeriod == kCorefPeriod - 1;
    const auto& territory = territories[hub];

    DocumentRecord doc;
    doc.doc_id = padded("doc_", d);
    doc.label = (hub + (coref ? 1 : 0)) % n_classes;
    const std::size_t n_par = 3 + rng.index(4);
    doc.paragraphs.resize(n_par);

    std::vector<kg::EntityId> pool = territory.leaves;
    rng.shuffle(pool);
    std::size_t next = 0;
    auto fresh = [&]() { return pool[next++]; };

    for (auto& p : doc.paragraphs) p.mentions.push_back(fresh());
    if (coref) {
      for (std::size_t q = 0; q < kSharedPerDoc; ++q) {
        const auto shared = fresh();
        for (auto& p : doc.paragraphs) {
          const auto pos = rng.index(p.mentions.size() + 1);
          p.mentions.insert(p.mentions.begin() + static_cast<std::ptrdiff_t>(pos), shared);
        }
      }
    }

    for (auto& p : doc.paragraphs) {
      const std::size_t n_tok = 6 + rng.index(5);
      for (std::size_t t = 0; t < n_tok; ++t) p.tokens.push_back("w" + std::to_string(rng.index(kFillerVocabulary)));
    }
    out.docs.push_back(std::move(doc));
  }
  return out;
}

}  // namespace kalm::ctx
