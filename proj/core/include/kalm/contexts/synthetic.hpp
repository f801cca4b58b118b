#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "kalm/contexts/document.hpp"
#include "kalm/kg/knowledge_graph.hpp"

namespace kalm::ctx {

struct SyntheticSpec {
  std::uint64_t seed = 0;
  std::size_t n_docs = 100;
  std::size_t kg_size = 200;
  std::size_t n_classes = 2;
};

struct SyntheticCorpus {
  kg::KnowledgeGraph kg;
  std::vector<DocumentRecord> docs;
};

/// Desk-scale corpus whose label depends on both the KG and the document graph.
///
/// The KG has one hub entity per class (ids 0..C-1, named "hub_<c>"). The other
/// entities split into territories, one per hub: connectors linked to their
/// hub, leaves linked to a connector, plus a few leaf-leaf links inside a
/// territory. Only one hub lies within 2 hops of any leaf. Every document
/// mentions leaves of one territory, one distinct leaf per paragraph. One
/// document in four also mentions two extra leaves in every paragraph, so all
/// its paragraph pairs share entities. The label is
///   (territory hub index + [at least two paragraph pairs share an entity]) mod C.
/// Documents are dealt round-robin over hubs, so classes are balanced up to
/// rounding. Tokens never name entities and descriptions come from a vocabulary
/// shared by all territories, so text alone does not reveal the hub.
SyntheticCorpus generate_synthetic_corpus(const SyntheticSpec& spec);

}  // namespace kalm::ctx
