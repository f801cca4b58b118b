#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "kalm/kg/knowledge_graph.hpp"

namespace kalm::kg {

struct Neighborhood {
  std::vector<EntityId> entities;  // sorted
  std::vector<Triple> triples;     // every KG triple with both ends inside, sorted
};

/// Entities within `hops` undirected steps of any seed, plus the induced triples.
/// Throws InputError for seeds that are not in the graph.
Neighborhood khop_neighborhood(const KnowledgeGraph& kg, std::span<const EntityId> seeds, std::size_t hops);

}  // namespace kalm::kg
