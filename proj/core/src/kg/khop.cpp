#include "kalm/kg/khop.hpp"

#include <algorithm>
#include <deque>
#include <unordered_map>

#include "kalm/errors.hpp"

namespace kalm::kg {

Neighborhood khop_neighborhood(const KnowledgeGraph& kg, std::span<const EntityId> seeds, std::size_t hops) {
  std::unordered_map<EntityId, std::size_t> depth;
  std::deque<EntityId> frontier;
  for (EntityId s : seeds) {
    if (!kg.has_entity(s)) throw InputError("seed entity " + std::to_string(s) + " is not in the knowledge graph");
    if (depth.emplace(s, 0).second) frontier.push_back(s);
  }
  while (!frontier.empty()) {
    const EntityId u = frontier.front();
    frontier.pop_front();
    const std::size_t du = depth[u];
    if (du == hops) continue;
    for (EntityId v : kg.neighbors(u)) {
      if (depth.emplace(v, du + 1).second) frontier.push_back(v);
    }
  }

  Neighborhood out;
  out.entities.reserve(depth.size());
  for (const auto& [e, _] : depth) out.entities.push_back(e);
  std::sort(out.entities.begin(), out.entities.end());
  for (EntityId h : out.entities) {
    for (EntityId t : kg.neighbors(h)) {
      if (!depth.contains(t)) continue;
      for (RelationId r : kg.relations_between(h, t)) out.triples.push_back({h, r, t});
    }
  }
  std::sort(out.triples.begin(), out.triples.end());
  return out;
}

}  // namespace kalm::kg
