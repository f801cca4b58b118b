#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "kalm/contexts/document.hpp"
#include "kalm/kg/knowledge_graph.hpp"

namespace kalm::ctx {

struct EdgeType {
  enum class Kind : std::uint8_t { kEntity, kRelation, kSelf, kSuper, kFusion };
  Kind kind = Kind::kSelf;
  std::uint32_t id = 0;  // entity id for kEntity, relation id for kRelation

  static EdgeType entity(kg::EntityId e) { return {Kind::kEntity, e}; }
  static EdgeType relation(kg::RelationId r) { return {Kind::kRelation, r}; }
  static EdgeType super() { return {Kind::kSuper, 0}; }
  static EdgeType fusion() { return {Kind::kFusion, 0}; }
  auto operator<=>(const EdgeType&) const = default;
};

/// Directed edge along which `target` receives a message from `source`.
struct Edge {
  std::size_t target = 0;
  std::size_t source = 0;
  EdgeType type;
  auto operator<=>(const Edge&) const = default;
};

/// Paragraph graph: node 0 is the fusion node, node i is paragraph i.
/// Paragraphs i != j that both mention entity k are linked by (i, j, k) and
/// (j, i, k), one pair per shared entity. Node 0 and every paragraph are linked
/// both ways by super-relation edges. Self-loops are not stored.
struct DocumentGraph {
  std::size_t node_count = 0;
  std::vector<Edge> edges;
};

DocumentGraph build_document_graph(const DocumentRecord& doc);

/// k-hop subgraph around the document's mentions: node 0 is the fusion
/// entity, node i is entities[i - 1]. Every induced KG triple appears in
/// both directions with its relation type; the fusion entity is linked both
/// ways to every other node.
struct GlobalSubgraph {
  std::vector<kg::EntityId> entities;  // sorted
  std::vector<Edge> edges;
  std::vector<std::string> warnings;

  std::size_t node_count() const { return entities.size() + 1; }
};

GlobalSubgraph build_global_subgraph(const DocumentRecord& doc, const kg::KnowledgeGraph& kg, std::size_t hops);

/// Number of global subgraphs constructed by this process (instrumentation for ablations).
std::size_t global_subgraph_builds();

}  // namespace kalm::ctx
