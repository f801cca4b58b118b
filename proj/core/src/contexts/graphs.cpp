#include "kalm/contexts/graphs.hpp"

#include <algorithm>
#include <atomic>
#include <unordered_map>

#include "kalm/kg/khop.hpp"

namespace kalm::ctx {

namespace {
std::atomic<std::size_t> g_global_builds{0};

std::vector<kg::EntityId> sorted_unique(std::vector<kg::EntityId> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}
}  // namespace

DocumentGraph build_document_graph(const DocumentRecord& doc) {
  const std::size_t n = doc.paragraphs.size();
  DocumentGraph g;
  g.node_count = n + 1;
  for (std::size_t i = 1; i <= n; ++i) {
    g.edges.push_back({0, i, EdgeType::super()});
    g.edges.push_back({i, 0, EdgeType::super()});
  }
  std::vector<std::vector<kg::EntityId>> sets(n);
  for (std::size_t i = 0; i < n; ++i) sets[i] = sorted_unique(doc.paragraphs[i].mentions);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      std::vector<kg::EntityId> shared;
      std::set_intersection(sets[i].begin(), sets[i].end(), sets[j].begin(), sets[j].end(),
                            std::back_inserter(shared));
      for (auto e : shared) {
        g.edges.push_back({i + 1, j + 1, EdgeType::entity(e)});
        g.edges.push_back({j + 1, i + 1, EdgeType::entity(e)});
      }
    }
  }
  return g;
}

GlobalSubgraph build_global_subgraph(const DocumentRecord& doc, const kg::KnowledgeGraph& kg, std::size_t hops) {
  g_global_builds.fetch_add(1, std::memory_order_relaxed);
  GlobalSubgraph g;
  const auto seeds = doc.mentioned_entities();
  if (seeds.empty()) {
    g.warnings.push_back("document " + doc.doc_id + " mentions no entities; global context is the fusion entity only");
    return g;
  }
  auto hood = kg::khop_neighborhood(kg, seeds, hops);
  g.entities = std::move(hood.entities);
  std::unordered_map<kg::EntityId, std::size_t> node;
  for (std::size_t i = 0; i < g.entities.size(); ++i) node[g.entities[i]] = i + 1;
  for (std::size_t i = 1; i <= g.entities.size(); ++i) {
    g.edges.push_back({0, i, EdgeType::fusion()});
    g.edges.push_back({i, 0, EdgeType::fusion()});
  }
  for (const auto& t : hood.triples) {
    const auto h = node.at(t.head);
    const auto tl = node.at(t.tail);
    g.edges.push_back({tl, h, EdgeType::relation(t.relation)});
    g.edges.push_back({h, tl, EdgeType::relation(t.relation)});
  }
  return g;
}

std::size_t global_subgraph_builds() { return g_global_builds.load(); }

}  // namespace kalm::ctx
