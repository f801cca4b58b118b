#pragma once

// Shared fixtures and independent reference implementations for the test suites.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <unistd.h>

#include "kalm/contexts/document.hpp"
#include "kalm/contexts/graphs.hpp"
#include "kalm/kg/knowledge_graph.hpp"
#include "kalm/num/random.hpp"
#include "kalm/num/tensor.hpp"

namespace kalm::testing {

inline num::Tensor random_matrix(std::size_t rows, std::size_t cols, num::Rng& rng, bool requires_grad = false,
                                 double scale = 1.0) {
  std::vector<double> v(rows * cols);
  for (auto& x : v) x = scale * rng.normal();
  return num::Tensor::from({rows, cols}, std::move(v), requires_grad);
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return INFINITY;
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

inline double max_abs_diff(const num::Tensor& a, const num::Tensor& b) {
  if (a.shape() != b.shape()) return INFINITY;
  return max_abs_diff(a.to_vector(), b.to_vector());
}

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("kalm_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Random KG with entities 0..n-1, relations 0..r-1 and up to m distinct triples.
inline kg::KnowledgeGraph random_kg(std::size_t n, std::size_t m, std::uint64_t seed, std::size_t r = 3) {
  num::Rng rng(seed);
  kg::KnowledgeGraph g;
  for (std::size_t i = 0; i < n; ++i) g.add_entity(kg::EntityId(i), "e" + std::to_string(i), "about e" + std::to_string(i));
  for (std::size_t k = 0; k < r; ++k) g.add_relation(kg::RelationId(k), "r" + std::to_string(k), "rel " + std::to_string(k));
  for (std::size_t t = 0; t < m; ++t) {
    const auto h = kg::EntityId(rng.index(n)), tl = kg::EntityId(rng.index(n));
    if (h != tl) g.add_triple({h, kg::RelationId(rng.index(r)), tl});
  }
  return g;
}

/// Breadth-first search over the triple list, edges undirected.
inline std::vector<kg::EntityId> bfs_oracle(const kg::KnowledgeGraph& g, const std::vector<kg::EntityId>& seeds,
                                            std::size_t hops) {
  std::map<kg::EntityId, std::vector<kg::EntityId>> adj;
  for (const auto& t : g.triples()) {
    adj[t.head].push_back(t.tail);
    adj[t.tail].push_back(t.head);
  }
  std::map<kg::EntityId, std::size_t> depth;
  std::deque<kg::EntityId> queue;
  for (auto s : seeds) {
    if (depth.emplace(s, 0).second) queue.push_back(s);
  }
  while (!queue.empty()) {
    const auto u = queue.front();
    queue.pop_front();
    if (depth[u] == hops) continue;
    for (auto v : adj[u]) {
      if (depth.emplace(v, depth[u] + 1).second) queue.push_back(v);
    }
  }
  std::vector<kg::EntityId> out;
  for (const auto& [e, d] : depth) out.push_back(e);
  return out;
}

/// Brute-force document-graph edges: every ordered paragraph pair, every
/// entity in both mention lists, plus super edges to the fusion node.
inline std::vector<ctx::Edge> pairwise_edges_oracle(const ctx::DocumentRecord& doc) {
  std::vector<ctx::Edge> edges;
  const auto& ps = doc.paragraphs;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    edges.push_back({0, i + 1, ctx::EdgeType::super()});
    edges.push_back({i + 1, 0, ctx::EdgeType::super()});
    for (std::size_t j = 0; j < ps.size(); ++j) {
      if (i == j) continue;
      std::set<kg::EntityId> shared;
      for (auto a : ps[i].mentions) {
        for (auto b : ps[j].mentions) {
          if (a == b) shared.insert(a);
        }
      }
      for (auto e : shared) edges.push_back({i + 1, j + 1, ctx::EdgeType::entity(e)});
    }
  }
  std::sort(edges.begin(), edges.end());
  return edges;
}

/// Random document over entities [0, n_entities).
inline ctx::DocumentRecord random_document(num::Rng& rng, std::size_t n_entities, std::size_t max_paragraphs = 6,
                                           std::size_t max_mentions = 3) {
  ctx::DocumentRecord d;
  d.doc_id = "doc" + std::to_string(rng.next() % 100000);
  d.paragraphs.resize(1 + rng.index(max_paragraphs));
  for (auto& p : d.paragraphs) {
    const std::size_t n_tok = 1 + rng.index(6);
    for (std::size_t t = 0; t < n_tok; ++t) p.tokens.push_back("w" + std::to_string(rng.index(20)));
    const std::size_t n_m = rng.index(max_mentions + 1);
    for (std::size_t m = 0; m < n_m; ++m) p.mentions.push_back(kg::EntityId(rng.index(n_entities)));
  }
  return d;
}

}  // namespace kalm::testing
