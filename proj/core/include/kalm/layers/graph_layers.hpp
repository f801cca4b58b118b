#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "kalm/contexts/graphs.hpp"
#include "kalm/kg/knowledge_graph.hpp"
#include "kalm/layers/encoder.hpp"

namespace kalm::layers {

/// Attention weights of one graph layer: weights[e] belongs to edge e of
/// `edges`, which starts with one self-loop per node.
struct EdgeAttention {
  std::vector<ctx::Edge> edges;
  std::vector<num::Tensor> weights;  // per head, E×1
};

/// Relation features for the knowledge-guided layer. Row 0 is the
/// self-loop relation, row 1 the super-relation, rows 2.. the frozen KGE rows
/// of `entities` in order.
struct RelationTable {
  num::Tensor reserved;                // 2 × kge_dim, trainable
  std::vector<kg::EntityId> entities;  // sorted
  num::Tensor entity_features;         // |entities| × kge_dim, may be undefined

  std::size_t row_of(const ctx::EdgeType& type) const;
  num::Tensor stacked() const;
};

/// Knowledge-guided message passing over the document graph:
///   h_j = Θ g_j,  r_ij = Θ f(KGE(type_ij))
///   α_ij = softmax over {self} ∪ incident edges of ELU(aᵀ[h_i ‖ h_j ‖ r_ij])
///   g̃_i = tanh(Σ_j α_ij h_j)
/// Each parallel edge (one per shared entity) is its own term.
class KnowledgeGuidedLayer {
 public:
  struct Output {
    num::Tensor y;
    EdgeAttention attention;
  };

  KnowledgeGuidedLayer() = default;
  KnowledgeGuidedLayer(std::size_t d_model, std::size_t kge_dim, std::uint64_t dropout_seed, num::Rng& rng);

  Output forward(const num::Tensor& g, const ctx::DocumentGraph& graph, const RelationTable& relations,
                 const Mode& mode) const;
  void collect(num::ParameterList& out, const std::string& prefix, int layer) const;

  /// Test access.
  num::Tensor& theta() { return theta_; }
  num::Tensor& attention_vector() { return attn_; }
  num::Linear& relation_projection() { return relation_proj_; }

 private:
  std::size_t d_model_ = 0;
  num::Tensor theta_;  // d×d, applied as rows · theta
  num::Tensor attn_;   // 3d×1: [target | source | relation]
  num::Linear relation_proj_;
  mutable num::DropoutStream dropout_;
};

/// Multi-head graph attention (GAT): per head, logits
/// LeakyReLU(a_dstᵀ W h_i + a_srcᵀ W h_j) over {self} ∪ in-edges, softmax,
/// weighted sum; heads are concatenated, passed through ELU and an output
/// projection back to d_model. Edge types are ignored.
class GraphAttentionLayer {
 public:
  struct Output {
    num::Tensor y;
    EdgeAttention attention;
  };

  GraphAttentionLayer() = default;
  GraphAttentionLayer(std::size_t d_model, std::size_t n_heads, std::uint64_t dropout_seed, num::Rng& rng);

  Output forward(const num::Tensor& k, const std::vector<ctx::Edge>& edges, const Mode& mode) const;
  void collect(num::ParameterList& out, const std::string& prefix, int layer) const;

 private:
  std::size_t d_model_ = 0, n_heads_ = 1;
  num::Tensor weight_;  // d×d
  num::Tensor attn_src_, attn_dst_;  // d×1, head h uses rows [h*dh, (h+1)*dh)
  num::Linear out_proj_;
  mutable num::DropoutStream dropout_;
};

/// Edge list with one self-loop per node prepended.
std::vector<ctx::Edge> with_self_loops(std::size_t node_count, const std::vector<ctx::Edge>& edges);

}  // namespace kalm::layers
