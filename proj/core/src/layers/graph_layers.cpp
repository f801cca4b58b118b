#include "kalm/layers/graph_layers.hpp"

#include <algorithm>

#include "kalm/errors.hpp"

namespace kalm::layers {

using namespace kalm::num;
using ctx::Edge;
using ctx::EdgeType;

namespace {

struct EdgeIndex {
  std::vector<std::size_t> target, source;
};

EdgeIndex index_edges(const std::vector<Edge>& edges, std::size_t node_count) {
  EdgeIndex idx;
  idx.target.reserve(edges.size());
  idx.source.reserve(edges.size());
  for (const auto& e : edges) {
    if (e.target >= node_count || e.source >= node_count) throw StructuralError("edge endpoint outside the graph");
    idx.target.push_back(e.target);
    idx.source.push_back(e.source);
  }
  return idx;
}

}  // namespace

std::vector<Edge> with_self_loops(std::size_t node_count, const std::vector<Edge>& edges) {
  std::vector<Edge> out;
  out.reserve(node_count + edges.size());
  for (std::size_t i = 0; i < node_count; ++i) out.push_back({i, i, EdgeType{}});
  out.insert(out.end(), edges.begin(), edges.end());
  return out;
}

std::size_t RelationTable::row_of(const EdgeType& type) const {
  switch (type.kind) {
    case EdgeType::Kind::kSelf:
      return 0;
    case EdgeType::Kind::kSuper:
      return 1;
    case EdgeType::Kind::kEntity: {
      auto it = std::lower_bound(entities.begin(), entities.end(), type.id);
      if (it == entities.end() || *it != type.id) {
        throw StructuralError("edge type entity " + std::to_string(type.id) + " has no relation features");
      }
      return 2 + static_cast<std::size_t>(it - entities.begin());
    }
    default:
      throw StructuralError("document graph edges must be self, super or entity typed");
  }
}

Tensor RelationTable::stacked() const {
  if (!entity_features.defined()) return reserved;
  const Tensor parts[] = {reserved, entity_features};
  return concat_rows(parts);
}

KnowledgeGuidedLayer::KnowledgeGuidedLayer(std::size_t d_model, std::size_t kge_dim, std::uint64_t dropout_seed,
                                           Rng& rng)
    : d_model_(d_model),
      theta_(uniform_weight(d_model, d_model, rng)),
      attn_(uniform_weight(3 * d_model, 1, rng)),
      relation_proj_(kge_dim, d_model, rng),
      dropout_(dropout_seed) {}

KnowledgeGuidedLayer::Output KnowledgeGuidedLayer::forward(const Tensor& g, const ctx::DocumentGraph& graph,
                                                           const RelationTable& relations, const Mode& mode) const {
  const std::size_t n = g.rows();
  if (g.cols() != d_model_) throw DimensionError("document layer expects width " + std::to_string(d_model_));
  if (graph.node_count != n) throw DimensionError("document graph size does not match feature rows");

  Output out;
  out.attention.edges = with_self_loops(n, graph.edges);
  const auto& edges = out.attention.edges;
  const auto idx = index_edges(edges, n);
  std::vector<std::size_t> type_row(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) type_row[e] = relations.row_of(edges[e].type);

  const Tensor h = matmul(g, theta_);
  const Tensor r = matmul(relation_proj_(relations.stacked()), theta_);
  const Tensor s_target = matmul(h, slice_rows(attn_, 0, d_model_));
  const Tensor s_source = matmul(h, slice_rows(attn_, d_model_, 2 * d_model_));
  const Tensor s_rel = matmul(r, slice_rows(attn_, 2 * d_model_, 3 * d_model_));
  const Tensor logits = elu(gather_rows(s_target, idx.target) + gather_rows(s_source, idx.source) +
                            gather_rows(s_rel, type_row));
  const Tensor alpha = segment_softmax(logits, idx.target, n);
  out.attention.weights.push_back(alpha);
  const Tensor msg = mul_col(gather_rows(h, idx.source), dropout(alpha, mode.dropout, dropout_, mode.train));
  out.y = tanh(scatter_add_rows(msg, idx.target, n));
  return out;
}

void KnowledgeGuidedLayer::collect(ParameterList& out, const std::string& prefix, int layer) const {
  out.push_back({prefix + ".theta", layer, theta_});
  out.push_back({prefix + ".attention", layer, attn_});
  relation_proj_.collect(out, prefix + ".relation_proj", layer);
}

GraphAttentionLayer::GraphAttentionLayer(std::size_t d_model, std::size_t n_heads, std::uint64_t dropout_seed,
                                         Rng& rng)
    : d_model_(d_model),
      n_heads_(n_heads),
      weight_(uniform_weight(d_model, d_model, rng)),
      attn_src_(uniform_init({d_model, 1}, d_model / std::max<std::size_t>(n_heads, 1), rng)),
      attn_dst_(uniform_init({d_model, 1}, d_model / std::max<std::size_t>(n_heads, 1), rng)),
      out_proj_(d_model, d_model, rng),
      dropout_(dropout_seed) {
  if (n_heads == 0 || d_model % n_heads != 0) {
    throw DimensionError("d_model " + std::to_string(d_model) + " is not divisible by " + std::to_string(n_heads) +
                         " heads");
  }
}

GraphAttentionLayer::Output GraphAttentionLayer::forward(const Tensor& k, const std::vector<Edge>& edges,
                                                         const Mode& mode) const {
  const std::size_t n = k.rows();
  if (k.cols() != d_model_) throw DimensionError("graph attention layer expects width " + std::to_string(d_model_));
  Output out;
  out.attention.edges = with_self_loops(n, edges);
  const auto idx = index_edges(out.attention.edges, n);
  const std::size_t dh = d_model_ / n_heads_;

  const Tensor h = matmul(k, weight_);
  std::vector<Tensor> heads;
  heads.reserve(n_heads_);
  for (std::size_t i = 0; i < n_heads_; ++i) {
    const auto c0 = i * dh, c1 = c0 + dh;
    const Tensor hh = n_heads_ == 1 ? h : slice_cols(h, c0, c1);
    const Tensor s_src = matmul(hh, slice_rows(attn_src_, c0, c1));
    const Tensor s_dst = matmul(hh, slice_rows(attn_dst_, c0, c1));
    const Tensor logits = leaky_relu(gather_rows(s_dst, idx.target) + gather_rows(s_src, idx.source), 0.2);
    const Tensor alpha = segment_softmax(logits, idx.target, n);
    out.attention.weights.push_back(alpha);
    const Tensor msg = mul_col(gather_rows(hh, idx.source), dropout(alpha, mode.dropout, dropout_, mode.train));
    heads.push_back(scatter_add_rows(msg, idx.target, n));
  }
  out.y = out_proj_(elu(n_heads_ == 1 ? heads.front() : concat_cols(heads)));
  return out;
}

void GraphAttentionLayer::collect(ParameterList& out, const std::string& prefix, int layer) const {
  out.push_back({prefix + ".weight", layer, weight_});
  out.push_back({prefix + ".attn_src", layer, attn_src_});
  out.push_back({prefix + ".attn_dst", layer, attn_dst_});
  out_proj_.collect(out, prefix + ".out_proj", layer);
}

}  // namespace kalm::layers
