#include "kalm/layers/kalm_layer.hpp"

#include "kalm/errors.hpp"
#include "kalm/num/random.hpp"

namespace kalm::layers {

using namespace kalm::num;

namespace {

std::uint64_t stream_seed(std::uint64_t seed, int layer, std::uint64_t tag) {
  return mix64(mix64(seed, static_cast<std::uint64_t>(layer) + 1), tag);
}

Tensor recompose(const Tensor& portal, const Tensor& rows) {
  if (rows.rows() == 1) return portal;
  const Tensor parts[] = {portal, slice_rows(rows, 1, rows.rows())};
  return concat_rows(parts);
}

}  // namespace

EncoderBlock::Output local_layer(const EncoderBlock& block, const Tensor& t, const Mode& mode) {
  auto out = block.forward(t, mode);
  out.y = tanh(out.y);
  return out;
}

KalmLayer::KalmLayer(const LayerConfig& config, int index, Rng& rng) : config_(config), index_(index) {
  const auto& c = config;
  if (c.contexts.local) local_ = EncoderBlock(c.d_model, c.n_heads, c.ffn_mult, stream_seed(c.seed, index, 1), rng);
  if (c.contexts.doc) doc_ = KnowledgeGuidedLayer(c.d_model, c.kge_dim, stream_seed(c.seed, index, 2), rng);
  if (c.contexts.global) global_ = GraphAttentionLayer(c.d_model, c.n_heads, stream_seed(c.seed, index, 3), rng);
  fusion_ = ContextFusion(c.d_model, c.n_heads, c.ffn_mult, c.fusion, c.contexts, stream_seed(c.seed, index, 4), rng);
}

LayerState KalmLayer::forward(const LayerState& in, const ctx::DocumentGraph& doc_graph,
                              const RelationTable& relations, const std::vector<ctx::Edge>& global_edges,
                              const Mode& mode) const {
  const auto& active = config_.contexts;
  LayerState out;
  FusionInputs fin;
  if (active.local) {
    auto r = local_layer(local_, in.local, mode);
    fin.local = r.y;
    out.trace.local = std::move(r.attention);
  }
  if (active.doc) {
    auto r = doc_.forward(in.doc, doc_graph, relations, mode);
    fin.doc = r.y;
    out.trace.doc = std::move(r.attention);
  }
  if (active.global) {
    auto r = global_.forward(in.global, global_edges, mode);
    fin.global = r.y;
    out.trace.global = std::move(r.attention);
  }
  auto fused = fusion_.forward(fin, mode);
  out.trace.fusion = std::move(fused.attention);
  if (active.local) out.local = recompose(fused.local_portal, fin.local);
  if (active.doc) out.doc = recompose(fused.doc_portal, fin.doc);
  if (active.global) out.global = recompose(fused.global_portal, fin.global);
  return out;
}

void KalmLayer::collect(ParameterList& out) const {
  const std::string p = "layer" + std::to_string(index_);
  if (config_.contexts.local) local_.collect(out, p + ".local", index_);
  if (config_.contexts.doc) doc_.collect(out, p + ".doc", index_);
  if (config_.contexts.global) global_.collect(out, p + ".global", index_);
  fusion_.collect(out, p + ".fusion", index_);
}

}  // namespace kalm::layers
