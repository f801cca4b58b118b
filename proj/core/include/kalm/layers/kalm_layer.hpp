#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "kalm/contexts/bundle.hpp"
#include "kalm/layers/encoder.hpp"
#include "kalm/layers/fusion.hpp"
#include "kalm/layers/graph_layers.hpp"

namespace kalm::layers {

struct LayerConfig {
  std::size_t d_model = 512;
  std::size_t n_heads = 8;
  std::size_t ffn_mult = 4;
  std::size_t kge_dim = 100;
  FusionKind fusion = FusionKind::kEncoder;
  ctx::ContextMask contexts;
  std::uint64_t seed = 0;
};

/// Attention weights captured during one KALM layer.
struct LayerTrace {
  std::vector<num::Tensor> local;  // per head, (n+1)×(n+1)
  EdgeAttention doc;
  EdgeAttention global;
  std::vector<num::Tensor> fusion;  // per head, P×P
};

/// Per-context states between KALM layers; row 0 of each is the fusion portal.
struct LayerState {
  num::Tensor local;   // (n+1)×d
  num::Tensor doc;     // (n+1)×d
  num::Tensor global;  // (S+1)×d
  LayerTrace trace;
};

/// Local encoder, knowledge-guided document layer and global GAT, then
/// ContextFusion; row 0 of every context is replaced by its fused portal.
class KalmLayer {
 public:
  KalmLayer() = default;
  KalmLayer(const LayerConfig& config, int index, num::Rng& rng);

  LayerState forward(const LayerState& in, const ctx::DocumentGraph& doc_graph, const RelationTable& relations,
                     const std::vector<ctx::Edge>& global_edges, const Mode& mode) const;
  void collect(num::ParameterList& out) const;

  EncoderBlock& local() { return local_; }
  KnowledgeGuidedLayer& doc() { return doc_; }
  GraphAttentionLayer& global() { return global_; }
  ContextFusion& fusion() { return fusion_; }

 private:
  LayerConfig config_;
  int index_ = 0;
  EncoderBlock local_;
  KnowledgeGuidedLayer doc_;
  GraphAttentionLayer global_;
  ContextFusion fusion_;
};

/// Local context layer: tanh(TrmEnc(T)).
EncoderBlock::Output local_layer(const EncoderBlock& block, const num::Tensor& t, const Mode& mode);

}  // namespace kalm::layers
