#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "kalm/contexts/document.hpp"
#include "kalm/contexts/embedder.hpp"
#include "kalm/contexts/graphs.hpp"
#include "kalm/kg/embedding.hpp"
#include "kalm/num/linear.hpp"

namespace kalm::ctx {

/// Which of the three contexts a bundle carries.
struct ContextMask {
  bool local = true;
  bool doc = true;
  bool global = true;
  bool operator==(const ContextMask&) const = default;
};

struct BundleOptions {
  std::size_t d_embed = 256;
  std::size_t k_hops = 2;
  std::uint64_t embed_seed = 0;
  ContextMask contexts;
  const PrecomputedEmbeddings* precomputed = nullptr;
};

/// Raw inputs of the three contexts for one document. Everything here is
/// constant; the learnable pieces (fusion vectors, input projections) live in
/// InputProjection.
struct ContextBundle {
  std::string doc_id;
  std::size_t label = 0;
  std::size_t paragraph_count = 0;
  std::size_t mention_count = 0;  // |rho(d)|
  ContextMask contexts;

  num::Tensor local_features;  // n × d_embed, augmented paragraphs
  num::Tensor doc_features;    // n × d_embed, original paragraphs
  DocumentGraph doc_graph;
  /// Distinct entity ids used as document-graph edge types, sorted, and their frozen KGE rows.
  std::vector<kg::EntityId> edge_entities;
  num::Tensor edge_entity_features;  // |edge_entities| × kge_dim, undefined when empty

  GlobalSubgraph global;
  num::Tensor global_features;  // S × kge_dim, undefined when S == 0

  std::vector<std::string> warnings;
};

ContextBundle build_bundle(const DocumentRecord& doc, const kg::KnowledgeGraph& kg, const kg::EmbeddingTable& kge,
                           const BundleOptions& options);

/// Order-sensitive digest of a bundle's contents, for determinism checks.
std::uint64_t bundle_digest(const ContextBundle& bundle);

/// Per-context layer-0 features, each with the fusion row first.
struct InitialFeatures {
  num::Tensor local;   // (n+1) × d_model
  num::Tensor doc;     // (n+1) × d_model
  num::Tensor global;  // (S+1) × d_model
};

/// Learnable fusion vectors (one per context, shared across documents) and
/// the input projections d_embed→d_model (local, doc) and kge_dim→d_model (global).
class InputProjection {
 public:
  InputProjection() = default;
  InputProjection(std::size_t d_embed, std::size_t kge_dim, std::size_t d_model, num::Rng& rng);

  InitialFeatures project(const ContextBundle& bundle) const;
  void collect(num::ParameterList& out) const;
  std::size_t d_model() const { return d_model_; }

 private:
  std::size_t d_embed_ = 0, kge_dim_ = 0, d_model_ = 0;
  num::Tensor fusion_local_, fusion_doc_, fusion_global_;
  num::Linear local_proj_, doc_proj_, global_proj_;
};

}  // namespace kalm::ctx
