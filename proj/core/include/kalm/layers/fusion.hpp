#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "kalm/contexts/bundle.hpp"
#include "kalm/layers/encoder.hpp"

namespace kalm::layers {

struct PoolResult {
  num::Tensor pooled;   // 1×d
  num::Tensor weights;  // m×1
};

/// ap(q, K) = Σ_i softmax_i(q · k_i) k_i for q: 1×d, keys: m×d.
PoolResult attentive_pool(const num::Tensor& query, const num::Tensor& keys);

/// How the fusion portals exchange information.
enum class FusionKind {
  kEncoder,   // encoder block over [portals..., pooled summaries...]
  kConcat,    // concatenate all vectors, linear map back to the portals
  kSum,       // every portal becomes W(t_L + g_L + k_L) + b
  kMint,      // two-position encoder over [t_L, k_L]; g_L untouched
  kIdentity,  // portals pass through unchanged (no cross-context coupling)
};

const char* to_string(FusionKind kind);
FusionKind fusion_kind_from_string(const std::string& s);

/// One context as seen by ContextFusion: the context-layer output with the
/// portal in row 0. Undefined when the context is switched off.
struct FusionInputs {
  num::Tensor local, doc, global;
};

struct FusionOutput {
  num::Tensor local_portal, doc_portal, global_portal;  // 1×d each, undefined for inactive contexts
  /// Per-head attention over the fusion positions (encoder and mint kinds).
  std::vector<num::Tensor> attention;
};

/// Fusion position labels of the full six-position encoder.
inline constexpr const char* kFusionPositions[6] = {"t_L", "g_L", "k_L", "t_G", "g_G", "k_G"};

class ContextFusion {
 public:
  ContextFusion() = default;
  ContextFusion(std::size_t d_model, std::size_t n_heads, std::size_t ffn_mult, FusionKind kind,
                ctx::ContextMask active, std::uint64_t dropout_seed, num::Rng& rng);

  FusionOutput forward(const FusionInputs& in, const Mode& mode) const;
  void collect(num::ParameterList& out, const std::string& prefix, int layer) const;

  FusionKind kind() const { return kind_; }
  /// Sum-kind post-linear, exposed for tests.
  num::Linear& post() { return post_; }

 private:
  std::size_t d_model_ = 0;
  FusionKind kind_ = FusionKind::kEncoder;
  ctx::ContextMask active_;
  EncoderBlock encoder_;
  num::Linear post_;
};

}  // namespace kalm::layers
