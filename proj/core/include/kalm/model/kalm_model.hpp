#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "kalm/contexts/bundle.hpp"
#include "kalm/kg/embedding.hpp"
#include "kalm/layers/kalm_layer.hpp"
#include "kalm/model/config.hpp"

namespace kalm::model {

/// Which contexts a variant keeps and how it fuses them.
struct Variant {
  ctx::ContextMask contexts;
  layers::FusionKind fusion = layers::FusionKind::kEncoder;
};

Variant variant_from_name(const std::string& name);
const std::vector<std::string>& variant_names();

/// Bundle options implied by a config (contexts follow the variant).
ctx::BundleOptions bundle_options(const TrainConfig& config, const ctx::PrecomputedEmbeddings* precomputed = nullptr);

struct ForwardResult {
  num::Tensor log_probs;  // 1×C
  std::vector<layers::LayerTrace> traces;  // filled when capture is requested
};

/// Input projections, P KALM layers and the classification head
/// MLP(concat of final fusion portals) -> log-softmax.
class KalmModel {
 public:
  KalmModel(const TrainConfig& config, const kg::EmbeddingTable& kge);
  /// Variant and fusion can be overridden (test hooks, e.g. identity fusion).
  KalmModel(const TrainConfig& config, const kg::EmbeddingTable& kge, const Variant& variant);

  ForwardResult forward(const ctx::ContextBundle& bundle, const layers::Mode& mode, bool capture = false) const;
  num::Tensor loss(const ctx::ContextBundle& bundle, const layers::Mode& mode) const;
  std::size_t predict(const ctx::ContextBundle& bundle) const;

  /// Every trainable tensor with a unique name, in a fixed order.
  num::ParameterList parameters() const;
  void zero_grad() const;

  const TrainConfig& config() const { return config_; }
  const Variant& variant() const { return variant_; }
  layers::KalmLayer& layer(std::size_t i) { return layers_.at(i); }
  ctx::InputProjection& input() { return input_; }
  num::Tensor& reserved_relations() { return reserved_; }

  /// Train/eval mode from the config's dropout rate.
  layers::Mode train_mode() const { return {true, config_.dropout}; }
  static layers::Mode eval_mode() { return {false, 0.0}; }

 private:
  TrainConfig config_;
  Variant variant_;
  ctx::InputProjection input_;
  num::Tensor reserved_;  // SELF and SUPER relation rows, kge_dim wide
  std::vector<layers::KalmLayer> layers_;
  num::Linear head_hidden_, head_out_;
};

}  // namespace kalm::model
