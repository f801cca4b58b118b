#include "kalm/model/kalm_model.hpp"

#include <algorithm>

#include "kalm/errors.hpp"
#include "kalm/num/ops.hpp"

namespace kalm::model {

using namespace kalm::num;
using layers::FusionKind;

const std::vector<std::string>& variant_names() {
  static const std::vector<std::string> names{"full", "no_local", "no_document", "no_global", "concat", "sum", "mint"};
  return names;
}

Variant variant_from_name(const std::string& name) {
  Variant v;
  if (name == "full") return v;
  if (name == "no_local") v.contexts.local = false;
  else if (name == "no_document") v.contexts.doc = false;
  else if (name == "no_global") v.contexts.global = false;
  else if (name == "concat") v.fusion = FusionKind::kConcat;
  else if (name == "sum") v.fusion = FusionKind::kSum;
  else if (name == "mint") v.fusion = FusionKind::kMint;
  else throw ConfigError("unknown variant '" + name + "'");
  return v;
}

ctx::BundleOptions bundle_options(const TrainConfig& config, const ctx::PrecomputedEmbeddings* precomputed) {
  ctx::BundleOptions o;
  o.d_embed = config.d_embed;
  o.k_hops = config.k_hops;
  o.embed_seed = 0;
  o.contexts = variant_from_name(config.variant).contexts;
  o.precomputed = precomputed;
  return o;
}

KalmModel::KalmModel(const TrainConfig& config, const kg::EmbeddingTable& kge)
    : KalmModel(config, kge, variant_from_name(config.variant)) {}

KalmModel::KalmModel(const TrainConfig& config, const kg::EmbeddingTable& kge, const Variant& variant)
    : config_(config), variant_(variant) {
  validate(config);
  if (kge.dim != config.kge_dim) {
    throw ConfigError("embedding table has dim " + std::to_string(kge.dim) + " but kge_dim is " +
                      std::to_string(config.kge_dim));
  }
  Rng rng(mix64(config.seed, 0x6b616c6d));
  input_ = ctx::InputProjection(config.d_embed, config.kge_dim, config.d_model, rng);

  std::vector<double> reserved(2 * kge.dim);
  if (kge.reserved.defined() && kge.reserved.rows() >= 2) {
    const auto src = kge.reserved.data();
    std::copy(src.begin(), src.begin() + std::ptrdiff_t(2 * kge.dim), reserved.begin());
  } else {
    for (auto& x : reserved) x = rng.uniform(-0.1, 0.1);
  }
  reserved_ = Tensor::from({2, kge.dim}, std::move(reserved), true);

  layers::LayerConfig lc;
  lc.d_model = config.d_model;
  lc.n_heads = config.n_heads;
  lc.ffn_mult = config.ffn_mult;
  lc.kge_dim = config.kge_dim;
  lc.fusion = variant.fusion;
  lc.contexts = variant.contexts;
  lc.seed = config.seed;
  for (std::size_t i = 0; i < config.n_layers; ++i) layers_.emplace_back(lc, int(i), rng);

  const std::size_t active = std::size_t(variant.contexts.local) + variant.contexts.doc + variant.contexts.global;
  head_hidden_ = Linear(active * config.d_model, config.d_model, rng);
  head_out_ = Linear(config.d_model, config.n_classes, rng);
}

ForwardResult KalmModel::forward(const ctx::ContextBundle& bundle, const layers::Mode& mode, bool capture) const {
  if (!(bundle.contexts == variant_.contexts)) throw ConfigError("bundle contexts do not match the model variant");
  const auto init = input_.project(bundle);
  layers::LayerState state;
  state.local = init.local;
  state.doc = init.doc;
  state.global = init.global;

  layers::RelationTable relations;
  relations.reserved = reserved_;
  relations.entities = bundle.edge_entities;
  relations.entity_features = bundle.edge_entity_features;

  ForwardResult out;
  for (const auto& layer : layers_) {
    state = layer.forward(state, bundle.doc_graph, relations, bundle.global.edges, mode);
    if (capture) out.traces.push_back(std::move(state.trace));
  }
  std::vector<Tensor> portals;
  if (variant_.contexts.local) portals.push_back(slice_rows(state.local, 0, 1));
  if (variant_.contexts.doc) portals.push_back(slice_rows(state.doc, 0, 1));
  if (variant_.contexts.global) portals.push_back(slice_rows(state.global, 0, 1));
  const Tensor joined = portals.size() == 1 ? portals.front() : concat_cols(portals);
  out.log_probs = log_softmax(head_out_(tanh(head_hidden_(joined))), -1);
  return out;
}

Tensor KalmModel::loss(const ctx::ContextBundle& bundle, const layers::Mode& mode) const {
  if (bundle.label >= config_.n_classes) {
    throw InputError("label " + std::to_string(bundle.label) + " of " + bundle.doc_id + " is outside the class range");
  }
  return nll(forward(bundle, mode).log_probs, bundle.label);
}

std::size_t KalmModel::predict(const ctx::ContextBundle& bundle) const {
  const auto lp = forward(bundle, eval_mode()).log_probs.data();
  return std::size_t(std::max_element(lp.begin(), lp.end()) - lp.begin());
}

ParameterList KalmModel::parameters() const {
  ParameterList out;
  input_.collect(out);
  out.push_back({"relations.reserved", -1, reserved_});
  for (const auto& l : layers_) l.collect(out);
  head_hidden_.collect(out, "head.hidden", -1);
  head_out_.collect(out, "head.out", -1);
  return out;
}

void KalmModel::zero_grad() const {
  for (auto& p : parameters()) p.tensor.zero_grad();
}

}  // namespace kalm::model
