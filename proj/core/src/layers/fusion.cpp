#include "kalm/layers/fusion.hpp"

#include "kalm/errors.hpp"

namespace kalm::layers {

using namespace kalm::num;

PoolResult attentive_pool(const Tensor& query, const Tensor& keys) {
  if (!keys.defined() || keys.rows() == 0) throw StructuralError("attentive pooling over an empty key set");
  if (query.rank() != 2 || query.rows() != 1 || query.cols() != keys.cols()) {
    throw DimensionError("pool query " + shape_string(query.shape()) + " does not match keys " +
                         shape_string(keys.shape()));
  }
  PoolResult r;
  r.weights = softmax(matmul(keys, transpose(query)), 0);
  r.pooled = matmul(transpose(r.weights), keys);
  return r;
}

const char* to_string(FusionKind kind) {
  switch (kind) {
    case FusionKind::kEncoder: return "encoder";
    case FusionKind::kConcat: return "concat";
    case FusionKind::kSum: return "sum";
    case FusionKind::kMint: return "mint";
    case FusionKind::kIdentity: return "identity";
  }
  return "?";
}

FusionKind fusion_kind_from_string(const std::string& s) {
  for (auto k : {FusionKind::kEncoder, FusionKind::kConcat, FusionKind::kSum, FusionKind::kMint,
                 FusionKind::kIdentity}) {
    if (s == to_string(k)) return k;
  }
  throw ConfigError("unknown fusion kind '" + s + "'");
}

namespace {

std::size_t active_count(const ctx::ContextMask& m) { return int(m.local) + int(m.doc) + int(m.global); }

// Row 0 and the pooled summary of one context output.
struct Portal {
  Tensor head, summary;
};

Portal portal_of(const Tensor& x) {
  Portal p;
  p.head = slice_rows(x, 0, 1);
  // A context with no rows besides its portal (empty global subgraph) summarizes to the portal itself.
  p.summary = x.rows() > 1 ? attentive_pool(p.head, slice_rows(x, 1, x.rows())).pooled : p.head;
  return p;
}

}  // namespace

ContextFusion::ContextFusion(std::size_t d_model, std::size_t n_heads, std::size_t ffn_mult, FusionKind kind,
                             ctx::ContextMask active, std::uint64_t dropout_seed, Rng& rng)
    : d_model_(d_model), kind_(kind), active_(active) {
  const std::size_t a = active_count(active);
  if (a == 0) throw ConfigError("fusion needs at least one active context");
  switch (kind) {
    case FusionKind::kEncoder:
      encoder_ = EncoderBlock(d_model, n_heads, ffn_mult, dropout_seed, rng);
      break;
    case FusionKind::kConcat:
      post_ = Linear(2 * a * d_model, a * d_model, rng);
      break;
    case FusionKind::kSum:
      post_ = Linear(d_model, d_model, rng);
      break;
    case FusionKind::kMint:
      if (!active.local || !active.global) throw ConfigError("mint fusion needs the local and global contexts");
      encoder_ = EncoderBlock(d_model, n_heads, ffn_mult, dropout_seed, rng);
      break;
    case FusionKind::kIdentity:
      break;
  }
}

FusionOutput ContextFusion::forward(const FusionInputs& in, const Mode& mode) const {
  std::vector<const Tensor*> ctx_in;
  if (active_.local) ctx_in.push_back(&in.local);
  if (active_.doc) ctx_in.push_back(&in.doc);
  if (active_.global) ctx_in.push_back(&in.global);
  for (const Tensor* t : ctx_in) {
    if (!t->defined() || t->rank() != 2 || t->cols() != d_model_) {
      throw DimensionError("fusion input must be ?x" + std::to_string(d_model_));
    }
  }
  const std::size_t a = ctx_in.size();

  std::vector<Tensor> fused(a);
  FusionOutput out;
  switch (kind_) {
    case FusionKind::kIdentity:
      for (std::size_t i = 0; i < a; ++i) fused[i] = slice_rows(*ctx_in[i], 0, 1);
      break;
    case FusionKind::kEncoder:
    case FusionKind::kConcat: {
      std::vector<Tensor> seq(2 * a);
      for (std::size_t i = 0; i < a; ++i) {
        auto p = portal_of(*ctx_in[i]);
        seq[i] = p.head;
        seq[a + i] = p.summary;
      }
      if (kind_ == FusionKind::kEncoder) {
        auto enc = encoder_.forward(concat_rows(seq), mode);
        out.attention = std::move(enc.attention);
        const Tensor y = tanh(enc.y);
        for (std::size_t i = 0; i < a; ++i) fused[i] = slice_rows(y, i, i + 1);
      } else {
        const Tensor y = tanh(post_(concat_cols(seq)));
        for (std::size_t i = 0; i < a; ++i) fused[i] = slice_cols(y, i * d_model_, (i + 1) * d_model_);
      }
      break;
    }
    case FusionKind::kSum: {
      Tensor total = slice_rows(*ctx_in[0], 0, 1);
      for (std::size_t i = 1; i < a; ++i) total = total + slice_rows(*ctx_in[i], 0, 1);
      const Tensor y = post_(total);
      for (auto& f : fused) f = y;
      break;
    }
    case FusionKind::kMint: {
      const Tensor pair[] = {slice_rows(in.local, 0, 1), slice_rows(in.global, 0, 1)};
      auto enc = encoder_.forward(concat_rows(pair), mode);
      out.attention = std::move(enc.attention);
      const Tensor y = tanh(enc.y);
      std::size_t i = 0;
      fused[i++] = slice_rows(y, 0, 1);
      if (active_.doc) fused[i++] = slice_rows(in.doc, 0, 1);
      fused[i] = slice_rows(y, 1, 2);
      break;
    }
  }

  std::size_t i = 0;
  if (active_.local) out.local_portal = fused[i++];
  if (active_.doc) out.doc_portal = fused[i++];
  if (active_.global) out.global_portal = fused[i++];
  return out;
}

void ContextFusion::collect(ParameterList& out, const std::string& prefix, int layer) const {
  switch (kind_) {
    case FusionKind::kEncoder:
    case FusionKind::kMint:
      encoder_.collect(out, prefix + ".encoder", layer);
      break;
    case FusionKind::kConcat:
    case FusionKind::kSum:
      post_.collect(out, prefix + ".post", layer);
      break;
    case FusionKind::kIdentity:
      break;
  }
}

}  // namespace kalm::layers
