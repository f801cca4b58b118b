#include "kalm/contexts/bundle.hpp"

#include <algorithm>
#include <cstring>

#include "kalm/errors.hpp"
#include "kalm/num/ops.hpp"
#include "kalm/num/random.hpp"

namespace kalm::ctx {

namespace {

num::Tensor fallback_block(const DocumentRecord& doc, const kg::KnowledgeGraph& kg, bool augmented,
                           const BundleOptions& options, std::vector<std::string>& warnings) {
  const std::size_t n = doc.paragraphs.size();
  std::vector<double> data;
  data.reserve(n * options.d_embed);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = doc.paragraphs[i];
    const auto tokens = augmented ? augment_paragraph(p.tokens, p.mentions, kg) : p.tokens;
    if (tokens.empty()) {
      warnings.push_back("document " + doc.doc_id + " paragraph " + std::to_string(i) +
                         (augmented ? " (augmented)" : "") + " is empty; using a zero embedding");
    }
    auto v = embed_paragraph(tokens, options.d_embed, options.embed_seed);
    data.insert(data.end(), v.begin(), v.end());
  }
  return num::Tensor::from({n, options.d_embed}, std::move(data));
}

num::Tensor paragraph_block(const DocumentRecord& doc, const kg::KnowledgeGraph& kg, bool augmented,
                            const BundleOptions& options, std::vector<std::string>& warnings) {
  if (options.precomputed) {
    const auto key = augmented ? doc.doc_id : PrecomputedEmbeddings::raw_key(doc.doc_id);
    if (const auto* block = options.precomputed->find(key)) {
      if (block->cols() != options.d_embed) {
        throw ConfigError("precomputed embeddings have width " + std::to_string(block->cols()) + " but d_embed is " +
                          std::to_string(options.d_embed));
      }
      if (block->rows() != doc.paragraphs.size()) {
        throw InputError("precomputed block " + key + " has " + std::to_string(block->rows()) + " rows for " +
                         std::to_string(doc.paragraphs.size()) + " paragraphs");
      }
      return *block;
    }
  }
  return fallback_block(doc, kg, augmented, options, warnings);
}

}  // namespace

ContextBundle build_bundle(const DocumentRecord& doc, const kg::KnowledgeGraph& kg, const kg::EmbeddingTable& kge,
                           const BundleOptions& options) {
  validate(doc, kg);
  if (options.d_embed == 0) throw ConfigError("d_embed must be positive");
  ContextBundle b;
  b.doc_id = doc.doc_id;
  b.label = doc.label;
  b.paragraph_count = doc.paragraphs.size();
  b.mention_count = doc.mentioned_entities().size();
  b.contexts = options.contexts;

  if (options.contexts.local) b.local_features = paragraph_block(doc, kg, true, options, b.warnings);
  if (options.contexts.doc) {
    b.doc_features = paragraph_block(doc, kg, false, options, b.warnings);
    b.doc_graph = build_document_graph(doc);
    for (const auto& e : b.doc_graph.edges) {
      if (e.type.kind == EdgeType::Kind::kEntity) b.edge_entities.push_back(e.type.id);
    }
    std::sort(b.edge_entities.begin(), b.edge_entities.end());
    b.edge_entities.erase(std::unique(b.edge_entities.begin(), b.edge_entities.end()), b.edge_entities.end());
    if (!b.edge_entities.empty()) b.edge_entity_features = kge.entity_rows(b.edge_entities);
  }
  if (options.contexts.global) {
    b.global = build_global_subgraph(doc, kg, options.k_hops);
    b.warnings.insert(b.warnings.end(), b.global.warnings.begin(), b.global.warnings.end());
    if (!b.global.entities.empty()) b.global_features = kge.entity_rows(b.global.entities);
  }
  return b;
}

std::uint64_t bundle_digest(const ContextBundle& b) {
  std::uint64_t h = num::hash_string(b.doc_id, b.label);
  auto mix_tensor = [&h](const num::Tensor& t) {
    if (!t.defined()) {
      h = num::mix64(h, 0x5eed);
      return;
    }
    for (double v : t.data()) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      h = num::mix64(h, bits);
    }
  };
  auto mix_edges = [&h](const std::vector<Edge>& edges) {
    for (const auto& e : edges) {
      h = num::mix64(h, e.target);
      h = num::mix64(h, e.source);
      h = num::mix64(h, (static_cast<std::uint64_t>(e.type.kind) << 32) | e.type.id);
    }
  };
  mix_tensor(b.local_features);
  mix_tensor(b.doc_features);
  mix_edges(b.doc_graph.edges);
  mix_tensor(b.edge_entity_features);
  for (auto e : b.global.entities) h = num::mix64(h, e);
  mix_edges(b.global.edges);
  mix_tensor(b.global_features);
  return h;
}

InputProjection::InputProjection(std::size_t d_embed, std::size_t kge_dim, std::size_t d_model, num::Rng& rng)
    : d_embed_(d_embed),
      kge_dim_(kge_dim),
      d_model_(d_model),
      fusion_local_(num::small_normal(1, d_model, rng)),
      fusion_doc_(num::small_normal(1, d_model, rng)),
      fusion_global_(num::small_normal(1, d_model, rng)),
      local_proj_(d_embed, d_model, rng),
      doc_proj_(d_embed, d_model, rng),
      global_proj_(kge_dim, d_model, rng) {}

InitialFeatures InputProjection::project(const ContextBundle& bundle) const {
  InitialFeatures f;
  auto stack = [](const num::Tensor& fusion, const num::Tensor& rows) {
    const num::Tensor parts[] = {fusion, rows};
    return num::concat_rows(parts);
  };
  if (bundle.contexts.local) {
    if (bundle.local_features.cols() != d_embed_) throw ConfigError("local features do not match d_embed");
    f.local = stack(fusion_local_, local_proj_(bundle.local_features));
  }
  if (bundle.contexts.doc) {
    if (bundle.doc_features.cols() != d_embed_) throw ConfigError("document features do not match d_embed");
    f.doc = stack(fusion_doc_, doc_proj_(bundle.doc_features));
  }
  if (bundle.contexts.global) {
    if (bundle.global_features.defined()) {
      if (bundle.global_features.cols() != kge_dim_) throw ConfigError("KG embeddings do not match kge_dim");
      f.global = stack(fusion_global_, global_proj_(bundle.global_features));
    } else {
      f.global = fusion_global_;
    }
  }
  return f;
}

void InputProjection::collect(num::ParameterList& out) const {
  out.push_back({"input.fusion_local", -1, fusion_local_});
  out.push_back({"input.fusion_doc", -1, fusion_doc_});
  out.push_back({"input.fusion_global", -1, fusion_global_});
  local_proj_.collect(out, "input.local_proj", -1);
  doc_proj_.collect(out, "input.doc_proj", -1);
  global_proj_.collect(out, "input.global_proj", -1);
}

}  // namespace kalm::ctx
