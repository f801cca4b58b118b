#include "kalm/insight/attention.hpp"

#include <cmath>

#include "kalm/errors.hpp"
#include "kalm/model/trainer.hpp"
#include "kalm/text.hpp"

namespace kalm::insight {

using layers::FusionKind;

std::vector<std::size_t> fusion_slots(const model::Variant& v) {
  if (v.fusion == FusionKind::kMint) return {0, 2};
  if (v.fusion != FusionKind::kEncoder) {
    throw ConfigError(std::string("fusion kind '") + layers::to_string(v.fusion) + "' has no attention to report");
  }
  std::vector<std::size_t> slots;
  const bool on[3] = {v.contexts.local, v.contexts.doc, v.contexts.global};
  for (std::size_t half : {0u, 3u}) {
    for (std::size_t c = 0; c < 3; ++c) {
      if (on[c]) slots.push_back(half + c);
    }
  }
  return slots;
}

namespace {

FusionMatrix zero_matrix() {
  FusionMatrix m{};
  for (auto& row : m) row.fill(0.0);
  return m;
}

// |A| of one head, placed into the six-slot frame.
FusionMatrix embed_abs(const num::Tensor& head, const std::vector<std::size_t>& slots) {
  if (head.rows() != slots.size() || head.cols() != slots.size()) {
    throw DimensionError("fusion attention is " + std::to_string(head.rows()) + "x" + std::to_string(head.cols()) +
                         ", expected " + std::to_string(slots.size()) + " positions");
  }
  FusionMatrix m = zero_matrix();
  for (std::size_t r = 0; r < slots.size(); ++r) {
    for (std::size_t c = 0; c < slots.size(); ++c) m[slots[r]][slots[c]] = std::fabs(head.at(r, c));
  }
  return m;
}

void accumulate(FusionMatrix& into, const FusionMatrix& m, double scale) {
  for (std::size_t r = 0; r < kFusionSlots; ++r) {
    for (std::size_t c = 0; c < kFusionSlots; ++c) into[r][c] += scale * m[r][c];
  }
}

}  // namespace

AttentionReport aggregate_attention(const std::vector<std::vector<layers::LayerTrace>>& traces,
                                    const model::Variant& variant, AverageOrder order) {
  if (traces.empty()) throw ConfigError("no captured attention to aggregate");
  const auto slots = fusion_slots(variant);
  const std::size_t n_docs = traces.size();
  const std::size_t n_layers = traces.front().size();
  AttentionReport report;
  report.documents = n_docs;
  report.layers.assign(n_layers, zero_matrix());

  for (std::size_t l = 0; l < n_layers; ++l) {
    std::size_t n_heads = 0;
    for (const auto& doc : traces) {
      if (doc.size() != n_layers) throw StructuralError("documents captured different layer counts");
      if (doc[l].fusion.empty()) throw ConfigError("layer " + std::to_string(l) + " captured no fusion attention");
      if (n_heads == 0) n_heads = doc[l].fusion.size();
      if (doc[l].fusion.size() != n_heads) throw StructuralError("documents captured different head counts");
    }
    auto& out = report.layers[l];
    if (order == AverageOrder::kHeadsThenDocuments) {
      for (const auto& doc : traces) {
        FusionMatrix per_doc = zero_matrix();
        for (const auto& head : doc[l].fusion) accumulate(per_doc, embed_abs(head, slots), 1.0 / double(n_heads));
        accumulate(out, per_doc, 1.0 / double(n_docs));
      }
    } else {
      for (std::size_t h = 0; h < n_heads; ++h) {
        FusionMatrix per_head = zero_matrix();
        for (const auto& doc : traces) accumulate(per_head, embed_abs(doc[l].fusion[h], slots), 1.0 / double(n_docs));
        accumulate(out, per_head, 1.0 / double(n_heads));
      }
    }
  }
  return report;
}

AttentionReport attention_report(const model::KalmModel& model, const std::vector<ctx::ContextBundle>& bundles,
                                 const std::vector<std::size_t>& indices, std::size_t threads) {
  if (!model.config().capture_attention) {
    throw ConfigError("attention capture is disabled; set capture_attention=true");
  }
  const auto ev = model::evaluate(model, bundles, indices, threads, true);
  return aggregate_attention(ev.traces, model.variant());
}

std::string attention_csv(const AttentionReport& report) {
  std::string out = "layer,query";
  for (const char* label : layers::kFusionPositions) out += std::string(",") + label;
  out += '\n';
  for (std::size_t l = 0; l < report.layers.size(); ++l) {
    for (std::size_t r = 0; r < kFusionSlots; ++r) {
      out += std::to_string(l) + ',' + layers::kFusionPositions[r];
      for (double v : report.layers[l][r]) out += ',' + format_number(v);
      out += '\n';
    }
  }
  return out;
}

}  // namespace kalm::insight
