#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "kalm/contexts/bundle.hpp"
#include "kalm/layers/kalm_layer.hpp"
#include "kalm/model/kalm_model.hpp"

namespace kalm::insight {

inline constexpr std::size_t kFusionSlots = 6;
using FusionMatrix = std::array<std::array<double, kFusionSlots>, kFusionSlots>;

/// Mean absolute fusion attention per KALM layer. Rows are queries, columns
/// keys, both labelled by layers::kFusionPositions. Positions a variant does
/// not have stay zero.
struct AttentionReport {
  std::vector<FusionMatrix> layers;
  std::size_t documents = 0;
};

enum class AverageOrder { kHeadsThenDocuments, kDocumentsThenHeads };

/// Slot in [0, 6) of each fusion position the variant produces.
/// Throws ConfigError for fusion kinds without attention.
std::vector<std::size_t> fusion_slots(const model::Variant& variant);

/// Averages |weight| over heads and documents. `traces[doc][layer]`.
AttentionReport aggregate_attention(const std::vector<std::vector<layers::LayerTrace>>& traces,
                                    const model::Variant& variant,
                                    AverageOrder order = AverageOrder::kHeadsThenDocuments);

/// Evaluates bundles[indices] with capture on. Requires config().capture_attention.
AttentionReport attention_report(const model::KalmModel& model, const std::vector<ctx::ContextBundle>& bundles,
                                 const std::vector<std::size_t>& indices, std::size_t threads = 1);

/// Header `layer,query,t_L,g_L,k_L,t_G,g_G,k_G`; one row per layer and query slot.
std::string attention_csv(const AttentionReport& report);

}  // namespace kalm::insight
