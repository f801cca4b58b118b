#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "kalm/contexts/document.hpp"
#include "kalm/contexts/embedder.hpp"
#include "kalm/kg/embedding.hpp"
#include "kalm/kg/knowledge_graph.hpp"
#include "kalm/model/config.hpp"
#include "kalm/model/metrics.hpp"
#include "kalm/model/trainer.hpp"

namespace kalm::insight {

/// Everything a training run reads. Nothing here is modified.
struct Workspace {
  const std::vector<ctx::DocumentRecord>& docs;
  const kg::KnowledgeGraph& kg;
  const kg::EmbeddingTable& kge;
  const ctx::PrecomputedEmbeddings* precomputed = nullptr;
  std::size_t threads = 1;
};

struct RunOutcome {
  model::TrainResult result;
  model::SplitIndices split;
  std::size_t global_subgraphs_built = 0;
};

/// Builds bundles for the config's variant, splits, trains a fresh model.
RunOutcome run_variant(const Workspace& ws, const model::TrainConfig& config);

/// Class-stratified subset of `train`: per class, a seeded permutation
/// truncated to round(fraction * count). Subsets for growing fractions are
/// nested. Throws ConfigError if a class ends up empty or fraction is outside (0, 1].
std::vector<std::size_t> subsample_train(const std::vector<std::size_t>& train, const std::vector<std::size_t>& labels,
                                         double fraction, std::uint64_t seed);

struct SweepRow {
  double fraction = 0.0;
  std::size_t train_size = 0;
  model::Metrics test;
};

/// One model per fraction (sorted ascending, duplicates rejected), same
/// split, validation and test sets throughout.
std::vector<SweepRow> efficiency_sweep(const Workspace& ws, const model::TrainConfig& config,
                                       std::vector<double> fractions);

/// Test metrics of always predicting the most frequent training label
/// (lowest label on ties).
model::Metrics majority_baseline(const std::vector<std::size_t>& labels, const model::SplitIndices& split,
                                 std::size_t n_classes);

/// Header `fraction,train_size,acc,bacc,maf,mif,map,mar`.
std::string sweep_csv(const std::vector<SweepRow>& rows);

struct AblationRow {
  std::string variant;
  std::size_t best_epoch = 0;
  model::Metrics test;
  std::size_t global_subgraphs_built = 0;
};

/// Trains each variant with otherwise identical config and data.
std::vector<AblationRow> ablation_suite(const Workspace& ws, const model::TrainConfig& config,
                                        const std::vector<std::string>& variants = model::variant_names());

/// Header `variant,best_epoch,acc,bacc,maf,mif,map,mar`.
std::string ablation_csv(const std::vector<AblationRow>& rows);

}  // namespace kalm::insight
