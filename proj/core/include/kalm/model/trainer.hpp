#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "kalm/contexts/bundle.hpp"
#include "kalm/kg/embedding.hpp"
#include "kalm/model/kalm_model.hpp"
#include "kalm/model/metrics.hpp"

namespace kalm::model {

/// Document indices of a train/validation/test partition, each ascending.
struct SplitIndices {
  std::vector<std::size_t> train, val, test;
};

/// Seeded 70/15/15 split, stratified by label. Throws ConfigError if any part is empty.
SplitIndices split_corpus(const std::vector<ctx::DocumentRecord>& docs, std::uint64_t seed);

/// Builds every bundle; with threads > 1 documents are built concurrently and kept in input order.
std::vector<ctx::ContextBundle> build_bundles(const std::vector<ctx::DocumentRecord>& docs,
                                              const kg::KnowledgeGraph& kg, const kg::EmbeddingTable& kge,
                                              const ctx::BundleOptions& options, std::size_t threads = 1);

/// Worker count from KALM_THREADS (default 1).
std::size_t threads_from_env();

struct Evaluation {
  Metrics metrics;
  double loss = 0.0;
  std::vector<std::size_t> predictions;  // aligned with the evaluated indices
  std::vector<std::vector<layers::LayerTrace>> traces;  // per document when captured
};

/// Eval-mode pass over bundles[indices]; results do not depend on `threads`.
Evaluation evaluate(const KalmModel& model, const std::vector<ctx::ContextBundle>& bundles,
                    const std::vector<std::size_t>& indices, std::size_t threads = 1, bool capture = false);

struct EpochRecord {
  std::size_t epoch = 0;
  std::string split;  // train | val | test
  double loss = 0.0;
  Metrics metrics;
};

struct TrainOptions {
  std::size_t threads = 1;
  /// Table whose rows must stay bit-identical during training; checked after every step.
  const kg::EmbeddingTable* frozen = nullptr;
  /// When set, the log is rewritten after each epoch.
  std::optional<std::filesystem::path> log_path;
  /// When set, the best checkpoint is saved here.
  std::optional<std::filesystem::path> checkpoint_dir;
  std::function<void(const EpochRecord&)> on_record;
};

struct TrainResult {
  std::vector<EpochRecord> log;
  std::vector<double> epoch_losses;  // mean training objective per epoch
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  std::size_t steps = 0;
  double max_train_acc = 0.0;
  Metrics best_val;
  Metrics test;
};

/// Minibatch training with gradient accumulation, global-norm clipping, RAdam
/// and early stopping on validation macro-F1, where a tie with the best so
/// far counts as a new best. On return the model holds the
/// best-validation parameters rounded to float32 (exactly what a checkpoint
/// stores), and `test` is measured with them.
TrainResult train(KalmModel& model, const std::vector<ctx::ContextBundle>& bundles, const SplitIndices& split,
                  const TrainOptions& options = {});

inline constexpr const char* kLogHeader = "epoch,split,loss,acc,bacc,maf,mif,map,mar";
std::string format_log(const std::vector<EpochRecord>& log);

/// Checkpoint directory with the parameters and a config.txt snapshot.
void save_model(const KalmModel& model, const std::filesystem::path& dir);
KalmModel load_model(const std::filesystem::path& dir, const kg::EmbeddingTable& kge);
TrainConfig load_model_config(const std::filesystem::path& dir);
/// Restores the saved parameters into a model built from `config`, whose
/// architecture keys must match the saved ones.
KalmModel load_model(const std::filesystem::path& dir, const kg::EmbeddingTable& kge, const TrainConfig& config);

/// Order-sensitive digest of an embedding table's values.
std::uint64_t table_checksum(const kg::EmbeddingTable& table);

}  // namespace kalm::model
