#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace kalm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;

/// Runs one `kalm` command. Normal output goes to `out`; a failure writes a
/// single line `error=<kind> message=<quoted text>` to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// File names written into the output directory.
namespace files {
inline constexpr const char* kCorpus = "corpus.jsonl";
inline constexpr const char* kTriples = "kg_triples.tsv";
inline constexpr const char* kDescriptions = "kg_descriptions.tsv";
inline constexpr const char* kConfig = "config.txt";
inline constexpr const char* kEmbeddings = "kge";
inline constexpr const char* kBundles = "bundles.tsv";
inline constexpr const char* kCheckpoint = "checkpoint";
inline constexpr const char* kTrainLog = "train_log.csv";
inline constexpr const char* kTestMetrics = "test_metrics.csv";
inline constexpr const char* kEvalMetrics = "eval_metrics.csv";
inline constexpr const char* kAttention = "attention.csv";
inline constexpr const char* kErrorGrid = "error_grid.csv";
inline constexpr const char* kAblation = "ablation.csv";
inline constexpr const char* kSweep = "sweep.csv";
inline constexpr const char* kBaseline = "majority_baseline.csv";
}  // namespace files

}  // namespace kalm::cli
