#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace kalm::model {

struct Metrics {
  double acc = 0, balanced_acc = 0, macro_f1 = 0, micro_f1 = 0, macro_precision = 0, macro_recall = 0;
  /// confusion[true][predicted]
  std::vector<std::vector<std::size_t>> confusion;
  std::vector<std::string> warnings;
};

/// All metrics follow from the confusion matrix. Classes absent from the
/// split get recall 0 (with a warning); classes never predicted get precision 0.
Metrics compute_metrics(const std::vector<std::vector<std::size_t>>& confusion);
Metrics compute_metrics(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& predicted,
                        std::size_t n_classes);

/// Comma-separated acc,bacc,maf,mif,map,mar with shortest round-trip formatting.
std::string metrics_csv_fields(const Metrics& m);

}  // namespace kalm::model
