#include "kalm/model/metrics.hpp"

#include "kalm/errors.hpp"
#include "kalm/text.hpp"

namespace kalm::model {

Metrics compute_metrics(const std::vector<std::vector<std::size_t>>& confusion) {
  const std::size_t c = confusion.size();
  if (c == 0) throw InputError("empty confusion matrix");
  Metrics m;
  m.confusion = confusion;
  std::vector<double> support(c, 0), predicted(c, 0);
  double total = 0, correct = 0;
  for (std::size_t t = 0; t < c; ++t) {
    if (confusion[t].size() != c) throw DimensionError("confusion matrix must be square");
    for (std::size_t p = 0; p < c; ++p) {
      support[t] += double(confusion[t][p]);
      predicted[p] += double(confusion[t][p]);
      total += double(confusion[t][p]);
    }
    correct += double(confusion[t][t]);
  }
  if (total == 0) throw InputError("no predictions to score");
  double sum_recall = 0, sum_precision = 0, sum_f1 = 0;
  for (std::size_t k = 0; k < c; ++k) {
    const double tp = double(confusion[k][k]);
    double recall = 0, precision = 0;
    if (support[k] > 0) {
      recall = tp / support[k];
    } else {
      m.warnings.push_back("class " + std::to_string(k) + " is absent from the split; recall set to 0");
    }
    if (predicted[k] > 0) precision = tp / predicted[k];
    const double f1 = precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
    sum_recall += recall;
    sum_precision += precision;
    sum_f1 += f1;
  }
  m.acc = correct / total;
  m.micro_f1 = m.acc;
  m.balanced_acc = sum_recall / double(c);
  m.macro_recall = m.balanced_acc;
  m.macro_precision = sum_precision / double(c);
  m.macro_f1 = sum_f1 / double(c);
  return m;
}

Metrics compute_metrics(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& predicted,
                        std::size_t n_classes) {
  if (truth.size() != predicted.size()) throw DimensionError("truth and prediction counts differ");
  std::vector<std::vector<std::size_t>> confusion(n_classes, std::vector<std::size_t>(n_classes, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= n_classes || predicted[i] >= n_classes) throw InputError("label outside the class range");
    ++confusion[truth[i]][predicted[i]];
  }
  return compute_metrics(confusion);
}

std::string metrics_csv_fields(const Metrics& m) {
  std::string out;
  for (double v : {m.acc, m.balanced_acc, m.macro_f1, m.micro_f1, m.macro_precision, m.macro_recall}) {
    if (!out.empty()) out += ',';
    out += format_number(v);
  }
  return out;
}

}  // namespace kalm::model
