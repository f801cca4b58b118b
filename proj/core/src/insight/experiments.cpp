#include "kalm/insight/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "kalm/contexts/graphs.hpp"
#include "kalm/errors.hpp"
#include "kalm/num/random.hpp"
#include "kalm/text.hpp"

namespace kalm::insight {

namespace {

std::vector<std::size_t> labels_of(const std::vector<ctx::DocumentRecord>& docs) {
  std::vector<std::size_t> labels(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) labels[i] = docs[i].label;
  return labels;
}

model::TrainOptions options_for(const Workspace& ws) {
  model::TrainOptions o;
  o.threads = ws.threads;
  o.frozen = &ws.kge;
  return o;
}

}  // namespace

RunOutcome run_variant(const Workspace& ws, const model::TrainConfig& config) {
  model::validate(config);
  RunOutcome out;
  const std::size_t before = ctx::global_subgraph_builds();
  const auto bundles =
      model::build_bundles(ws.docs, ws.kg, ws.kge, model::bundle_options(config, ws.precomputed), ws.threads);
  out.global_subgraphs_built = ctx::global_subgraph_builds() - before;
  out.split = model::split_corpus(ws.docs, config.seed);
  model::KalmModel m(config, ws.kge);
  out.result = model::train(m, bundles, out.split, options_for(ws));
  return out;
}

std::vector<std::size_t> subsample_train(const std::vector<std::size_t>& train, const std::vector<std::size_t>& labels,
                                         double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ConfigError("fraction " + format_number(fraction) + " is outside (0, 1]");
  }
  std::map<std::size_t, std::vector<std::size_t>> by_label;
  for (std::size_t i : train) by_label[labels.at(i)].push_back(i);
  num::Rng rng(num::mix64(seed, 0x7375627361));
  std::vector<std::size_t> out;
  for (auto& [label, ids] : by_label) {
    rng.shuffle(ids);
    const auto keep = static_cast<std::size_t>(std::llround(fraction * double(ids.size())));
    if (keep == 0) {
      throw ConfigError("fraction " + format_number(fraction) + " leaves class " + std::to_string(label) +
                        " without training documents");
    }
    out.insert(out.end(), ids.begin(), ids.begin() + std::ptrdiff_t(keep));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<SweepRow> efficiency_sweep(const Workspace& ws, const model::TrainConfig& config,
                                       std::vector<double> fractions) {
  model::validate(config);
  if (fractions.empty()) throw ConfigError("efficiency sweep needs at least one fraction");
  std::sort(fractions.begin(), fractions.end());
  if (std::adjacent_find(fractions.begin(), fractions.end()) != fractions.end()) {
    throw ConfigError("efficiency sweep fractions must be distinct");
  }
  const auto labels = labels_of(ws.docs);
  const auto split = model::split_corpus(ws.docs, config.seed);
  // Validate every fraction before spending time on training.
  std::vector<std::vector<std::size_t>> subsets;
  for (double f : fractions) subsets.push_back(subsample_train(split.train, labels, f, config.seed));

  const auto bundles =
      model::build_bundles(ws.docs, ws.kg, ws.kge, model::bundle_options(config, ws.precomputed), ws.threads);
  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    model::SplitIndices sub = split;
    sub.train = subsets[i];
    model::KalmModel m(config, ws.kge);
    const auto r = model::train(m, bundles, sub, options_for(ws));
    rows.push_back({fractions[i], sub.train.size(), r.test});
  }
  return rows;
}

model::Metrics majority_baseline(const std::vector<std::size_t>& labels, const model::SplitIndices& split,
                                 std::size_t n_classes) {
  std::vector<std::size_t> counts(n_classes, 0);
  for (std::size_t i : split.train) ++counts.at(labels.at(i));
  const auto majority = std::size_t(std::max_element(counts.begin(), counts.end()) - counts.begin());
  std::vector<std::size_t> truth, predicted;
  for (std::size_t i : split.test) {
    truth.push_back(labels.at(i));
    predicted.push_back(majority);
  }
  return model::compute_metrics(truth, predicted, n_classes);
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "fraction,train_size,acc,bacc,maf,mif,map,mar\n";
  for (const auto& r : rows) {
    out += format_number(r.fraction) + ',' + std::to_string(r.train_size) + ',' + model::metrics_csv_fields(r.test) +
           '\n';
  }
  return out;
}

std::vector<AblationRow> ablation_suite(const Workspace& ws, const model::TrainConfig& config,
                                        const std::vector<std::string>& variants) {
  for (const auto& v : variants) model::variant_from_name(v);
  std::vector<AblationRow> rows;
  for (const auto& v : variants) {
    auto c = config;
    c.variant = v;
    const auto run = run_variant(ws, c);
    rows.push_back({v, run.result.best_epoch, run.result.test, run.global_subgraphs_built});
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "variant,best_epoch,acc,bacc,maf,mif,map,mar\n";
  for (const auto& r : rows) {
    out += r.variant + ',' + std::to_string(r.best_epoch) + ',' + model::metrics_csv_fields(r.test) + '\n';
  }
  return out;
}

}  // namespace kalm::insight
