#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "kalm/contexts/graphs.hpp"
#include "kalm/contexts/synthetic.hpp"
#include "kalm/errors.hpp"
#include "kalm/insight/attention.hpp"
#include "kalm/insight/error_grid.hpp"
#include "kalm/insight/experiments.hpp"
#include "kalm/model/trainer.hpp"
#include "support/support.hpp"

using namespace kalm;
using namespace kalm::insight;
using kalm::num::Rng;
using kalm::num::Tensor;

namespace {

model::TrainConfig tiny_config() {
  model::TrainConfig c;
  c.d_model = 8;
  c.n_heads = 2;
  c.ffn_mult = 2;
  c.kge_dim = 4;
  c.d_embed = 8;
  c.max_epochs = 3;
  c.patience = 3;
  return c;
}

struct Toy {
  ctx::SyntheticCorpus corpus;
  kg::EmbeddingTable kge;
  Workspace workspace() const { return {corpus.docs, corpus.kg, kge}; }
};

Toy make_toy(const model::TrainConfig& config, std::size_t n_docs = 40, std::uint64_t seed = 1) {
  Toy t;
  t.corpus = ctx::generate_synthetic_corpus({.seed = seed, .n_docs = n_docs, .kg_size = 60, .n_classes = 2});
  t.kge = kg::train_transe(t.corpus.kg, {.dim = config.kge_dim, .epochs = 5, .seed = 3});
  return t;
}

// Row-stochastic n×n matrix with positive entries.
Tensor stochastic(std::size_t n, Rng& rng) {
  std::vector<double> v(n * n);
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0;
    for (std::size_t c = 0; c < n; ++c) s += v[r * n + c] = std::exp(rng.normal());
    for (std::size_t c = 0; c < n; ++c) v[r * n + c] /= s;
  }
  return Tensor::from({n, n}, std::move(v));
}

std::vector<std::vector<layers::LayerTrace>> random_traces(std::size_t docs, std::size_t n_layers, std::size_t heads,
                                                           std::size_t positions, Rng& rng) {
  std::vector<std::vector<layers::LayerTrace>> traces(docs, std::vector<layers::LayerTrace>(n_layers));
  for (auto& doc : traces) {
    for (auto& layer : doc) {
      for (std::size_t h = 0; h < heads; ++h) layer.fusion.push_back(stochastic(positions, rng));
    }
  }
  return traces;
}

double max_diff(const AttentionReport& a, const AttentionReport& b) {
  double m = 0;
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    for (std::size_t r = 0; r < kFusionSlots; ++r) {
      for (std::size_t c = 0; c < kFusionSlots; ++c) m = std::max(m, std::fabs(a.layers[l][r][c] - b.layers[l][r][c]));
    }
  }
  return m;
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

}  // namespace

TEST(Attention, SingleDocumentSingleHeadIsItsAbsoluteAttention) {
  Rng rng(4);
  const auto traces = random_traces(1, 1, 1, 6, rng);
  const auto report = aggregate_attention(traces, model::variant_from_name("full"));
  ASSERT_EQ(report.layers.size(), 1u);
  EXPECT_EQ(report.documents, 1u);
  const auto& head = traces[0][0].fusion[0];
  for (std::size_t r = 0; r < 6; ++r) {
    for (std::size_t c = 0; c < 6; ++c) {
      EXPECT_EQ(report.layers[0][r][c], std::fabs(head.at(r, c)));
      EXPECT_GE(report.layers[0][r][c], 0.0);
      EXPECT_LE(report.layers[0][r][c], 1.0);
    }
  }
}

TEST(Attention, AveragingOrderDoesNotMatter) {
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const auto traces = random_traces(7, 2, 4, 6, rng);
    const auto v = model::variant_from_name("full");
    const auto a = aggregate_attention(traces, v, AverageOrder::kHeadsThenDocuments);
    const auto b = aggregate_attention(traces, v, AverageOrder::kDocumentsThenHeads);
    EXPECT_LT(max_diff(a, b), 1e-12);
  }
}

TEST(Attention, RemovedContextLeavesItsSlotsEmpty) {
  Rng rng(2);
  const auto v = model::variant_from_name("no_global");
  EXPECT_EQ(fusion_slots(v), (std::vector<std::size_t>{0, 1, 3, 4}));
  const auto report = aggregate_attention(random_traces(3, 1, 2, 4, rng), v);
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t dead : {2u, 5u}) {
      EXPECT_EQ(report.layers[0][i][dead], 0.0);
      EXPECT_EQ(report.layers[0][dead][i], 0.0);
    }
  }
  EXPECT_EQ(fusion_slots(model::variant_from_name("mint")), (std::vector<std::size_t>{0, 2}));
}

TEST(Attention, MalformedTracesRejected) {
  Rng rng(1);
  EXPECT_THROW(fusion_slots(model::variant_from_name("sum")), ConfigError);
  EXPECT_THROW(fusion_slots(model::variant_from_name("concat")), ConfigError);
  EXPECT_THROW(aggregate_attention({}, model::variant_from_name("full")), ConfigError);
  // Four positions where the full variant expects six.
  EXPECT_THROW(aggregate_attention(random_traces(1, 1, 1, 4, rng), model::variant_from_name("full")), DimensionError);
}

TEST(Attention, CaptureDisabledIsConfigError) {
  auto cfg = tiny_config();
  auto toy = make_toy(cfg, 10);
  const auto bundles = model::build_bundles(toy.corpus.docs, toy.corpus.kg, toy.kge, model::bundle_options(cfg));
  model::KalmModel m(cfg, toy.kge);
  EXPECT_THROW(attention_report(m, bundles, {0, 1}), ConfigError);
}

TEST(Attention, ModelReportIsRowStochasticAndOrderInvariant) {
  auto cfg = tiny_config();
  cfg.capture_attention = true;
  auto toy = make_toy(cfg, 24);
  const auto bundles = model::build_bundles(toy.corpus.docs, toy.corpus.kg, toy.kge, model::bundle_options(cfg));
  model::KalmModel m(cfg, toy.kge);
  auto order = all_indices(bundles.size());
  const auto forward = attention_report(m, bundles, order);
  std::reverse(order.begin(), order.end());
  const auto reversed = attention_report(m, bundles, order);
  Rng rng(5);
  rng.shuffle(order);
  const auto shuffled = attention_report(m, bundles, order, 3);

  ASSERT_EQ(forward.layers.size(), cfg.n_layers);
  EXPECT_EQ(forward.documents, bundles.size());
  EXPECT_LT(max_diff(forward, reversed), 1e-12);
  EXPECT_LT(max_diff(forward, shuffled), 1e-12);
  // Weights are non-negative and row-stochastic, so the mean of |w| keeps rows summing to one.
  for (const auto& layer : forward.layers) {
    for (const auto& row : layer) {
      EXPECT_NEAR(std::accumulate(row.begin(), row.end(), 0.0), 1.0, 1e-12);
    }
  }
}

TEST(Attention, CsvLayout) {
  Rng rng(3);
  const auto report = aggregate_attention(random_traces(2, 2, 2, 6, rng), model::variant_from_name("full"));
  std::istringstream csv(attention_csv(report));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "layer,query,t_L,g_L,k_L,t_G,g_G,k_G");
  std::size_t rows = 0;
  while (std::getline(csv, line)) {
    if (rows == 0) EXPECT_EQ(line.rfind("0,t_L,", 0), 0u) << line;
    if (rows == 11) EXPECT_EQ(line.rfind("1,k_G,", 0), 0u) << line;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 7);
    ++rows;
  }
  EXPECT_EQ(rows, 12u);
}

namespace {

std::vector<GridSample> random_samples(std::size_t n, Rng& rng) {
  std::vector<GridSample> s(n);
  for (auto& x : s) x = {1 + rng.index(15), rng.index(12), rng.uniform() < 0.6};
  return s;
}

std::vector<std::size_t> random_edges(Rng& rng) {
  std::vector<std::size_t> e;
  std::size_t v = 0;
  const std::size_t k = rng.index(4);
  for (std::size_t i = 0; i < k; ++i) e.push_back(v += 1 + rng.index(5));
  return e;
}

double overall_accuracy(const std::vector<GridSample>& s) {
  std::size_t c = 0;
  for (const auto& x : s) c += x.correct;
  return double(c) / double(s.size());
}

}  // namespace

TEST(ErrorGrid, SingleBinEqualsOverallAccuracy) {
  Rng rng(1);
  const auto samples = random_samples(97, rng);
  const auto grid = error_grid(samples, {}, {});
  ASSERT_EQ(grid.bins.size(), 1u);
  EXPECT_EQ(grid.bins[0].support, 97u);
  EXPECT_EQ(grid.bins[0].accuracy, overall_accuracy(samples));
  EXPECT_EQ(grid.bins[0].paragraph_hi, ErrorGrid::kUnbounded);
}

TEST(ErrorGrid, SupportIsConservedAndWeightedMeanIsOverallAccuracy) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const auto samples = random_samples(1 + rng.index(80), rng);
    const auto grid = error_grid(samples, random_edges(rng), random_edges(rng));
    std::size_t support = 0;
    double weighted = 0;
    for (const auto& b : grid.bins) {
      support += b.support;
      weighted += b.accuracy * double(b.support);
      EXPECT_GE(b.accuracy, 0.0);
      EXPECT_LE(b.accuracy, 1.0);
      if (b.support == 0) EXPECT_EQ(b.accuracy, 0.0);
    }
    EXPECT_EQ(support, samples.size());
    EXPECT_NEAR(weighted / double(samples.size()), overall_accuracy(samples), 1e-12);
  }
}

TEST(ErrorGrid, MatchesGroupByOverRawOutcomes) {
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const auto samples = random_samples(120, rng);
    const auto pe = random_edges(rng), me = random_edges(rng);
    const auto grid = error_grid(samples, pe, me);

    // Group by bin bounds found with a linear scan over the edges.
    auto bounds = [](const std::vector<std::size_t>& edges, std::size_t v) {
      std::size_t lo = 0, hi = ErrorGrid::kUnbounded;
      for (std::size_t e : edges) {
        if (v >= e) lo = e;
        else if (hi == ErrorGrid::kUnbounded) hi = e;
      }
      return std::pair{lo, hi};
    };
    std::map<std::array<std::size_t, 4>, std::pair<std::size_t, std::size_t>> groups;
    for (const auto& s : samples) {
      const auto [plo, phi] = bounds(pe, s.paragraphs);
      const auto [mlo, mhi] = bounds(me, s.mentions);
      auto& g = groups[{plo, phi, mlo, mhi}];
      ++g.first;
      g.second += s.correct;
    }
    ASSERT_EQ(grid.bins.size(), (pe.size() + 1) * (me.size() + 1));
    for (const auto& b : grid.bins) {
      const auto it = groups.find({b.paragraph_lo, b.paragraph_hi, b.mention_lo, b.mention_hi});
      const std::size_t support = it == groups.end() ? 0 : it->second.first;
      const std::size_t correct = it == groups.end() ? 0 : it->second.second;
      EXPECT_EQ(b.support, support);
      EXPECT_EQ(b.correct, correct);
    }
  }
}

TEST(ErrorGrid, BinsAreHalfOpen) {
  const std::vector<GridSample> s = {{2, 0, true}, {3, 0, false}, {5, 4, true}, {9, 4, true}};
  const auto g = error_grid(s, {3, 5}, {4});
  EXPECT_EQ(g.at(0, 0).support, 1u);  // paragraphs [0,3)
  EXPECT_EQ(g.at(1, 0).support, 1u);  // [3,5)
  EXPECT_EQ(g.at(2, 1).support, 2u);  // [5,inf) x [4,inf)
  EXPECT_EQ(g.at(1, 1).support, 0u);
  EXPECT_EQ(g.at(1, 0).accuracy, 0.0);
}

TEST(ErrorGrid, NonIncreasingEdgesAreConfigErrors) {
  const std::vector<GridSample> s = {{1, 1, true}};
  EXPECT_THROW(error_grid(s, {3, 3}, {}), ConfigError);
  EXPECT_THROW(error_grid(s, {}, {5, 2}), ConfigError);
}

TEST(ErrorGrid, ParseEdges) {
  EXPECT_EQ(parse_edges("3,5,8"), (std::vector<std::size_t>{3, 5, 8}));
  EXPECT_TRUE(parse_edges("").empty());
  EXPECT_THROW(parse_edges("3,x"), ConfigError);
  EXPECT_THROW(parse_edges("3,,4"), ConfigError);
  EXPECT_THROW(parse_edges("-1"), ConfigError);
}

TEST(ErrorGrid, CsvWritesInfForOpenBins) {
  const auto g = error_grid({{1, 1, true}, {4, 1, false}}, {2}, {});
  EXPECT_EQ(error_grid_csv(g),
            "paragraphs_lo,paragraphs_hi,mentions_lo,mentions_hi,support,correct,accuracy\n"
            "0,2,0,inf,1,1,1\n"
            "2,inf,0,inf,1,0,0\n");
}

TEST(ErrorGrid, ModelGridAgreesWithEvaluation) {
  auto cfg = tiny_config();
  auto toy = make_toy(cfg, 30);
  const auto bundles = model::build_bundles(toy.corpus.docs, toy.corpus.kg, toy.kge, model::bundle_options(cfg));
  model::KalmModel m(cfg, toy.kge);
  const auto idx = all_indices(bundles.size());
  const auto grid = error_grid(m, bundles, idx, {3, 5}, {2, 6}, 2);
  const auto ev = model::evaluate(m, bundles, idx);
  std::size_t support = 0, correct = 0;
  for (const auto& b : grid.bins) {
    support += b.support;
    correct += b.correct;
  }
  EXPECT_EQ(support, bundles.size());
  EXPECT_EQ(double(correct) / double(support), ev.metrics.acc);
  EXPECT_THROW(error_grid(m, bundles, idx, {4, 2}, {}), ConfigError);
}

TEST(Subsample, NestedDeterministicAndBalanced) {
  const auto c = ctx::generate_synthetic_corpus({.seed = 3, .n_docs = 100, .kg_size = 60, .n_classes = 2});
  std::vector<std::size_t> labels;
  for (const auto& d : c.docs) labels.push_back(d.label);
  const auto split = model::split_corpus(c.docs, 3);

  std::map<std::size_t, std::size_t> full_counts;
  for (std::size_t i : split.train) ++full_counts[labels[i]];

  std::vector<std::size_t> prev;
  for (double f : {0.1, 0.3, 0.5, 1.0}) {
    const auto s = subsample_train(split.train, labels, f, 11);
    EXPECT_EQ(s, subsample_train(split.train, labels, f, 11));
    EXPECT_TRUE(std::is_sorted(s.begin(), s.end()));
    EXPECT_TRUE(std::includes(s.begin(), s.end(), prev.begin(), prev.end())) << f;
    EXPECT_TRUE(std::includes(split.train.begin(), split.train.end(), s.begin(), s.end()));
    std::map<std::size_t, std::size_t> counts;
    for (std::size_t i : s) ++counts[labels[i]];
    for (const auto& [label, n] : full_counts) {
      EXPECT_EQ(counts[label], std::size_t(std::llround(f * double(n)))) << "fraction " << f << " class " << label;
    }
    prev = s;
  }
  EXPECT_EQ(prev, split.train);
  EXPECT_NE(subsample_train(split.train, labels, 0.3, 11), subsample_train(split.train, labels, 0.3, 12));
}

TEST(Subsample, EmptyClassAndBadFractionRejected) {
  const std::vector<std::size_t> labels = {0, 0, 0, 0, 0, 0, 0, 0, 1, 1};
  const std::vector<std::size_t> train = all_indices(10);
  EXPECT_THROW(subsample_train(train, labels, 0.1, 0), ConfigError);  // class 1 rounds to zero
  EXPECT_THROW(subsample_train(train, labels, 0.0, 0), ConfigError);
  EXPECT_THROW(subsample_train(train, labels, 1.5, 0), ConfigError);
  EXPECT_EQ(subsample_train(train, labels, 0.5, 0).size(), 5u);
}

TEST(MajorityBaseline, PredictsMostFrequentTrainingLabel) {
  const std::vector<std::size_t> labels = {1, 1, 0, 2, 1, 0, 2, 1};
  model::SplitIndices split;
  split.train = {0, 1, 2, 3};  // label 1 twice
  split.test = {4, 5, 6, 7};
  const auto m = majority_baseline(labels, split, 3);
  EXPECT_EQ(m.acc, 0.5);
  EXPECT_EQ(m.confusion[0][1], 1u);
  EXPECT_EQ(m.confusion[1][1], 2u);
  // Ties go to the lowest label.
  split.train = {2, 3};
  EXPECT_EQ(majority_baseline(labels, split, 3).confusion[1][0], 2u);
}

TEST(Sweep, FullFractionMatchesStandaloneRun) {
  auto cfg = tiny_config();
  cfg.seed = 2;
  auto toy = make_toy(cfg, 40);
  const auto ws = toy.workspace();
  const auto rows = efficiency_sweep(ws, cfg, {1.0});
  const auto run = run_variant(ws, cfg);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].train_size, run.split.train.size());
  EXPECT_EQ(rows[0].test.confusion, run.result.test.confusion);
  EXPECT_EQ(model::metrics_csv_fields(rows[0].test), model::metrics_csv_fields(run.result.test));
}

TEST(Sweep, SupportGrowsAndRepeatIsByteIdentical) {
  auto cfg = tiny_config();
  cfg.max_epochs = 2;
  auto toy = make_toy(cfg, 60);
  const auto ws = toy.workspace();
  const auto a = efficiency_sweep(ws, cfg, {1.0, 0.1, 0.5, 0.3});
  ASSERT_EQ(a.size(), 4u);
  for (std::size_t i = 1; i < a.size(); ++i) {
    EXPECT_LT(a[i - 1].fraction, a[i].fraction);
    EXPECT_LT(a[i - 1].train_size, a[i].train_size);
  }
  const auto csv = sweep_csv(a);
  EXPECT_EQ(csv.rfind("fraction,train_size,acc,bacc,maf,mif,map,mar\n", 0), 0u);
  EXPECT_EQ(sweep_csv(efficiency_sweep(ws, cfg, {0.1, 0.3, 0.5, 1.0})), csv);
}

TEST(Sweep, BadFractionListsRejected) {
  auto cfg = tiny_config();
  auto toy = make_toy(cfg, 40);
  const auto ws = toy.workspace();
  EXPECT_THROW(efficiency_sweep(ws, cfg, {}), ConfigError);
  EXPECT_THROW(efficiency_sweep(ws, cfg, {0.5, 0.5}), ConfigError);
  EXPECT_THROW(efficiency_sweep(ws, cfg, {0.5, 1.2}), ConfigError);
}

TEST(Ablation, WithoutGlobalBuildsNoSubgraphs) {
  auto cfg = tiny_config();
  cfg.max_epochs = 1;
  auto toy = make_toy(cfg, 30);
  const auto rows = ablation_suite(toy.workspace(), cfg, {"full", "no_global", "sum"});
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].global_subgraphs_built, 30u);
  EXPECT_EQ(rows[1].global_subgraphs_built, 0u);
  EXPECT_EQ(rows[2].global_subgraphs_built, 30u);
  const auto csv = ablation_csv(rows);
  EXPECT_EQ(csv.rfind("variant,best_epoch,acc,bacc,maf,mif,map,mar\nfull,", 0), 0u);
  EXPECT_THROW(ablation_suite(toy.workspace(), cfg, {"full", "no_such"}), ConfigError);
}

TEST(Ablation, VariantsShareTheDataPipeline) {
  auto cfg = tiny_config();
  auto toy = make_toy(cfg, 20);
  auto no_global = cfg;
  no_global.variant = "no_global";
  const auto full =
      model::build_bundles(toy.corpus.docs, toy.corpus.kg, toy.kge, model::bundle_options(cfg));
  const auto partial =
      model::build_bundles(toy.corpus.docs, toy.corpus.kg, toy.kge, model::bundle_options(no_global));
  for (std::size_t i = 0; i < full.size(); ++i) {
    EXPECT_EQ(full[i].local_features.to_vector(), partial[i].local_features.to_vector());
    EXPECT_EQ(full[i].doc_features.to_vector(), partial[i].doc_features.to_vector());
    EXPECT_EQ(full[i].doc_graph.edges, partial[i].doc_graph.edges);
    EXPECT_EQ(full[i].label, partial[i].label);
    EXPECT_TRUE(partial[i].global.entities.empty());
  }
}

// Training on a tenth of the data still does at least as well as always
// guessing the majority label.
TEST(Sweep, TenPercentBeatsMajorityBaseline) {
  model::TrainConfig cfg;
  cfg.d_model = 64;
  const auto corpus = ctx::generate_synthetic_corpus({.seed = 0, .n_docs = 100, .kg_size = 200, .n_classes = 2});
  const auto kge = kg::train_transe(corpus.kg, {.dim = cfg.kge_dim, .epochs = cfg.transe_epochs, .seed = 0});
  const Workspace ws{corpus.docs, corpus.kg, kge};
  const auto rows = efficiency_sweep(ws, cfg, {0.1});
  std::vector<std::size_t> labels;
  for (const auto& d : corpus.docs) labels.push_back(d.label);
  const auto base = majority_baseline(labels, model::split_corpus(corpus.docs, cfg.seed), cfg.n_classes);
  EXPECT_GE(rows[0].test.macro_f1, base.macro_f1);
  EXPECT_GE(rows[0].test.acc, base.acc);
}
