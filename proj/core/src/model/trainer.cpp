#include "kalm/model/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <map>
#include <thread>

#include "kalm/errors.hpp"
#include "kalm/layers/checkpoint.hpp"
#include "kalm/model/optimizer.hpp"
#include "kalm/num/ops.hpp"
#include "kalm/num/random.hpp"
#include "kalm/num/serialize.hpp"
#include "kalm/text.hpp"

namespace kalm::model {

using num::Tensor;

namespace {

// Runs fn(i) for i in [0, n) on up to `threads` workers with a static stride partition.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += threads) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

SplitIndices split_corpus(const std::vector<ctx::DocumentRecord>& docs, std::uint64_t seed) {
  std::map<std::size_t, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < docs.size(); ++i) by_label[docs[i].label].push_back(i);
  num::Rng rng(num::mix64(seed, 0x73706c6974));
  SplitIndices s;
  for (auto& [label, ids] : by_label) {
    rng.shuffle(ids);
    const std::size_t n = ids.size();
    const auto n_train = static_cast<std::size_t>(std::llround(0.70 * double(n)));
    const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::llround(0.15 * double(n))));
    s.train.insert(s.train.end(), ids.begin(), ids.begin() + std::ptrdiff_t(n_train));
    s.val.insert(s.val.end(), ids.begin() + std::ptrdiff_t(n_train), ids.begin() + std::ptrdiff_t(n_train + n_val));
    s.test.insert(s.test.end(), ids.begin() + std::ptrdiff_t(n_train + n_val), ids.end());
  }
  for (auto* part : {&s.train, &s.val, &s.test}) std::sort(part->begin(), part->end());
  if (s.train.empty() || s.val.empty() || s.test.empty()) {
    throw ConfigError("corpus of " + std::to_string(docs.size()) + " documents leaves an empty split");
  }
  return s;
}

std::vector<ctx::ContextBundle> build_bundles(const std::vector<ctx::DocumentRecord>& docs,
                                              const kg::KnowledgeGraph& kg, const kg::EmbeddingTable& kge,
                                              const ctx::BundleOptions& options, std::size_t threads) {
  std::vector<ctx::ContextBundle> out(docs.size());
  parallel_for(docs.size(), threads, [&](std::size_t i) { out[i] = ctx::build_bundle(docs[i], kg, kge, options); });
  return out;
}

std::size_t threads_from_env() {
  const char* v = std::getenv("KALM_THREADS");
  if (!v || !*v) return 1;
  std::size_t n = 0;
  auto [p, ec] = std::from_chars(v, v + std::strlen(v), n);
  if (ec != std::errc{} || *p != '\0' || n == 0) throw ConfigError(std::string("KALM_THREADS must be a positive integer, got '") + v + "'");
  return n;
}

Evaluation evaluate(const KalmModel& model, const std::vector<ctx::ContextBundle>& bundles,
                    const std::vector<std::size_t>& indices, std::size_t threads, bool capture) {
  if (indices.empty()) throw ConfigError("cannot evaluate an empty split");
  const std::size_t n = indices.size();
  std::vector<double> losses(n);
  Evaluation ev;
  ev.predictions.resize(n);
  if (capture) ev.traces.resize(n);
  parallel_for(n, threads, [&](std::size_t k) {
    const auto& b = bundles.at(indices[k]);
    auto r = model.forward(b, KalmModel::eval_mode(), capture);
    const auto lp = r.log_probs.data();
    ev.predictions[k] = std::size_t(std::max_element(lp.begin(), lp.end()) - lp.begin());
    if (b.label >= lp.size()) throw InputError("label of " + b.doc_id + " is outside the class range");
    losses[k] = -lp[b.label];
    if (capture) ev.traces[k] = std::move(r.traces);
  });
  std::vector<std::size_t> truth(n);
  for (std::size_t k = 0; k < n; ++k) truth[k] = bundles[indices[k]].label;
  for (double l : losses) ev.loss += l;
  ev.loss /= double(n);
  ev.metrics = compute_metrics(truth, ev.predictions, model.config().n_classes);
  return ev;
}

std::uint64_t table_checksum(const kg::EmbeddingTable& table) {
  std::uint64_t h = num::mix64(table.dim);
  for (const Tensor* t : {&table.entity_vecs, &table.relation_vecs}) {
    if (!t->defined()) continue;
    for (double v : t->data()) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      h = num::mix64(h, bits);
    }
  }
  return h;
}

std::string format_log(const std::vector<EpochRecord>& log) {
  std::string out = std::string(kLogHeader) + "\n";
  for (const auto& r : log) {
    out += std::to_string(r.epoch) + "," + r.split + "," + format_number(r.loss) + "," +
           metrics_csv_fields(r.metrics) + "\n";
  }
  return out;
}

TrainResult train(KalmModel& model, const std::vector<ctx::ContextBundle>& bundles, const SplitIndices& split,
                  const TrainOptions& options) {
  const auto& cfg = model.config();
  if (split.train.empty() || split.val.empty() || split.test.empty()) throw ConfigError("empty data split");
  for (const auto& b : bundles) {
    for (const Tensor* t : {&b.edge_entity_features, &b.global_features}) {
      if (t->defined() && t->requires_grad()) throw StateError("knowledge-graph features of " + b.doc_id + " are trainable");
    }
  }
  const auto params = model.parameters();
  RAdam opt(params, {cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
  const std::uint64_t frozen_sum = options.frozen ? table_checksum(*options.frozen) : 0;

  TrainResult result;
  std::vector<Tensor> best_values;
  double best_maf = -1.0;
  std::size_t since_best = 0;
  auto record = [&](EpochRecord r) {
    if (options.on_record) options.on_record(r);
    result.log.push_back(std::move(r));
  };
  auto flush_log = [&] {
    if (options.log_path) write_file_atomic(*options.log_path, format_log(result.log));
  };

  std::vector<std::size_t> order = split.train;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    num::Rng rng(num::mix64(num::mix64(cfg.seed, 0x65706f6368), epoch));
    order = split.train;
    rng.shuffle(order);
    double total = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      std::vector<std::size_t> batch(order.begin() + std::ptrdiff_t(begin), order.begin() + std::ptrdiff_t(end));
      std::sort(batch.begin(), batch.end(),
                [&](std::size_t a, std::size_t b) { return bundles[a].doc_id < bundles[b].doc_id; });
      model.zero_grad();
      const double inv = 1.0 / double(batch.size());
      for (std::size_t i : batch) {
        const Tensor l = model.loss(bundles[i], model.train_mode());
        total += l.item();
        num::backward(num::scale(l, inv));
      }
      clip_grad_norm(params, cfg.clip_norm);
      opt.step();
      ++result.steps;
      if (options.frozen && table_checksum(*options.frozen) != frozen_sum) {
        throw StateError("frozen knowledge-graph embeddings changed during training");
      }
    }
    const double mean_loss = total / double(order.size());
    result.epoch_losses.push_back(mean_loss);
    result.epochs_run = epoch;

    auto train_eval = evaluate(model, bundles, split.train, options.threads);
    result.max_train_acc = std::max(result.max_train_acc, train_eval.metrics.acc);
    record({epoch, "train", mean_loss, train_eval.metrics});
    auto val_eval = evaluate(model, bundles, split.val, options.threads);
    record({epoch, "val", val_eval.loss, val_eval.metrics});
    flush_log();

    // A tie moves the checkpoint to the later, longer-trained epoch.
    if (val_eval.metrics.macro_f1 >= best_maf) {
      best_maf = val_eval.metrics.macro_f1;
      result.best_epoch = epoch;
      result.best_val = val_eval.metrics;
      best_values.clear();
      for (const auto& p : params) best_values.push_back(num::float32_rounded(p.tensor));
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }

  layers::restore_parameters(params, [&] {
    std::map<std::string, Tensor> values;
    for (std::size_t k = 0; k < params.size(); ++k) values.emplace(params[k].name, best_values[k]);
    return values;
  }());
  auto test_eval = evaluate(model, bundles, split.test, options.threads);
  result.test = test_eval.metrics;
  record({result.best_epoch, "test", test_eval.loss, test_eval.metrics});
  flush_log();
  if (options.checkpoint_dir) save_model(model, *options.checkpoint_dir);
  return result;
}

void save_model(const KalmModel& model, const std::filesystem::path& dir) {
  layers::save_checkpoint(dir, model.parameters(), {{"config.txt", format_config(model.config())}});
}

TrainConfig load_model_config(const std::filesystem::path& dir) {
  const auto config_path = dir / "config.txt";
  if (!std::filesystem::exists(config_path)) throw InputError("checkpoint not found: " + dir.string());
  return parse_config(read_file(config_path));
}

KalmModel load_model(const std::filesystem::path& dir, const kg::EmbeddingTable& kge) {
  return load_model(dir, kge, load_model_config(dir));
}

KalmModel load_model(const std::filesystem::path& dir, const kg::EmbeddingTable& kge, const TrainConfig& config) {
  KalmModel model(config, kge);
  layers::restore_parameters(model.parameters(), layers::load_checkpoint(dir));
  return model;
}

}  // namespace kalm::model
