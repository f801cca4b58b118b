#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>

#include "kalm/contexts/bundle.hpp"
#include "kalm/contexts/document.hpp"
#include "kalm/contexts/embedder.hpp"
#include "kalm/contexts/synthetic.hpp"
#include "kalm/errors.hpp"
#include "kalm/insight/attention.hpp"
#include "kalm/insight/error_grid.hpp"
#include "kalm/insight/experiments.hpp"
#include "kalm/kg/embedding.hpp"
#include "kalm/kg/knowledge_graph.hpp"
#include "kalm/model/config.hpp"
#include "kalm/model/trainer.hpp"
#include "kalm/text.hpp"

namespace kalm::cli {

namespace fs = std::filesystem;
using model::TrainConfig;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
};

TrainConfig resolve(const Common& c, TrainConfig base = {}) {
  if (!c.config_path.empty()) base = model::load_config(c.config_path, std::move(base));
  for (const auto& s : c.sets) model::apply_override(base, s);
  if (c.seed) base.seed = *c.seed;
  model::validate(base);
  return base;
}

fs::path data_dir(const TrainConfig& cfg, const Common& c) { return cfg.data.empty() ? fs::path(c.out) : fs::path(cfg.data); }

fs::path checkpoint_dir(const TrainConfig& cfg, const Common& c) {
  return cfg.checkpoint.empty() ? fs::path(c.out) / files::kCheckpoint : fs::path(cfg.checkpoint);
}

struct Data {
  std::vector<ctx::DocumentRecord> docs;
  kg::KnowledgeGraph kg;
};

Data load_data(const fs::path& dir) {
  Data d;
  d.kg = kg::load_kg(dir / files::kTriples, dir / files::kDescriptions);
  d.docs = ctx::load_corpus(dir / files::kCorpus);
  if (d.docs.empty()) throw InputError("corpus " + (dir / files::kCorpus).string() + " is empty");
  for (const auto& doc : d.docs) ctx::validate(doc, d.kg);
  return d;
}

kg::EmbeddingTable train_kge(const TrainConfig& cfg, const kg::KnowledgeGraph& kg) {
  kg::TransEConfig t;
  t.dim = cfg.kge_dim;
  t.margin = cfg.transe_margin;
  t.lr = cfg.transe_lr;
  t.epochs = cfg.transe_epochs;
  t.seed = cfg.seed;
  return kg::train_transe(kg, t);
}

// Saved table if `dir` holds one, otherwise a fresh TransE run.
kg::EmbeddingTable obtain_kge(const TrainConfig& cfg, const kg::KnowledgeGraph& kg, const fs::path& dir) {
  if (!fs::exists(dir / files::kEmbeddings / "kge.header")) return train_kge(cfg, kg);
  auto table = kg::load_embeddings(dir / files::kEmbeddings);
  if (table.dim != cfg.kge_dim) {
    throw ConfigError("saved embeddings have dim " + std::to_string(table.dim) + " but kge_dim is " +
                      std::to_string(cfg.kge_dim));
  }
  return table;
}

std::optional<ctx::PrecomputedEmbeddings> load_precomputed(const TrainConfig& cfg) {
  if (cfg.embeddings.empty()) return std::nullopt;
  return ctx::PrecomputedEmbeddings::load(cfg.embeddings);
}

std::string metrics_file(const std::string& split, const model::Metrics& m) {
  return "split,acc,bacc,maf,mif,map,mar\n" + split + ',' + model::metrics_csv_fields(m) + '\n';
}

fs::path require_checkpoint(const fs::path& dir) {
  if (!fs::exists(dir / files::kConfig)) throw ConfigError("checkpoint not found: " + dir.string());
  return dir;
}

const std::vector<std::size_t>& pick_split(const model::SplitIndices& s, const std::string& name) {
  if (name == "train") return s.train;
  if (name == "val") return s.val;
  if (name == "test") return s.test;
  throw ConfigError("unknown split '" + name + "' (expected train, val or test)");
}

std::vector<double> parse_fractions(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw ConfigError("bad fraction '" + item + "'");
    out.push_back(v);
  }
  return out;
}

class Runner {
 public:
  Runner(std::ostream& out) : out_(out) {}

  void gen(const Common& c) {
    const auto cfg = resolve(c);
    const auto corpus = ctx::generate_synthetic_corpus({cfg.seed, cfg.n_docs, cfg.kg_size, cfg.n_classes});
    const fs::path dir(c.out);
    fs::create_directories(dir);
    kg::save_kg(corpus.kg, dir / files::kTriples, dir / files::kDescriptions);
    ctx::save_corpus(corpus.docs, dir / files::kCorpus);
    write_file_atomic(dir / files::kConfig, model::format_config(cfg));
    out_ << "wrote " << corpus.docs.size() << " documents and " << corpus.kg.entities().size() << " entities to "
         << dir.string() << "\n";
  }

  void build(const Common& c) {
    const auto cfg = resolve(c);
    const auto data = load_data(data_dir(cfg, c));
    const auto kge = train_kge(cfg, data.kg);
    const auto pre = load_precomputed(cfg);
    const auto bundles = model::build_bundles(data.docs, data.kg, kge,
                                              model::bundle_options(cfg, pre ? &*pre : nullptr), model::threads_from_env());
    const fs::path dir(c.out);
    fs::create_directories(dir);
    kg::save_embeddings(kge, dir / files::kEmbeddings);
    std::string table = "doc_id,label,paragraphs,mentions,doc_edges,subgraph_nodes,subgraph_edges,digest\n";
    for (const auto& b : bundles) {
      table += b.doc_id + ',' + std::to_string(b.label) + ',' + std::to_string(b.paragraph_count) + ',' +
               std::to_string(b.mention_count) + ',' + std::to_string(b.doc_graph.edges.size()) + ',' +
               std::to_string(b.global.node_count()) + ',' + std::to_string(b.global.edges.size()) + ',' +
               std::to_string(ctx::bundle_digest(b)) + '\n';
    }
    write_file_atomic(dir / files::kBundles, table);
    out_ << "built " << bundles.size() << " bundles\n";
  }

  void train(const Common& c) {
    const auto cfg = resolve(c);
    const auto data = load_data(data_dir(cfg, c));
    const auto kge = obtain_kge(cfg, data.kg, data_dir(cfg, c));
    const auto pre = load_precomputed(cfg);
    const std::size_t threads = model::threads_from_env();
    const auto bundles =
        model::build_bundles(data.docs, data.kg, kge, model::bundle_options(cfg, pre ? &*pre : nullptr), threads);
    const auto split = model::split_corpus(data.docs, cfg.seed);
    const fs::path dir(c.out);
    fs::create_directories(dir);
    const auto ckpt = checkpoint_dir(cfg, c);

    model::KalmModel m(cfg, kge);
    model::TrainOptions opt;
    opt.threads = threads;
    opt.frozen = &kge;
    opt.log_path = dir / files::kTrainLog;
    opt.checkpoint_dir = ckpt;
    const auto r = model::train(m, bundles, split, opt);
    kg::save_embeddings(kge, ckpt / files::kEmbeddings);
    write_file_atomic(dir / files::kTestMetrics, metrics_file("test", r.test));
    out_ << "epochs " << r.epochs_run << " best_epoch " << r.best_epoch << " test_maf " << format_number(r.test.macro_f1)
         << "\n";
  }

  // Checkpoint config, then the command line on top of it.
  struct Loaded {
    TrainConfig cfg;
    Data data;
    kg::EmbeddingTable kge;
    std::optional<ctx::PrecomputedEmbeddings> pre;
    std::vector<ctx::ContextBundle> bundles;
    model::SplitIndices split;
  };

  Loaded load_for_checkpoint(const Common& c, fs::path& ckpt) {
    ckpt = require_checkpoint(checkpoint_dir(resolve(c), c));
    Loaded l;
    l.cfg = resolve(c, model::load_model_config(ckpt));
    l.data = load_data(data_dir(l.cfg, c));
    l.kge = obtain_kge(l.cfg, l.data.kg, ckpt);
    l.pre = load_precomputed(l.cfg);
    l.bundles = model::build_bundles(l.data.docs, l.data.kg, l.kge,
                                     model::bundle_options(l.cfg, l.pre ? &*l.pre : nullptr), model::threads_from_env());
    l.split = model::split_corpus(l.data.docs, l.cfg.seed);
    return l;
  }

  void eval(const Common& c, const std::string& split_name) {
    fs::path ckpt;
    const auto l = load_for_checkpoint(c, ckpt);
    const auto& idx = pick_split(l.split, split_name);
    const auto m = model::load_model(ckpt, l.kge, l.cfg);
    const auto ev = model::evaluate(m, l.bundles, idx, model::threads_from_env());
    const fs::path dir(c.out);
    fs::create_directories(dir);
    write_file_atomic(dir / files::kEvalMetrics, metrics_file(split_name, ev.metrics));
    out_ << split_name << "_maf " << format_number(ev.metrics.macro_f1) << "\n";
  }

  void explain(const Common& c, const std::string& split_name, const std::string& paragraph_edges,
               const std::string& mention_edges) {
    const auto p_edges = insight::parse_edges(paragraph_edges);
    const auto m_edges = insight::parse_edges(mention_edges);
    fs::path ckpt;
    const auto l = load_for_checkpoint(c, ckpt);
    if (!l.cfg.capture_attention) throw ConfigError("attention capture is disabled; set capture_attention=true");
    const auto& idx = pick_split(l.split, split_name);
    const auto m = model::load_model(ckpt, l.kge, l.cfg);
    const std::size_t threads = model::threads_from_env();
    const auto report = insight::attention_report(m, l.bundles, idx, threads);
    const auto grid = insight::error_grid(m, l.bundles, idx, p_edges, m_edges, threads);
    const fs::path dir(c.out);
    fs::create_directories(dir);
    write_file_atomic(dir / files::kAttention, insight::attention_csv(report));
    write_file_atomic(dir / files::kErrorGrid, insight::error_grid_csv(grid));
    out_ << "explained " << idx.size() << " " << split_name << " documents\n";
  }

  void ablate(const Common& c, const std::vector<std::string>& variants) {
    const auto cfg = resolve(c);
    const auto data = load_data(data_dir(cfg, c));
    const auto kge = obtain_kge(cfg, data.kg, data_dir(cfg, c));
    const auto pre = load_precomputed(cfg);
    const insight::Workspace ws{data.docs, data.kg, kge, pre ? &*pre : nullptr, model::threads_from_env()};
    const auto rows = insight::ablation_suite(ws, cfg, variants.empty() ? model::variant_names() : variants);
    const fs::path dir(c.out);
    fs::create_directories(dir);
    write_file_atomic(dir / files::kAblation, insight::ablation_csv(rows));
    for (const auto& r : rows) out_ << r.variant << " test_maf " << format_number(r.test.macro_f1) << "\n";
  }

  void sweep(const Common& c, const std::string& fractions) {
    const auto cfg = resolve(c);
    const auto fr = parse_fractions(fractions);
    const auto data = load_data(data_dir(cfg, c));
    const auto kge = obtain_kge(cfg, data.kg, data_dir(cfg, c));
    const auto pre = load_precomputed(cfg);
    const insight::Workspace ws{data.docs, data.kg, kge, pre ? &*pre : nullptr, model::threads_from_env()};
    const auto rows = insight::efficiency_sweep(ws, cfg, fr);
    std::vector<std::size_t> labels;
    for (const auto& d : data.docs) labels.push_back(d.label);
    const auto baseline = insight::majority_baseline(labels, model::split_corpus(data.docs, cfg.seed), cfg.n_classes);
    const fs::path dir(c.out);
    fs::create_directories(dir);
    write_file_atomic(dir / files::kSweep, insight::sweep_csv(rows));
    write_file_atomic(dir / files::kBaseline, metrics_file("test", baseline));
    for (const auto& r : rows) out_ << "fraction " << format_number(r.fraction) << " test_maf " << format_number(r.test.macro_f1) << "\n";
  }

 private:
  std::ostream& out_;
};

std::string keys_help() {
  std::string s = "Config keys (key=default):\n";
  for (const auto& k : model::config_keys()) {
    s += "  " + k.name + "=" + k.default_value;
    if (!k.help.empty()) s += "  " + k.help;
    s += '\n';
  }
  return s;
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config_path, "key=value config file");
  sub->add_option("--set", c.sets, "override, key=value (repeatable, several per flag)");
  sub->add_option("--out", c.out, "output directory")->capture_default_str();
  sub->add_option("--seed", c.seed, "seed (overrides the config)");
  sub->footer(keys_help());
}

std::string error_line(const std::string& kind, const std::string& message) {
  return "error=" + kind + " message=" + nlohmann::json(message).dump() + "\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Knowledge-aware long-document classification", "kalm"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "help for every command");

  Common common;
  std::string split = "test", explain_split = "val", fractions = "0.1,0.3,0.5,1";
  std::string paragraph_edges = "4,6", mention_edges = "6,12";
  std::vector<std::string> variants;

  auto* gen = app.add_subcommand("gen", "generate a synthetic corpus and knowledge graph");
  auto* build = app.add_subcommand("build", "train KG embeddings and build context bundles");
  auto* train = app.add_subcommand("train", "train a model, write the log and best checkpoint");
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  auto* explain = app.add_subcommand("explain", "fusion attention report and error grid for a checkpoint");
  auto* ablate = app.add_subcommand("ablate", "train every context and fusion variant");
  auto* sweep = app.add_subcommand("sweep", "train on growing fractions of the training split");
  for (auto* sub : {gen, build, train, eval, explain, ablate, sweep}) add_common(sub, common);
  eval->add_option("--split", split, "train, val or test")->capture_default_str();
  explain->add_option("--split", explain_split, "train, val or test")->capture_default_str();
  explain->add_option("--paragraph-edges", paragraph_edges, "paragraph-count bin edges")->capture_default_str();
  explain->add_option("--mention-edges", mention_edges, "mention-count bin edges")->capture_default_str();
  ablate->add_option("--variants", variants, "variants to run (default: all)");
  sweep->add_option("--fractions", fractions, "comma-separated training fractions")->capture_default_str();

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << error_line("usage", e.what());
    return kExitConfig;
  }

  Runner r(out);
  try {
    if (*gen) r.gen(common);
    else if (*build) r.build(common);
    else if (*train) r.train(common);
    else if (*eval) r.eval(common, split);
    else if (*explain) r.explain(common, explain_split, paragraph_edges, mention_edges);
    else if (*ablate) r.ablate(common, variants);
    else if (*sweep) r.sweep(common, fractions);
  } catch (const ConfigError& e) {
    err << error_line("config", e.what());
    return kExitConfig;
  } catch (const InputError& e) {
    err << error_line("input", e.what());
    return kExitRuntime;
  } catch (const Error& e) {
    err << error_line("runtime", e.what());
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << error_line("runtime", e.what());
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace kalm::cli
