#include "kalm/model/config.hpp"

#include <charconv>
#include <cstdlib>
#include <functional>
#include <sstream>

#include "kalm/errors.hpp"
#include "kalm/text.hpp"

namespace kalm::model {

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_unsigned(const std::string& key, const std::string& v) {
  T out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size() || v.empty()) {
    throw ConfigError("key " + key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size()) throw ConfigError("key " + key + ": expected a number, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("key " + key + ": expected true or false, got '" + v + "'");
}

struct Field {
  ConfigKey key;
  std::function<void(TrainConfig&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

#define KALM_SIZE(name, help)                                                                              \
  Field {                                                                                                  \
    {#name, "", help}, [](TrainConfig& c, const std::string& v) { c.name = parse_unsigned<decltype(c.name)>(#name, v); }, \
        [](const TrainConfig& c) { return std::to_string(c.name); }                                         \
  }
#define KALM_REAL(name, help)                                                                 \
  Field {                                                                                     \
    {#name, "", help}, [](TrainConfig& c, const std::string& v) { c.name = parse_double(#name, v); }, \
        [](const TrainConfig& c) { return format_number(c.name); }                            \
  }
#define KALM_TEXT(name, help)                                                         \
  Field {                                                                             \
    {#name, "", help}, [](TrainConfig& c, const std::string& v) { c.name = v; },      \
        [](const TrainConfig& c) { return c.name; }                                   \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f{
        KALM_SIZE(d_model, "hidden width of every KALM layer"),
        KALM_SIZE(n_layers, "number of stacked KALM layers"),
        KALM_SIZE(n_heads, "attention heads in encoder blocks and graph attention"),
        KALM_REAL(dropout, "dropout rate on attention weights and sublayer outputs"),
        KALM_REAL(lr, "RAdam learning rate"),
        KALM_REAL(weight_decay, "decoupled weight decay"),
        KALM_SIZE(batch_size, "documents per optimizer step"),
        KALM_SIZE(max_epochs, "upper bound on training epochs"),
        KALM_SIZE(k_hops, "hops of the knowledge-graph neighborhood"),
        KALM_SIZE(seed, "master random seed"),
        KALM_SIZE(kge_dim, "knowledge-graph embedding width"),
        KALM_SIZE(d_embed, "paragraph embedding width"),
        KALM_SIZE(ffn_mult, "feed-forward expansion factor of encoder blocks"),
        KALM_SIZE(patience, "epochs without a new best validation macro-F1 (ties count) before stopping"),
        KALM_REAL(clip_norm, "global gradient-norm clipping threshold"),
        KALM_TEXT(variant, "full | no_local | no_document | no_global | concat | sum | mint"),
        Field{{"capture_attention", "", "record fusion attention during evaluation"},
              [](TrainConfig& c, const std::string& v) { c.capture_attention = parse_bool("capture_attention", v); },
              [](const TrainConfig& c) { return std::string(c.capture_attention ? "true" : "false"); }},
        KALM_SIZE(transe_epochs, "TransE training epochs"),
        KALM_REAL(transe_margin, "TransE ranking margin"),
        KALM_REAL(transe_lr, "TransE SGD step size"),
        KALM_SIZE(n_docs, "synthetic corpus size"),
        KALM_SIZE(n_classes, "number of classes"),
        KALM_SIZE(kg_size, "synthetic knowledge-graph entity count"),
        KALM_TEXT(data, "input directory (defaults to the output directory)"),
        KALM_TEXT(checkpoint, "checkpoint directory (defaults to <out>/checkpoint)"),
        KALM_TEXT(embeddings, "precomputed paragraph embeddings file (optional)"),
    };
    const TrainConfig defaults;
    for (auto& x : f) x.key.default_value = x.get(defaults);
    return f;
  }();
  return table;
}

#undef KALM_SIZE
#undef KALM_REAL
#undef KALM_TEXT

const Field& field(const std::string& key) {
  for (const auto& f : fields()) {
    if (f.key.name == key) return f;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& f : fields()) out.push_back(f.key);
    return out;
  }();
  return keys;
}

void set_config_value(TrainConfig& config, const std::string& key, const std::string& value) {
  field(key).set(config, value);
}

std::string get_config_value(const TrainConfig& config, const std::string& key) { return field(key).get(config); }

void apply_override(TrainConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
  set_config_value(config, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

TrainConfig parse_config(const std::string& text, TrainConfig base) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    try {
      apply_override(base, line);
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

TrainConfig load_config(const std::string& path, TrainConfig base) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const InputError&) {
    throw ConfigError("cannot read config file " + path);
  }
  return parse_config(text, std::move(base));
}

std::string format_config(const TrainConfig& config) {
  std::string out;
  for (const auto& f : fields()) out += f.key.name + "=" + f.get(config) + "\n";
  return out;
}

void validate(const TrainConfig& c) {
  auto positive = [](const char* name, double v) {
    if (!(v > 0)) throw ConfigError(std::string(name) + " must be positive");
  };
  positive("d_model", double(c.d_model));
  positive("n_layers", double(c.n_layers));
  positive("n_heads", double(c.n_heads));
  positive("lr", c.lr);
  positive("batch_size", double(c.batch_size));
  positive("max_epochs", double(c.max_epochs));
  positive("kge_dim", double(c.kge_dim));
  positive("d_embed", double(c.d_embed));
  positive("ffn_mult", double(c.ffn_mult));
  positive("patience", double(c.patience));
  positive("clip_norm", c.clip_norm);
  positive("transe_margin", c.transe_margin);
  positive("transe_lr", c.transe_lr);
  if (c.kge_dim < 2) throw ConfigError("kge_dim must be at least 2");
  if (c.d_model % c.n_heads != 0) throw ConfigError("d_model must be divisible by n_heads");
  if (!(c.dropout >= 0 && c.dropout < 1)) throw ConfigError("dropout must lie in [0, 1)");
  if (!(c.weight_decay >= 0)) throw ConfigError("weight_decay must be non-negative");
  if (c.n_classes < 2) throw ConfigError("n_classes must be at least 2");
  static const char* kVariants[] = {"full", "no_local", "no_document", "no_global", "concat", "sum", "mint"};
  bool known = false;
  for (const char* v : kVariants) known = known || c.variant == v;
  if (!known) throw ConfigError("unknown variant '" + c.variant + "'");
}

}  // namespace kalm::model
