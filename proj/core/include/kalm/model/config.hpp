#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace kalm::model {

/// Training and model hyperparameters. The first block mirrors the settings
/// reported for the political-perspective and misinformation datasets; the
/// rest covers the pipeline around the model.
struct TrainConfig {
  std::size_t d_model = 512;
  std::size_t n_layers = 2;
  std::size_t n_heads = 8;
  double dropout = 0.5;
  double lr = 1e-3;
  double weight_decay = 1e-5;
  std::size_t batch_size = 16;
  std::size_t max_epochs = 100;
  std::size_t k_hops = 2;
  std::uint64_t seed = 0;
  std::size_t kge_dim = 100;

  std::size_t d_embed = 256;
  std::size_t ffn_mult = 4;
  std::size_t patience = 10;
  double clip_norm = 5.0;
  std::string variant = "full";
  bool capture_attention = false;

  std::size_t transe_epochs = 500;
  double transe_margin = 1.0;
  double transe_lr = 0.01;

  std::size_t n_docs = 100;
  std::size_t n_classes = 2;
  std::size_t kg_size = 200;

  std::string data;         // input directory; empty means the output directory
  std::string checkpoint;   // checkpoint directory; empty means <out>/checkpoint
  std::string embeddings;   // optional precomputed paragraph embeddings file

  bool operator==(const TrainConfig&) const = default;
};

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string help;
};

/// Every accepted key in declaration order, with its default rendered as text.
const std::vector<ConfigKey>& config_keys();

/// Sets one key; throws ConfigError for unknown keys and unparsable values.
void set_config_value(TrainConfig& config, const std::string& key, const std::string& value);
/// Accepts "key=value".
void apply_override(TrainConfig& config, const std::string& assignment);
std::string get_config_value(const TrainConfig& config, const std::string& key);

/// Flat key=value text; blank lines and lines starting with '#' are skipped.
TrainConfig parse_config(const std::string& text, TrainConfig base = {});
TrainConfig load_config(const std::string& path, TrainConfig base = {});
/// One key=value line per key, in config_keys() order.
std::string format_config(const TrainConfig& config);

/// Throws ConfigError when a value is out of range.
void validate(const TrainConfig& config);

}  // namespace kalm::model
