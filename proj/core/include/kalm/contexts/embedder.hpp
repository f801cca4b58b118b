#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "kalm/num/tensor.hpp"

namespace kalm::ctx {

/// Bag-of-words paragraph vector: every token maps, through a seeded string
/// hash, to a vector of d_embed standard normals; the paragraph is their mean.
/// An empty paragraph yields the zero vector.
std::vector<double> embed_paragraph(std::span<const std::string> tokens, std::size_t d_embed, std::uint64_t seed);

/// Externally computed paragraph embeddings, one n×d block per key.
///
/// Block key `doc_id` holds embeddings of the augmented paragraphs (local
/// context); the optional key `doc_id#raw` holds the unaugmented ones
/// (document graph).
///
/// File layout, little-endian:
///   "KALMEMBX" | u32 version (1) | u32 d_embed | u32 count
///   count × { u32 key_bytes | key (UTF-8) | u64 absolute offset }
///   tensor blocks in the numcore tensor format at the listed offsets
class PrecomputedEmbeddings {
 public:
  PrecomputedEmbeddings() = default;
  explicit PrecomputedEmbeddings(std::size_t dim) : dim_(dim) {}

  static PrecomputedEmbeddings load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  void put(const std::string& key, num::Tensor block);
  const num::Tensor* find(const std::string& key) const;
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return blocks_.size(); }

  static std::string raw_key(const std::string& doc_id) { return doc_id + "#raw"; }

 private:
  std::size_t dim_ = 0;
  std::map<std::string, num::Tensor> blocks_;
};

}  // namespace kalm::ctx
