#include "kalm/contexts/embedder.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "kalm/errors.hpp"
#include "kalm/num/random.hpp"
#include "kalm/num/serialize.hpp"
#include "kalm/text.hpp"

namespace kalm::ctx {

namespace {

constexpr char kIndexMagic[8] = {'K', 'A', 'L', 'M', 'E', 'M', 'B', 'X'};

template <typename T>
void put_raw(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get_raw(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw FormatError("embedding index truncated");
  return v;
}

}  // namespace

std::vector<double> embed_paragraph(std::span<const std::string> tokens, std::size_t d_embed, std::uint64_t seed) {
  if (d_embed == 0) throw InputError("embedding dimension must be positive");
  std::vector<double> out(d_embed, 0.0);
  if (tokens.empty()) return out;
  for (const auto& tok : tokens) {
    num::Rng rng(num::hash_string(tok, seed));
    for (auto& v : out) v += rng.normal();
  }
  for (auto& v : out) v /= static_cast<double>(tokens.size());
  return out;
}

void PrecomputedEmbeddings::put(const std::string& key, num::Tensor block) {
  if (block.rank() != 2) throw DimensionError("embedding block must be a matrix");
  if (dim_ == 0) dim_ = block.cols();
  if (block.cols() != dim_) {
    throw DimensionError("embedding block for " + key + " has width " + std::to_string(block.cols()) +
                         ", expected " + std::to_string(dim_));
  }
  blocks_[key] = std::move(block);
}

const num::Tensor* PrecomputedEmbeddings::find(const std::string& key) const {
  auto it = blocks_.find(key);
  return it == blocks_.end() ? nullptr : &it->second;
}

void PrecomputedEmbeddings::save(const std::filesystem::path& path) const {
  std::vector<std::string> payloads;
  for (const auto& [_, t] : blocks_) {
    std::ostringstream os;
    num::write_tensor(os, t);
    payloads.push_back(os.str());
  }
  std::uint64_t header = 8 + 4 * 3;
  for (const auto& [key, _] : blocks_) header += 4 + key.size() + 8;

  std::ostringstream out;
  out.write(kIndexMagic, 8);
  put_raw<std::uint32_t>(out, 1);
  put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(dim_));
  put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(blocks_.size()));
  std::uint64_t offset = header;
  std::size_t k = 0;
  for (const auto& [key, _] : blocks_) {
    put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(key.size()));
    out.write(key.data(), static_cast<std::streamsize>(key.size()));
    put_raw<std::uint64_t>(out, offset);
    offset += payloads[k++].size();
  }
  for (const auto& p : payloads) out << p;
  write_file_atomic(path, out.str());
}

PrecomputedEmbeddings PrecomputedEmbeddings::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kIndexMagic, 8) != 0) {
    throw FormatError(path.string() + ": not an embedding index file");
  }
  const auto version = get_raw<std::uint32_t>(in);
  if (version != 1) throw FormatError(path.string() + ": unsupported version " + std::to_string(version));
  PrecomputedEmbeddings out(get_raw<std::uint32_t>(in));
  const auto count = get_raw<std::uint32_t>(in);
  std::vector<std::pair<std::string, std::uint64_t>> index;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = get_raw<std::uint32_t>(in);
    std::string key(len, '\0');
    if (!in.read(key.data(), len)) throw FormatError(path.string() + ": truncated key");
    if (!is_valid_utf8(key)) throw EncodingError(path.string() + ": key is not UTF-8");
    index.emplace_back(std::move(key), get_raw<std::uint64_t>(in));
  }
  for (const auto& [key, offset] : index) {
    in.seekg(static_cast<std::streamoff>(offset));
    if (out.find(key)) throw FormatError(path.string() + ": duplicate key " + key);
    out.put(key, num::read_tensor(in));
  }
  return out;
}

}  // namespace kalm::ctx
