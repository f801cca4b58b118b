#include "kalm/num/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "kalm/errors.hpp"

namespace kalm::num {

namespace {

static_assert(std::endian::native == std::endian::little, "tensor I/O assumes a little-endian host");

void put_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }

std::uint32_t get_u32(std::istream& in) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), 4)) throw FormatError("tensor stream truncated");
  return v;
}

}  // namespace

void write_tensor(std::ostream& out, const Tensor& t) {
  out.write(kTensorMagic, sizeof(kTensorMagic));
  put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
  const auto data = t.data();
  std::vector<float> payload(data.begin(), data.end());
  out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size() * 4));
  if (!out) throw FormatError("failed writing tensor");
}

Tensor read_tensor(std::istream& in) {
  char magic[sizeof(kTensorMagic)];
  if (!in.read(magic, sizeof(magic))) throw FormatError("tensor stream truncated");
  if (std::memcmp(magic, kTensorMagic, sizeof(magic)) != 0) throw FormatError("bad tensor magic");
  const std::uint32_t rank = get_u32(in);
  if (rank == 0 || rank > 8) throw FormatError("unsupported tensor rank " + std::to_string(rank));
  Shape shape(rank);
  for (auto& d : shape) {
    d = get_u32(in);
    if (d == 0) throw FormatError("zero tensor dimension");
  }
  std::vector<float> payload(shape_numel(shape));
  if (!in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size() * 4))) {
    throw FormatError("tensor payload truncated");
  }
  return Tensor::from(std::move(shape), std::vector<double>(payload.begin(), payload.end()));
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  write_tensor(out, t);
}

Tensor load_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_tensor(in);
}

Tensor float32_rounded(const Tensor& t) {
  std::vector<double> v(t.numel());
  const auto d = t.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(static_cast<float>(d[i]));
  return Tensor::from(t.shape(), std::move(v));
}

}  // namespace kalm::num
