#pragma once

#include <filesystem>
#include <iosfwd>

#include "kalm/num/tensor.hpp"

namespace kalm::num {

// Binary layout, little-endian:
//   "KALMTNSR" | u32 rank | rank × u32 dim | numel × f32 payload
// Values are narrowed to float32 on write.

inline constexpr char kTensorMagic[8] = {'K', 'A', 'L', 'M', 'T', 'N', 'S', 'R'};

void write_tensor(std::ostream& out, const Tensor& t);
Tensor read_tensor(std::istream& in);

void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

/// Value after a float32 round trip, i.e. what a save/load cycle yields.
Tensor float32_rounded(const Tensor& t);

}  // namespace kalm::num
