#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "kalm/num/linear.hpp"

namespace kalm::layers {

// Checkpoint directory:
//   manifest.tsv   name<TAB>file<TAB>layer<TAB>shape (e.g. 64x64), one row per parameter
//   p0000.tnsr ... one numcore tensor file per parameter
//   any extra text files passed by the caller (e.g. config.txt)
// The directory is assembled beside the target and renamed into place.

void save_checkpoint(const std::filesystem::path& dir, const num::ParameterList& params,
                     const std::map<std::string, std::string>& extra_files = {});

/// Tensors by parameter name.
std::map<std::string, num::Tensor> load_checkpoint(const std::filesystem::path& dir);

/// Copies checkpoint values into `params`; every name must be present with a matching shape.
void restore_parameters(const num::ParameterList& params, const std::map<std::string, num::Tensor>& values);

}  // namespace kalm::layers
