#include "kalm/layers/checkpoint.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "kalm/errors.hpp"
#include "kalm/num/serialize.hpp"
#include "kalm/text.hpp"

namespace kalm::layers {

namespace fs = std::filesystem;
using num::Tensor;

namespace {

std::string dims_string(const num::Shape& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
  return out;
}

num::Shape parse_dims(const std::string& s) {
  num::Shape out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, 'x')) {
    try {
      out.push_back(std::stoul(part));
    } catch (const std::exception&) {
      throw FormatError("bad shape '" + s + "' in checkpoint manifest");
    }
  }
  return out;
}

}  // namespace

void save_checkpoint(const fs::path& dir, const num::ParameterList& params,
                     const std::map<std::string, std::string>& extra_files) {
  std::set<std::string> seen;
  for (const auto& p : params) {
    if (!seen.insert(p.name).second) throw StateError("duplicate parameter name '" + p.name + "'");
  }
  const fs::path tmp = dir.string() + ".tmp";
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  std::ostringstream manifest;
  for (std::size_t i = 0; i < params.size(); ++i) {
    char file[32];
    std::snprintf(file, sizeof file, "p%04zu.tnsr", i);
    num::save_tensor(tmp / file, params[i].tensor);
    manifest << params[i].name << '\t' << file << '\t' << params[i].layer << '\t'
             << dims_string(params[i].tensor.shape()) << '\n';
  }
  write_file_atomic(tmp / "manifest.tsv", manifest.str());
  for (const auto& [name, content] : extra_files) write_file_atomic(tmp / name, content);
  fs::remove_all(dir);
  if (dir.has_parent_path()) fs::create_directories(dir.parent_path());
  fs::rename(tmp, dir);
}

std::map<std::string, Tensor> load_checkpoint(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.tsv";
  if (!fs::exists(manifest_path)) throw InputError("checkpoint not found: " + manifest_path.string());
  std::istringstream in(read_file(manifest_path));
  std::map<std::string, Tensor> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_tabs(line, 4);
    if (f.size() != 4) throw FormatError("manifest line " + std::to_string(line_no) + ": expected 4 fields");
    Tensor t = num::load_tensor(dir / f[1]);
    if (t.shape() != parse_dims(f[3])) {
      throw FormatError("manifest line " + std::to_string(line_no) + ": shape of " + f[1] + " disagrees");
    }
    out.emplace(f[0], std::move(t));
  }
  return out;
}

void restore_parameters(const num::ParameterList& params, const std::map<std::string, Tensor>& values) {
  for (const auto& p : params) {
    auto it = values.find(p.name);
    if (it == values.end()) throw StateError("checkpoint lacks parameter '" + p.name + "'");
    if (it->second.shape() != p.tensor.shape()) {
      throw StateError("checkpoint shape " + num::shape_string(it->second.shape()) + " for '" + p.name +
                       "' does not match " + num::shape_string(p.tensor.shape()));
    }
    Tensor target = p.tensor;
    auto dst = target.mutable_data();
    auto src = it->second.data();
    std::copy(src.begin(), src.end(), dst.begin());
  }
  if (values.size() != params.size()) {
    throw StateError("checkpoint holds " + std::to_string(values.size()) + " tensors, model has " +
                     std::to_string(params.size()));
  }
}

}  // namespace kalm::layers
