#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "kalm/contexts/bundle.hpp"
#include "kalm/model/kalm_model.hpp"

namespace kalm::insight {

/// Accuracy binned by document length (paragraphs) and knowledge intensity
/// (distinct mentioned entities).
///
/// Edges are strictly increasing cut points. k edges give k+1 bins:
/// [0, e0), [e0, e1), ..., [e_{k-1}, inf). No edges means one bin.
struct ErrorGrid {
  static constexpr std::size_t kUnbounded = static_cast<std::size_t>(-1);
  struct Bin {
    std::size_t paragraph_lo = 0, paragraph_hi = kUnbounded;  // half-open [lo, hi)
    std::size_t mention_lo = 0, mention_hi = kUnbounded;
    std::size_t support = 0;
    std::size_t correct = 0;
    double accuracy = 0.0;  // 0 for empty bins
  };
  std::vector<std::size_t> paragraph_edges, mention_edges;
  std::vector<Bin> bins;  // paragraph-major

  const Bin& at(std::size_t paragraph_bin, std::size_t mention_bin) const {
    return bins.at(paragraph_bin * (mention_edges.size() + 1) + mention_bin);
  }
};

/// One sample per document.
struct GridSample {
  std::size_t paragraphs = 0;
  std::size_t mentions = 0;
  bool correct = false;
};

ErrorGrid error_grid(const std::vector<GridSample>& samples, const std::vector<std::size_t>& paragraph_edges,
                     const std::vector<std::size_t>& mention_edges);

/// Evaluates the model on bundles[indices] and bins the outcomes.
ErrorGrid error_grid(const model::KalmModel& model, const std::vector<ctx::ContextBundle>& bundles,
                     const std::vector<std::size_t>& indices, const std::vector<std::size_t>& paragraph_edges,
                     const std::vector<std::size_t>& mention_edges, std::size_t threads = 1);

/// Header `paragraphs_lo,paragraphs_hi,mentions_lo,mentions_hi,support,correct,accuracy`;
/// an unbounded upper edge is written as `inf`.
std::string error_grid_csv(const ErrorGrid& grid);

/// Parses comma-separated edges such as "3,5,8"; empty text gives no edges.
std::vector<std::size_t> parse_edges(const std::string& text);

}  // namespace kalm::insight
