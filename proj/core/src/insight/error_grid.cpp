#include "kalm/insight/error_grid.hpp"

#include <algorithm>
#include <charconv>

#include "kalm/errors.hpp"
#include "kalm/model/trainer.hpp"
#include "kalm/text.hpp"

namespace kalm::insight {

namespace {

void check_edges(const std::vector<std::size_t>& edges, const char* what) {
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (edges[i] <= edges[i - 1]) {
      throw ConfigError(std::string(what) + " bin edges must be strictly increasing");
    }
  }
}

std::size_t bin_of(const std::vector<std::size_t>& edges, std::size_t value) {
  return std::size_t(std::upper_bound(edges.begin(), edges.end(), value) - edges.begin());
}

}  // namespace

ErrorGrid error_grid(const std::vector<GridSample>& samples, const std::vector<std::size_t>& paragraph_edges,
                     const std::vector<std::size_t>& mention_edges) {
  check_edges(paragraph_edges, "paragraph");
  check_edges(mention_edges, "mention");
  ErrorGrid grid;
  grid.paragraph_edges = paragraph_edges;
  grid.mention_edges = mention_edges;
  const std::size_t np = paragraph_edges.size() + 1, nm = mention_edges.size() + 1;
  grid.bins.resize(np * nm);
  for (std::size_t p = 0; p < np; ++p) {
    for (std::size_t m = 0; m < nm; ++m) {
      auto& b = grid.bins[p * nm + m];
      b.paragraph_lo = p == 0 ? 0 : paragraph_edges[p - 1];
      b.paragraph_hi = p + 1 < np ? paragraph_edges[p] : ErrorGrid::kUnbounded;
      b.mention_lo = m == 0 ? 0 : mention_edges[m - 1];
      b.mention_hi = m + 1 < nm ? mention_edges[m] : ErrorGrid::kUnbounded;
    }
  }
  for (const auto& s : samples) {
    auto& b = grid.bins[bin_of(paragraph_edges, s.paragraphs) * nm + bin_of(mention_edges, s.mentions)];
    ++b.support;
    b.correct += s.correct ? 1 : 0;
  }
  for (auto& b : grid.bins) b.accuracy = b.support ? double(b.correct) / double(b.support) : 0.0;
  return grid;
}

ErrorGrid error_grid(const model::KalmModel& model, const std::vector<ctx::ContextBundle>& bundles,
                     const std::vector<std::size_t>& indices, const std::vector<std::size_t>& paragraph_edges,
                     const std::vector<std::size_t>& mention_edges, std::size_t threads) {
  check_edges(paragraph_edges, "paragraph");
  check_edges(mention_edges, "mention");
  const auto ev = model::evaluate(model, bundles, indices, threads);
  std::vector<GridSample> samples;
  samples.reserve(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto& b = bundles[indices[k]];
    samples.push_back({b.paragraph_count, b.mention_count, ev.predictions[k] == b.label});
  }
  return error_grid(samples, paragraph_edges, mention_edges);
}

std::string error_grid_csv(const ErrorGrid& grid) {
  auto hi = [](std::size_t v) { return v == ErrorGrid::kUnbounded ? std::string("inf") : std::to_string(v); };
  std::string out = "paragraphs_lo,paragraphs_hi,mentions_lo,mentions_hi,support,correct,accuracy\n";
  for (const auto& b : grid.bins) {
    out += std::to_string(b.paragraph_lo) + ',' + hi(b.paragraph_hi) + ',' + std::to_string(b.mention_lo) + ',' +
           hi(b.mention_hi) + ',' + std::to_string(b.support) + ',' + std::to_string(b.correct) + ',' +
           format_number(b.accuracy) + '\n';
  }
  return out;
}

std::vector<std::size_t> parse_edges(const std::string& text) {
  std::vector<std::size_t> edges;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find(',', start);
    if (end == std::string::npos) end = text.size();
    std::size_t v = 0;
    const char* first = text.data() + start;
    const char* last = text.data() + end;
    auto [p, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || p != last) throw ConfigError("bad bin edge '" + text.substr(start, end - start) + "'");
    edges.push_back(v);
    start = end + 1;
  }
  return edges;
}

}  // namespace kalm::insight
