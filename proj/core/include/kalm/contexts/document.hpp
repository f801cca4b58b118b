#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "kalm/kg/knowledge_graph.hpp"

namespace kalm::ctx {

struct Paragraph {
  std::vector<std::string> tokens;
  std::vector<kg::EntityId> mentions;  // pre-linked, in mention order
  bool operator==(const Paragraph&) const = default;
};

struct DocumentRecord {
  std::string doc_id;
  std::vector<Paragraph> paragraphs;
  std::size_t label = 0;

  /// All mentioned entities, deduplicated, in first-mention order.
  std::vector<kg::EntityId> mentioned_entities() const;
  bool operator==(const DocumentRecord&) const = default;
};

/// Throws InputError if the document has no paragraphs or mentions an entity unknown to `kg`.
void validate(const DocumentRecord& doc, const kg::KnowledgeGraph& kg);

/// Token placed between a paragraph and each appended entity description.
inline constexpr std::string_view kDescriptionSeparator = "[ENT]";

/// Original tokens, then for every distinct mentioned entity (first-mention
/// order) the separator followed by the tokens of its description.
std::vector<std::string> augment_paragraph(const std::vector<std::string>& tokens,
                                           const std::vector<kg::EntityId>& mentions, const kg::KnowledgeGraph& kg);

// Corpus file: one JSON object per line,
//   {"doc_id": "...", "label": 0, "paragraphs": [{"tokens": [...], "mentions": [...]}]}
std::string format_document(const DocumentRecord& doc);
DocumentRecord parse_document(std::string_view line);
std::string format_corpus(const std::vector<DocumentRecord>& docs);
std::vector<DocumentRecord> parse_corpus(std::string_view text);
void save_corpus(const std::vector<DocumentRecord>& docs, const std::filesystem::path& path);
std::vector<DocumentRecord> load_corpus(const std::filesystem::path& path);

}  // namespace kalm::ctx
