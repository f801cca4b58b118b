#include "kalm/contexts/document.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "kalm/errors.hpp"
#include "kalm/text.hpp"

namespace kalm::ctx {

using nlohmann::json;

std::vector<kg::EntityId> DocumentRecord::mentioned_entities() const {
  std::vector<kg::EntityId> out;
  std::unordered_set<kg::EntityId> seen;
  for (const auto& p : paragraphs)
    for (auto e : p.mentions)
      if (seen.insert(e).second) out.push_back(e);
  return out;
}

void validate(const DocumentRecord& doc, const kg::KnowledgeGraph& kg) {
  if (doc.paragraphs.empty()) throw InputError("document " + doc.doc_id + " has no paragraphs");
  for (std::size_t i = 0; i < doc.paragraphs.size(); ++i) {
    for (auto e : doc.paragraphs[i].mentions) {
      if (!kg.has_entity(e)) {
        throw InputError("document " + doc.doc_id + " paragraph " + std::to_string(i) + " mentions unknown entity " +
                         std::to_string(e));
      }
    }
  }
}

std::vector<std::string> augment_paragraph(const std::vector<std::string>& tokens,
                                           const std::vector<kg::EntityId>& mentions, const kg::KnowledgeGraph& kg) {
  std::vector<std::string> out = tokens;
  std::unordered_set<kg::EntityId> seen;
  for (auto e : mentions) {
    if (!seen.insert(e).second) continue;
    out.emplace_back(kDescriptionSeparator);
    for (auto& t : split_whitespace(kg.entity_text(e))) out.push_back(std::move(t));
  }
  return out;
}

std::string format_document(const DocumentRecord& doc) {
  json paragraphs = json::array();
  for (const auto& p : doc.paragraphs) {
    paragraphs.push_back(json{{"tokens", p.tokens}, {"mentions", p.mentions}});
  }
  json j{{"doc_id", doc.doc_id}, {"label", doc.label}, {"paragraphs", std::move(paragraphs)}};
  return j.dump();
}

DocumentRecord parse_document(std::string_view line) {
  if (!is_valid_utf8(line)) throw EncodingError("corpus record is not valid UTF-8");
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("corpus record: ") + e.what());
  }
  DocumentRecord doc;
  try {
    doc.doc_id = j.at("doc_id").get<std::string>();
    doc.label = j.at("label").get<std::size_t>();
    for (const auto& p : j.at("paragraphs")) {
      Paragraph para;
      para.tokens = p.at("tokens").get<std::vector<std::string>>();
      para.mentions = p.at("mentions").get<std::vector<kg::EntityId>>();
      doc.paragraphs.push_back(std::move(para));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("corpus record: ") + e.what());
  }
  return doc;
}

std::string format_corpus(const std::vector<DocumentRecord>& docs) {
  std::string out;
  for (const auto& d : docs) {
    out += format_document(d);
    out += '\n';
  }
  return out;
}

std::vector<DocumentRecord> parse_corpus(std::string_view text) {
  std::vector<DocumentRecord> docs;
  std::size_t lineno = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++lineno;
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    start = end + 1;
    if (line.empty()) continue;
    try {
      docs.push_back(parse_document(line));
    } catch (const FormatError& e) {
      throw FormatError("corpus line " + std::to_string(lineno) + ": " + e.what());
    } catch (const EncodingError& e) {
      throw EncodingError("corpus line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return docs;
}

void save_corpus(const std::vector<DocumentRecord>& docs, const std::filesystem::path& path) {
  write_file_atomic(path, format_corpus(docs));
}

std::vector<DocumentRecord> load_corpus(const std::filesystem::path& path) { return parse_corpus(read_file(path)); }

}  // namespace kalm::ctx
