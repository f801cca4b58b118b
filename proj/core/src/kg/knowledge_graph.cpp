#include "kalm/kg/knowledge_graph.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>

#include "kalm/errors.hpp"
#include "kalm/text.hpp"

namespace kalm::kg {

namespace {

void insert_sorted_unique(std::vector<EntityId>& v, EntityId x) {
  auto it = std::lower_bound(v.begin(), v.end(), x);
  if (it == v.end() || *it != x) v.insert(it, x);
}

std::uint32_t parse_id(const std::string& field, const std::string& where) {
  std::uint32_t v = 0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc() || ptr != end || field.empty()) throw FormatError(where + ": invalid id '" + field + "'");
  return v;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace

void KnowledgeGraph::add_entity(EntityId id, std::string name, std::string description) {
  entities_[id] = Described{std::move(name), std::move(description)};
}

void KnowledgeGraph::add_relation(RelationId id, std::string name, std::string description) {
  relations_[id] = Described{std::move(name), std::move(description)};
}

bool KnowledgeGraph::add_triple(const Triple& t) {
  if (!has_entity(t.head)) throw InputError("triple head " + std::to_string(t.head) + " is not a known entity");
  if (!has_entity(t.tail)) throw InputError("triple tail " + std::to_string(t.tail) + " is not a known entity");
  if (!has_relation(t.relation)) {
    throw InputError("triple relation " + std::to_string(t.relation) + " is not a known relation");
  }
  auto it = std::lower_bound(triples_.begin(), triples_.end(), t);
  if (it != triples_.end() && *it == t) return false;
  triples_.insert(it, t);
  auto& rels = adjacency_[{t.head, t.tail}];
  rels.insert(std::lower_bound(rels.begin(), rels.end(), t.relation), t.relation);
  insert_sorted_unique(undirected_[t.head], t.tail);
  insert_sorted_unique(undirected_[t.tail], t.head);
  return true;
}

bool KnowledgeGraph::has_triple(const Triple& t) const {
  return std::binary_search(triples_.begin(), triples_.end(), t);
}

const std::string& KnowledgeGraph::entity_text(EntityId id) const {
  auto it = entities_.find(id);
  if (it == entities_.end()) throw InputError("unknown entity " + std::to_string(id));
  return it->second.description.empty() ? it->second.name : it->second.description;
}

const std::string& KnowledgeGraph::relation_text(RelationId id) const {
  auto it = relations_.find(id);
  if (it == relations_.end()) throw InputError("unknown relation " + std::to_string(id));
  return it->second.description.empty() ? it->second.name : it->second.description;
}

const std::string& KnowledgeGraph::entity_name(EntityId id) const {
  auto it = entities_.find(id);
  if (it == entities_.end()) throw InputError("unknown entity " + std::to_string(id));
  return it->second.name;
}

std::vector<RelationId> KnowledgeGraph::relations_between(EntityId head, EntityId tail) const {
  auto it = adjacency_.find({head, tail});
  return it == adjacency_.end() ? std::vector<RelationId>{} : it->second;
}

const std::vector<EntityId>& KnowledgeGraph::neighbors(EntityId id) const {
  static const std::vector<EntityId> kNone;
  auto it = undirected_.find(id);
  return it == undirected_.end() ? kNone : it->second;
}

KnowledgeGraph parse_kg(std::istream& triples, std::istream& descriptions) {
  KnowledgeGraph kg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(descriptions, line)) {
    ++lineno;
    line = strip_cr(std::move(line));
    const std::string where = "descriptions line " + std::to_string(lineno);
    if (!is_valid_utf8(line)) throw EncodingError(where + ": invalid UTF-8");
    if (line.empty()) continue;
    auto f = split_tabs(line, 4);
    if (f.size() < 3) throw FormatError(where + ": expected kind<TAB>id<TAB>name<TAB>description");
    const std::string desc = f.size() == 4 ? f[3] : std::string{};
    const auto id = parse_id(f[1], where);
    if (f[0] == "E") {
      kg.add_entity(id, f[2], desc);
    } else if (f[0] == "R") {
      kg.add_relation(id, f[2], desc);
    } else {
      throw FormatError(where + ": kind must be E or R, got '" + f[0] + "'");
    }
  }
  lineno = 0;
  while (std::getline(triples, line)) {
    ++lineno;
    line = strip_cr(std::move(line));
    const std::string where = "triples line " + std::to_string(lineno);
    if (!is_valid_utf8(line)) throw EncodingError(where + ": invalid UTF-8");
    if (line.empty()) continue;
    auto f = split_tabs(line);
    if (f.size() != 3) throw FormatError(where + ": expected head<TAB>relation<TAB>tail");
    const Triple t{parse_id(f[0], where), parse_id(f[1], where), parse_id(f[2], where)};
    if (!kg.has_entity(t.head)) throw FormatError(where + ": unknown head entity " + f[0]);
    if (!kg.has_relation(t.relation)) throw FormatError(where + ": unknown relation " + f[1]);
    if (!kg.has_entity(t.tail)) throw FormatError(where + ": unknown tail entity " + f[2]);
    kg.add_triple(t);
  }
  return kg;
}

KnowledgeGraph load_kg(const std::filesystem::path& triples_path, const std::filesystem::path& descriptions_path) {
  std::ifstream t(triples_path, std::ios::binary);
  if (!t) throw InputError("cannot open " + triples_path.string());
  std::ifstream d(descriptions_path, std::ios::binary);
  if (!d) throw InputError("cannot open " + descriptions_path.string());
  return parse_kg(t, d);
}

std::string format_triples(const KnowledgeGraph& kg) {
  std::ostringstream os;
  for (const auto& t : kg.triples()) os << t.head << '\t' << t.relation << '\t' << t.tail << '\n';
  return os.str();
}

std::string format_descriptions(const KnowledgeGraph& kg) {
  std::ostringstream os;
  for (const auto& [id, e] : kg.entities()) os << "E\t" << id << '\t' << e.name << '\t' << e.description << '\n';
  for (const auto& [id, r] : kg.relations()) os << "R\t" << id << '\t' << r.name << '\t' << r.description << '\n';
  return os.str();
}

void save_kg(const KnowledgeGraph& kg, const std::filesystem::path& triples_path,
             const std::filesystem::path& descriptions_path) {
  write_file_atomic(triples_path, format_triples(kg));
  write_file_atomic(descriptions_path, format_descriptions(kg));
}

}  // namespace kalm::kg
