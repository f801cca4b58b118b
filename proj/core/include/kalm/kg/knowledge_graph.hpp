#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace kalm::kg {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

struct Triple {
  EntityId head = 0;
  RelationId relation = 0;
  EntityId tail = 0;
  auto operator<=>(const Triple&) const = default;
};

struct Described {
  std::string name;
  std::string description;
  bool operator==(const Described&) const = default;
};

/// Entities, typed relations, triples and their textual descriptions.
///
/// Ids are caller-chosen. Every triple must reference declared ids, and
/// duplicate triples collapse to one. The adjacency view is a sparse map
/// (head, tail) -> relation ids, kept consistent with the triple set.
class KnowledgeGraph {
 public:
  void add_entity(EntityId id, std::string name, std::string description);
  void add_relation(RelationId id, std::string name, std::string description);
  /// Returns false when the triple was already present.
  bool add_triple(const Triple& t);

  const std::map<EntityId, Described>& entities() const { return entities_; }
  const std::map<RelationId, Described>& relations() const { return relations_; }
  /// Sorted, duplicate-free.
  const std::vector<Triple>& triples() const { return triples_; }

  bool has_entity(EntityId id) const { return entities_.contains(id); }
  bool has_relation(RelationId id) const { return relations_.contains(id); }
  bool has_triple(const Triple& t) const;

  /// Textual description of an entity; its name when the description is empty.
  const std::string& entity_text(EntityId id) const;
  const std::string& relation_text(RelationId id) const;
  const std::string& entity_name(EntityId id) const;

  /// Relation ids k with (head, r_k, tail) in the graph.
  std::vector<RelationId> relations_between(EntityId head, EntityId tail) const;
  /// Entities adjacent to `id` in either direction, sorted.
  const std::vector<EntityId>& neighbors(EntityId id) const;

  bool operator==(const KnowledgeGraph& other) const {
    return entities_ == other.entities_ && relations_ == other.relations_ && triples_ == other.triples_;
  }

 private:
  std::map<EntityId, Described> entities_;
  std::map<RelationId, Described> relations_;
  std::vector<Triple> triples_;
  std::map<std::pair<EntityId, EntityId>, std::vector<RelationId>> adjacency_;
  std::map<EntityId, std::vector<EntityId>> undirected_;
};

/// Triples: `head<TAB>relation<TAB>tail` per line.
/// Descriptions: `E|R<TAB>id<TAB>name<TAB>description` per line.
/// Blank lines are skipped. Errors name the file and 1-based line.
KnowledgeGraph parse_kg(std::istream& triples, std::istream& descriptions);
KnowledgeGraph load_kg(const std::filesystem::path& triples_path, const std::filesystem::path& descriptions_path);

std::string format_triples(const KnowledgeGraph& kg);
std::string format_descriptions(const KnowledgeGraph& kg);
void save_kg(const KnowledgeGraph& kg, const std::filesystem::path& triples_path,
             const std::filesystem::path& descriptions_path);

}  // namespace kalm::kg
