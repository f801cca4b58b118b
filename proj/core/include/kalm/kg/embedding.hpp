#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <unordered_map>
#include <vector>

#include "kalm/kg/knowledge_graph.hpp"
#include "kalm/num/tensor.hpp"

namespace kalm::kg {

/// Reserved relation slots that have no KG counterpart. They are stored
/// with the table but stay trainable.
enum class ReservedRelation : std::size_t { kSelf = 0, kSuper = 1, kFusion = 2 };
inline constexpr std::size_t kReservedRelationCount = 3;

struct EmbeddingTable {
  std::size_t dim = 0;
  std::vector<EntityId> entity_ids;      // row order of entity_vecs
  std::vector<RelationId> relation_ids;  // row order of relation_vecs
  num::Tensor entity_vecs;               // |E| x dim
  num::Tensor relation_vecs;             // |R| x dim
  num::Tensor reserved;                  // kReservedRelationCount x dim
  bool frozen = false;

  std::size_t entity_row(EntityId id) const;
  std::size_t relation_row(RelationId id) const;
  std::vector<double> entity_vector(EntityId id) const;
  std::vector<double> relation_vector(RelationId id) const;
  /// Rows for `ids`, stacked in order, as a constant (non-trainable) matrix.
  num::Tensor entity_rows(const std::vector<EntityId>& ids) const;

  void rebuild_index();

 private:
  std::unordered_map<EntityId, std::size_t> entity_index_;
  std::unordered_map<RelationId, std::size_t> relation_index_;
};

struct TransEConfig {
  std::size_t dim = 100;
  double margin = 1.0;
  double lr = 0.01;
  std::size_t epochs = 500;
  std::size_t negatives = 1;
  std::uint64_t seed = 0;
};

/// L2 TransE trained by SGD on the margin ranking loss
/// max(0, margin + |h + r - t| - |h' + r - t'|), where each negative
/// corrupts the head or the tail with a uniformly drawn entity. Entity rows
/// are renormalized to unit length after every epoch. The result is frozen.
EmbeddingTable train_transe(const KnowledgeGraph& kg, const TransEConfig& config,
                            std::vector<double>* epoch_loss = nullptr);

/// L2 translation distance |h + r - t|.
double transe_distance(const EmbeddingTable& table, const Triple& t);

/// Directory with entities.tnsr, relations.tnsr, reserved.tnsr and a text header kge.header.
/// Written beside the target and renamed into place.
void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& dir);
EmbeddingTable load_embeddings(const std::filesystem::path& dir);

}  // namespace kalm::kg
