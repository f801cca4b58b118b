#include "kalm/kg/embedding.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "kalm/errors.hpp"
#include "kalm/num/random.hpp"
#include "kalm/num/serialize.hpp"
#include "kalm/text.hpp"

namespace kalm::kg {

namespace {

void normalize_rows(std::span<double> values, std::size_t dim) {
  for (std::size_t r = 0; r * dim < values.size(); ++r) {
    double norm = 0.0;
    for (std::size_t j = 0; j < dim; ++j) norm += values[r * dim + j] * values[r * dim + j];
    norm = std::sqrt(norm);
    if (norm == 0.0) continue;
    for (std::size_t j = 0; j < dim; ++j) values[r * dim + j] /= norm;
  }
}

std::vector<double> uniform_rows(num::Rng& rng, std::size_t rows, std::size_t dim) {
  const double bound = 6.0 / std::sqrt(static_cast<double>(dim));
  std::vector<double> v(rows * dim);
  for (auto& x : v) x = rng.uniform(-bound, bound);
  normalize_rows(v, dim);
  return v;
}

}  // namespace

std::size_t EmbeddingTable::entity_row(EntityId id) const {
  auto it = entity_index_.find(id);
  if (it == entity_index_.end()) throw InputError("entity " + std::to_string(id) + " has no embedding");
  return it->second;
}

std::size_t EmbeddingTable::relation_row(RelationId id) const {
  auto it = relation_index_.find(id);
  if (it == relation_index_.end()) throw InputError("relation " + std::to_string(id) + " has no embedding");
  return it->second;
}

std::vector<double> EmbeddingTable::entity_vector(EntityId id) const {
  const auto r = entity_row(id);
  const auto d = entity_vecs.data();
  return {d.begin() + static_cast<std::ptrdiff_t>(r * dim), d.begin() + static_cast<std::ptrdiff_t>((r + 1) * dim)};
}

std::vector<double> EmbeddingTable::relation_vector(RelationId id) const {
  const auto r = relation_row(id);
  const auto d = relation_vecs.data();
  return {d.begin() + static_cast<std::ptrdiff_t>(r * dim), d.begin() + static_cast<std::ptrdiff_t>((r + 1) * dim)};
}

num::Tensor EmbeddingTable::entity_rows(const std::vector<EntityId>& ids) const {
  if (ids.empty()) throw InputError("entity_rows: empty id list");
  std::vector<double> out;
  out.reserve(ids.size() * dim);
  for (EntityId id : ids) {
    auto v = entity_vector(id);
    out.insert(out.end(), v.begin(), v.end());
  }
  return num::Tensor::from({ids.size(), dim}, std::move(out));
}

void EmbeddingTable::rebuild_index() {
  entity_index_.clear();
  relation_index_.clear();
  for (std::size_t i = 0; i < entity_ids.size(); ++i) entity_index_[entity_ids[i]] = i;
  for (std::size_t i = 0; i < relation_ids.size(); ++i) relation_index_[relation_ids[i]] = i;
}

double transe_distance(const EmbeddingTable& table, const Triple& t) {
  const auto h = table.entity_vector(t.head);
  const auto r = table.relation_vector(t.relation);
  const auto tt = table.entity_vector(t.tail);
  double s = 0.0;
  for (std::size_t j = 0; j < table.dim; ++j) {
    const double d = h[j] + r[j] - tt[j];
    s += d * d;
  }
  return std::sqrt(s);
}

EmbeddingTable train_transe(const KnowledgeGraph& kg, const TransEConfig& config, std::vector<double>* epoch_loss) {
  if (kg.triples().empty()) throw InputError("TransE needs at least one triple");
  if (config.dim < 2) throw InputError("TransE dimension must be at least 2");
  const std::size_t dim = config.dim;
  num::Rng rng(config.seed);

  EmbeddingTable table;
  table.dim = dim;
  for (const auto& [id, _] : kg.entities()) table.entity_ids.push_back(id);
  for (const auto& [id, _] : kg.relations()) table.relation_ids.push_back(id);
  table.rebuild_index();
  const std::size_t n_ent = table.entity_ids.size();
  std::vector<double> ent = uniform_rows(rng, n_ent, dim);
  std::vector<double> rel = uniform_rows(rng, table.relation_ids.size(), dim);
  std::vector<double> reserved = uniform_rows(rng, kReservedRelationCount, dim);

  struct Indexed {
    std::size_t h, r, t;
  };
  std::vector<Indexed> triples;
  for (const auto& t : kg.triples()) {
    triples.push_back({table.entity_row(t.head), table.relation_row(t.relation), table.entity_row(t.tail)});
  }

  std::vector<double> diff_pos(dim), diff_neg(dim);
  auto distance = [&](std::size_t h, std::size_t r, std::size_t t, std::vector<double>& diff) {
    double s = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      diff[j] = ent[h * dim + j] + rel[r * dim + j] - ent[t * dim + j];
      s += diff[j] * diff[j];
    }
    return std::sqrt(s);
  };

  std::vector<std::size_t> order(triples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    for (std::size_t idx : order) {
      const auto& pos = triples[idx];
      for (std::size_t k = 0; k < config.negatives; ++k) {
        Indexed neg = pos;
        if (n_ent > 1) {
          const bool corrupt_head = rng.uniform() < 0.5;
          std::size_t& slot = corrupt_head ? neg.h : neg.t;
          const std::size_t original = slot;
          // Uniform over entities other than the original one.
          std::size_t pick = rng.index(n_ent - 1);
          slot = pick >= original ? pick + 1 : pick;
        }
        const double dp = distance(pos.h, pos.r, pos.t, diff_pos);
        const double dn = distance(neg.h, neg.r, neg.t, diff_neg);
        const double loss = config.margin + dp - dn;
        if (loss <= 0.0) continue;
        total += loss;
        const double sp = dp > 0.0 ? config.lr / dp : 0.0;
        const double sn = dn > 0.0 ? config.lr / dn : 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
          const double gp = diff_pos[j] * sp;
          const double gn = diff_neg[j] * sn;
          ent[pos.h * dim + j] -= gp;
          rel[pos.r * dim + j] -= gp;
          ent[pos.t * dim + j] += gp;
          ent[neg.h * dim + j] += gn;
          rel[neg.r * dim + j] += gn;
          ent[neg.t * dim + j] -= gn;
        }
      }
    }
    normalize_rows(ent, dim);
    if (epoch_loss) epoch_loss->push_back(total / static_cast<double>(triples.size() * config.negatives));
  }

  table.entity_vecs = num::Tensor::from({n_ent, dim}, std::move(ent));
  table.relation_vecs = num::Tensor::from({table.relation_ids.size(), dim}, std::move(rel));
  table.reserved = num::Tensor::from({kReservedRelationCount, dim}, std::move(reserved));
  table.frozen = true;
  return table;
}

void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  const fs::path tmp = dir.string() + ".tmp";
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  num::save_tensor(tmp / "entities.tnsr", table.entity_vecs);
  num::save_tensor(tmp / "relations.tnsr", table.relation_vecs);
  num::save_tensor(tmp / "reserved.tnsr", table.reserved);
  std::ostringstream os;
  os << "dim " << table.dim << "\n";
  os << "entities " << table.entity_ids.size() << "\n";
  os << "relations " << table.relation_ids.size() << "\n";
  os << "frozen " << (table.frozen ? 1 : 0) << "\n";
  os << "entity_ids";
  for (auto id : table.entity_ids) os << ' ' << id;
  os << "\nrelation_ids";
  for (auto id : table.relation_ids) os << ' ' << id;
  os << "\n";
  write_file_atomic(tmp / "kge.header", os.str());
  fs::remove_all(dir);
  fs::rename(tmp, dir);
}

EmbeddingTable load_embeddings(const std::filesystem::path& dir) {
  EmbeddingTable table;
  std::istringstream header(read_file(dir / "kge.header"));
  std::string line;
  std::size_t n_ent = 0, n_rel = 0;
  while (std::getline(header, line)) {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "dim") {
      ls >> table.dim;
    } else if (key == "entities") {
      ls >> n_ent;
    } else if (key == "relations") {
      ls >> n_rel;
    } else if (key == "frozen") {
      int f = 0;
      ls >> f;
      table.frozen = f != 0;
    } else if (key == "entity_ids") {
      EntityId id;
      while (ls >> id) table.entity_ids.push_back(id);
    } else if (key == "relation_ids") {
      RelationId id;
      while (ls >> id) table.relation_ids.push_back(id);
    } else if (!key.empty()) {
      throw FormatError("kge.header: unknown key '" + key + "'");
    }
  }
  if (table.entity_ids.size() != n_ent || table.relation_ids.size() != n_rel) {
    throw FormatError("kge.header: id lists disagree with counts");
  }
  table.entity_vecs = num::load_tensor(dir / "entities.tnsr");
  table.relation_vecs = num::load_tensor(dir / "relations.tnsr");
  table.reserved = num::load_tensor(dir / "reserved.tnsr");
  if (table.entity_vecs.shape() != num::Shape{n_ent, table.dim} ||
      table.relation_vecs.shape() != num::Shape{n_rel, table.dim} ||
      table.reserved.shape() != num::Shape{kReservedRelationCount, table.dim}) {
    throw FormatError("embedding tensors do not match kge.header");
  }
  table.rebuild_index();
  return table;
}

}  // namespace kalm::kg
