#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "kalm/errors.hpp"
#include "kalm/kg/embedding.hpp"
#include "kalm/kg/khop.hpp"
#include "kalm/kg/knowledge_graph.hpp"
#include "support/support.hpp"

using namespace kalm;
using namespace kalm::kg;
using kalm::testing::bfs_oracle;
using kalm::testing::random_kg;
using kalm::testing::TempDir;

namespace {

KnowledgeGraph parse(const std::string& triples, const std::string& descriptions) {
  std::istringstream t(triples), d(descriptions);
  return parse_kg(t, d);
}

const std::string kTwoEntities = "E\t0\tkepler\ta telescope maker\nE\t1\tlens\tglass\nR\t0\tbuilds\tmakes things\n";

KnowledgeGraph chain_kg(std::size_t n) {
  KnowledgeGraph g;
  for (std::size_t i = 0; i < n; ++i) g.add_entity(EntityId(i), "c" + std::to_string(i), "");
  g.add_relation(0, "next", "successor");
  for (std::size_t i = 0; i + 1 < n; ++i) g.add_triple({EntityId(i), 0, EntityId(i + 1)});
  return g;
}

double norm(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST(KgParse, ThreeLineFile) {
  const auto g = parse("0\t0\t1\n", kTwoEntities);
  EXPECT_EQ(g.entities().size(), 2u);
  EXPECT_EQ(g.relations().size(), 1u);
  ASSERT_EQ(g.triples().size(), 1u);
  EXPECT_EQ(g.triples()[0], (Triple{0, 0, 1}));
  EXPECT_EQ(g.entity_text(0), "a telescope maker");
}

TEST(KgParse, DuplicateTriplesCollapse) {
  const auto g = parse("0\t0\t1\n\n0\t0\t1\n1\t0\t0\n", kTwoEntities);
  EXPECT_EQ(g.triples().size(), 2u);
}

TEST(KgParse, UnknownTailNamesTheLine) {
  try {
    parse("0\t0\t1\n0\t0\t9\n", kTwoEntities);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(KgParse, MalformedLinesRejected) {
  EXPECT_THROW(parse("0\t0\n", kTwoEntities), FormatError);
  EXPECT_THROW(parse("0\tx\t1\n", kTwoEntities), FormatError);
  EXPECT_THROW(parse("", "Q\t0\tname\tdesc\n"), FormatError);
}

TEST(KgParse, InvalidUtf8Rejected) {
  EXPECT_THROW(parse("", "E\t0\tbad\t\xff\xfe\n"), EncodingError);
  EXPECT_THROW(parse("0\t0\t1\xc3\n", kTwoEntities), EncodingError);
}

TEST(KgParse, EmptyDescriptionFallsBackToName) {
  const auto g = parse("", "E\t3\tvega\t\n");
  EXPECT_EQ(g.entity_text(3), "vega");
}

TEST(KgParse, SaveLoadRoundTrip) {
  const auto g = random_kg(30, 80, 5);
  TempDir dir("kg");
  save_kg(g, dir / "t.tsv", dir / "d.tsv");
  const auto back = load_kg(dir / "t.tsv", dir / "d.tsv");
  EXPECT_TRUE(back == g);
  EXPECT_EQ(format_triples(back), format_triples(g));
  EXPECT_EQ(format_descriptions(back), format_descriptions(g));
}

TEST(KgParse, MissingFileIsInputError) {
  TempDir dir("kgmissing");
  EXPECT_THROW(load_kg(dir / "none.tsv", dir / "none2.tsv"), InputError);
}

TEST(KnowledgeGraph, AdjacencyAgreesWithTriples) {
  const auto g = random_kg(25, 120, 11);
  std::set<Triple> from_triples(g.triples().begin(), g.triples().end());
  std::size_t from_adjacency = 0;
  for (const auto& [h, _] : g.entities()) {
    for (const auto& [t, __] : g.entities()) {
      for (auto r : g.relations_between(h, t)) {
        EXPECT_TRUE(from_triples.contains(Triple{h, r, t}));
        ++from_adjacency;
      }
    }
  }
  EXPECT_EQ(from_adjacency, from_triples.size());
}

TEST(KnowledgeGraph, TripleWithUndeclaredIdsRejected) {
  KnowledgeGraph g;
  g.add_entity(0, "a", "");
  g.add_relation(0, "r", "");
  EXPECT_THROW(g.add_triple({0, 0, 4}), InputError);
  EXPECT_THROW(g.add_triple({0, 2, 0}), InputError);
}

TEST(TransE, TwoEntityTripleBeatsCorruptions) {
  const auto g = parse("0\t0\t1\n", kTwoEntities);
  TransEConfig c;
  c.dim = 8;
  c.epochs = 200;
  const auto table = train_transe(g, c);
  const double pos = transe_distance(table, {0, 0, 1});
  EXPECT_LT(pos, transe_distance(table, {1, 0, 1}));
  EXPECT_LT(pos, transe_distance(table, {0, 0, 0}));
  EXPECT_TRUE(table.frozen);
}

TEST(TransE, ZeroEpochsGivesSeededUnitTable) {
  const auto g = chain_kg(5);
  TransEConfig c;
  c.dim = 2;
  c.epochs = 0;
  const auto a = train_transe(g, c), b = train_transe(g, c);
  EXPECT_EQ(a.entity_vecs.to_vector(), b.entity_vecs.to_vector());
  for (const auto& [id, _] : g.entities()) EXPECT_NEAR(norm(a.entity_vector(id)), 1.0, 1e-9);
  c.seed = 1;
  EXPECT_NE(train_transe(g, c).entity_vecs.to_vector(), a.entity_vecs.to_vector());
}

TEST(TransE, ChainScoresSeparate) {
  const auto g = chain_kg(20);
  TransEConfig c;
  c.dim = 16;
  c.epochs = 200;
  std::vector<double> losses;
  const auto table = train_transe(g, c, &losses);
  ASSERT_EQ(losses.size(), 200u);

  double pos = 0, neg = 0;
  std::size_t n_neg = 0;
  for (const auto& t : g.triples()) pos += transe_distance(table, t);
  pos /= double(g.triples().size());
  for (std::size_t h = 0; h < 20; ++h) {
    for (std::size_t t = 0; t < 20; ++t) {
      if (t == h + 1 || t == h) continue;
      neg += transe_distance(table, {EntityId(h), 0, EntityId(t)});
      ++n_neg;
    }
  }
  neg /= double(n_neg);
  EXPECT_LT(pos, neg);

  // Loss falls on average: the last 20 epochs beat the first 20.
  double early = 0, late = 0;
  for (std::size_t i = 0; i < 20; ++i) {
    early += losses[i];
    late += losses[losses.size() - 1 - i];
  }
  EXPECT_LT(late, early);
}

TEST(TransE, EntityNormsAreUnit) {
  const auto g = random_kg(40, 100, 3);
  TransEConfig c;
  c.dim = 12;
  c.epochs = 30;
  const auto table = train_transe(g, c);
  for (const auto& [id, _] : g.entities()) EXPECT_NEAR(norm(table.entity_vector(id)), 1.0, 1e-9);
}

TEST(TransE, InvalidInputsRejected) {
  KnowledgeGraph empty;
  empty.add_entity(0, "a", "");
  EXPECT_THROW(train_transe(empty, {}), InputError);
  TransEConfig c;
  c.dim = 1;
  EXPECT_THROW(train_transe(chain_kg(3), c), InputError);
}

TEST(Embeddings, SaveLoadRoundTrip) {
  const auto g = random_kg(15, 30, 2);
  TransEConfig c;
  c.dim = 6;
  c.epochs = 5;
  const auto table = train_transe(g, c);
  TempDir dir("kge");
  save_embeddings(table, dir / "kge");
  // Saving again over an existing table replaces it.
  save_embeddings(table, dir / "kge");
  const auto back = load_embeddings(dir / "kge");
  EXPECT_EQ(back.dim, table.dim);
  EXPECT_EQ(back.entity_ids, table.entity_ids);
  EXPECT_EQ(back.relation_ids, table.relation_ids);
  EXPECT_TRUE(back.frozen);
  // The payload is float32, so values survive to single precision.
  EXPECT_LT(kalm::testing::max_abs_diff(back.entity_vecs, table.entity_vecs), 1e-6);
  EXPECT_LT(kalm::testing::max_abs_diff(back.reserved, table.reserved), 1e-6);
  EXPECT_EQ(back.entity_row(table.entity_ids[3]), 3u);
}

TEST(Embeddings, UnknownIdIsInputError) {
  const auto table = train_transe(chain_kg(3), {.dim = 4, .epochs = 1});
  EXPECT_THROW(table.entity_row(77), InputError);
}

TEST(Khop, ZeroHopsIsSeedsAndTheirTriples) {
  const auto g = chain_kg(6);
  const EntityId seeds[] = {2, 3, 5};
  const auto n = khop_neighborhood(g, seeds, 0);
  EXPECT_EQ(n.entities, (std::vector<EntityId>{2, 3, 5}));
  EXPECT_EQ(n.triples, (std::vector<Triple>{{2, 0, 3}}));
}

TEST(Khop, MatchesBreadthFirstSearch) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto g = random_kg(50, 70, seed);
    num::Rng rng(seed + 100);
    const std::vector<EntityId> seeds = {EntityId(rng.index(50)), EntityId(rng.index(50)), EntityId(rng.index(50))};
    const auto n = khop_neighborhood(g, seeds, 2);
    EXPECT_EQ(n.entities, bfs_oracle(g, seeds, 2)) << "seed " << seed;

    const std::set<EntityId> inside(n.entities.begin(), n.entities.end());
    std::vector<Triple> induced;
    for (const auto& t : g.triples()) {
      if (inside.contains(t.head) && inside.contains(t.tail)) induced.push_back(t);
    }
    EXPECT_EQ(n.triples, induced);
  }
}

TEST(Khop, MonotoneInHops) {
  const auto g = random_kg(60, 80, 9);
  const EntityId seeds[] = {4, 17};
  std::vector<EntityId> prev;
  for (std::size_t k = 0; k < 6; ++k) {
    const auto cur = khop_neighborhood(g, seeds, k).entities;
    EXPECT_TRUE(std::includes(cur.begin(), cur.end(), prev.begin(), prev.end())) << "k=" << k;
    prev = cur;
  }
}

TEST(Khop, UnionOfSeedSets) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto g = random_kg(50, 60, seed + 40);
    const std::vector<EntityId> a = {1, 8}, b = {20, 33}, ab = {1, 8, 20, 33};
    const auto na = khop_neighborhood(g, a, 2).entities, nb = khop_neighborhood(g, b, 2).entities;
    std::vector<EntityId> u;
    std::set_union(na.begin(), na.end(), nb.begin(), nb.end(), std::back_inserter(u));
    EXPECT_EQ(khop_neighborhood(g, ab, 2).entities, u);
  }
}

TEST(Khop, UnknownSeedRejected) {
  const auto g = chain_kg(3);
  const EntityId seeds[] = {9};
  EXPECT_THROW(khop_neighborhood(g, seeds, 1), InputError);
}
