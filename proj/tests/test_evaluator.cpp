/*
 * Copyright 2026 The hkgx Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <sstream>

#include "hkgx/evaluator.hpp"
#include "oracles.hpp"

using namespace hkgx;
using nn::Matrix;

namespace {

HyperFact fact(int s, int r, int o, std::vector<std::pair<int, int>> q = {}) {
  HyperFact f{EntityId(s), RelationId(r), EntityId(o), {}};
  for (auto [a, v] : q) f.qualifiers.push_back({RelationId(a), EntityId(v)});
  return f;
}

HkgDataset idDataset(const std::vector<std::pair<Split, HyperFact>>& facts) {
  DatasetBuilder b;
  for (const auto& [s, f] : facts) {
    LabeledFact l{"e" + std::to_string(f.subject.value), "r" + std::to_string(f.relation.value),
                  "e" + std::to_string(f.object.value), {}};
    for (const auto& q : f.qualifiers) {
      l.qualifiers.emplace_back("r" + std::to_string(q.attribute.value), "e" + std::to_string(q.value.value));
    }
    b.add(s, l);
  }
  return std::move(b).build();
}

// Entities that complete (f, p) into a stored fact, by trying every entity.
std::vector<std::int32_t> bruteCompletions(const HyperFact& f, std::size_t p, std::size_t numEntities,
                                           const std::vector<HyperFact>& known) {
  std::vector<std::int32_t> out;
  for (std::size_t e = 0; e < numEntities; ++e) {
    auto g = f;
    g.setEntityAt(p, EntityId(static_cast<std::int32_t>(e)));
    if (oracle::knownFact(g, known)) out.push_back(static_cast<std::int32_t>(e));
  }
  return out;
}

std::vector<HyperFact> allFacts(const HkgDataset& ds) {
  std::vector<HyperFact> out;
  for (auto s : {Split::train, Split::valid, Split::test}) {
    for (const auto& f : ds.facts(s)) out.push_back(f);
  }
  return out;
}

}  // namespace

TEST(FilterIndex, ObjectPatternHoldsBothObjects) {
  FilterIndex idx;
  idx.add(fact(0, 0, 1));
  idx.add(fact(0, 0, 2));
  auto* objs = idx.find(fact(0, 0, 7), 1);
  ASSERT_NE(objs, nullptr);
  EXPECT_EQ(*objs, (std::vector<std::int32_t>{1, 2}));
  EXPECT_EQ(*idx.find(fact(0, 0, 1), 0), (std::vector<std::int32_t>{0}));
}

TEST(FilterIndex, UniqueFactHasSingletons) {
  FilterIndex idx;
  auto f = fact(3, 1, 4, {{2, 5}, {0, 6}});
  idx.add(f);
  idx.add(fact(9, 2, 8));
  for (std::size_t p = 0; p < f.numPositions(); ++p) {
    auto* s = idx.find(f, p);
    ASSERT_NE(s, nullptr);
    EXPECT_EQ(s->size(), 1u);
  }
}

TEST(FilterIndex, QualifierOrderIrrelevant) {
  FilterIndex idx;
  idx.add(fact(0, 0, 1, {{2, 5}, {1, 6}}));
  auto q = canonicalized(fact(0, 0, 1, {{1, 6}, {2, 9}}));
  // Position 3 is the (2, .) qualifier after canonical ordering.
  auto* s = idx.find(q, 3);
  ASSERT_NE(s, nullptr);
  EXPECT_EQ(*s, (std::vector<std::int32_t>{5}));
}

TEST(FilterIndex, ArityIsPartOfThePattern) {
  FilterIndex idx;
  idx.add(fact(0, 0, 1, {{2, 5}}));
  EXPECT_EQ(idx.find(fact(0, 0, 1), 1), nullptr);
}

TEST(FilterIndex, MatchesBruteForce) {
  RngStream rng(1, "filter");
  for (int trial = 0; trial < 5; ++trial) {
    oracle::GenOptions o;
    o.minFacts = 80;
    o.maxFacts = 120;
    o.numEntities = 12;
    o.numRelations = 3;
    o.maxQualifiers = 3;
    o.splitAcross = true;
    auto ds = oracle::randomDataset(rng, o);
    auto idx = buildFilterIndex(ds);
    auto known = allFacts(ds);
    std::size_t memberships = 0;
    std::set<FilterIndex::Key> keys;
    for (const auto& f : known) {
      for (std::size_t p = 0; p < f.numPositions(); ++p) {
        auto want = bruteCompletions(f, p, ds.numEntities(), known);
        auto* got = idx.find(f, p);
        ASSERT_NE(got, nullptr);
        EXPECT_EQ(*got, want);
        if (keys.insert(FilterIndex::key(f, p)).second) memberships += want.size();
      }
    }
    EXPECT_EQ(idx.size(), keys.size());
    EXPECT_EQ(idx.memberships(), memberships);
  }
}

TEST(RankGold, StrictlyHighestIsRankOne) {
  auto [rank, raw] = rankGold({0.1, 0.9, 0.3}, 1, nullptr);
  EXPECT_EQ(rank, 1);
  EXPECT_EQ(raw, 1);
}

TEST(RankGold, TiesArePessimistic) {
  auto [rank, raw] = rankGold({0.5, 0.5, 0.5, 0.1}, 1, nullptr);
  EXPECT_EQ(rank, 3);
  EXPECT_EQ(raw, 3);
}

TEST(RankGold, KnownCompletionsAreSkipped) {
  std::vector<std::int32_t> known{0, 2, 3};
  auto [rank, raw] = rankGold({0.9, 0.1, 0.8, 0.7, 0.6}, 3, &known);
  EXPECT_EQ(raw, 3);
  EXPECT_EQ(rank, 1);
}

TEST(RankGold, ShiftInvariance) {
  RngStream rng(2, "shift");
  for (int i = 0; i < 200; ++i) {
    std::vector<double> s(30);
    for (auto& x : s) x = static_cast<double>(rng.below(7));  // integers: exact shifts and ties
    std::vector<std::int32_t> known;
    for (std::int32_t c = 0; c < 30; ++c) {
      if (rng.uniform() < 0.2) known.push_back(c);
    }
    const auto gold = static_cast<std::int32_t>(rng.below(30));
    const double shift = static_cast<double>(rng.below(1000)) - 500.0;
    auto shifted = s;
    for (auto& x : shifted) x += shift;
    EXPECT_EQ(rankGold(s, gold, &known), rankGold(shifted, gold, &known));
  }
}

TEST(Metrics, Example) {
  auto r = summarize({{0, 0, 0, 1, 1}, {0, 1, 0, 2, 2}, {1, 0, 0, 4, 4}});
  EXPECT_NEAR(r.overall.mrr, 0.58333, 1e-5);
  EXPECT_DOUBLE_EQ(r.overall.mrr, (1.0 + 0.5 + 0.25) / 3.0);
  EXPECT_DOUBLE_EQ(r.overall.hits3, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.overall.hits1, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.overall.hits10, 1.0);
  EXPECT_EQ(r.byPosition.at("subject").count, 2u);
  EXPECT_EQ(r.byPosition.at("object").count, 1u);
  auto j = r.toJson();
  EXPECT_EQ(j["overall"]["count"], 3);
  EXPECT_TRUE(j["overall"].contains("hits@10"));
}

TEST(Metrics, CsvHeader) {
  auto r = summarize({{0, 2, 1, 5, 7}});
  std::ostringstream out;
  r.writeRanksCsv(out);
  EXPECT_EQ(out.str(), "fact,position,arity,rank,raw_rank\n0,2,1,5,7\n");
  EXPECT_EQ(r.byPosition.count("value"), 1u);
  EXPECT_EQ(r.byArity.count(1), 1u);
}

class EvaluateCorpus : public ::testing::Test {
 protected:
  void SetUp() override {
    RngStream rng(3, "corpus");
    std::vector<std::pair<Split, HyperFact>> facts;
    std::set<std::string> seen;
    // Twenty facts over a small vocabulary so filtering and ties matter.
    while (facts.size() < 20) {
      auto e = [&] { return static_cast<int>(rng.below(6)); };
      auto f = fact(e(), static_cast<int>(rng.below(2)), e());
      const auto n = rng.below(3);
      for (std::uint64_t i = 0; i < n; ++i) f.qualifiers.push_back({RelationId(2 + static_cast<int>(i)), EntityId(e())});
      if (rng.uniform() < 0.5) {
        // Near-duplicates that differ in one slot.
        auto g = f;
        g.setEntityAt(rng.below(g.numPositions()), EntityId(e()));
        facts.emplace_back(Split::train, g);
      }
      facts.emplace_back(facts.size() % 3 == 0 ? Split::test : Split::train, f);
    }
    ds = idDataset(facts);
    RngStream emb(4, "emb");
    E = Matrix(static_cast<Eigen::Index>(ds.numEntities()), 3);
    R = Matrix(static_cast<Eigen::Index>(ds.numRelations()), 3);
    for (Eigen::Index i = 0; i < E.size(); ++i) E.data()[i] = static_cast<double>(emb.below(3)) - 1.0;
    for (Eigen::Index i = 0; i < R.size(); ++i) R.data()[i] = static_cast<double>(emb.below(3));
  }

  HkgDataset ds;
  Matrix E, R;
};

TEST_F(EvaluateCorpus, MatchesBruteForceOracle) {
  auto idx = buildFilterIndex(ds);
  const auto& test = ds.facts(Split::test);
  ScoringView view{&E, &R, nullptr, RelationPooling::sum};
  auto report = evaluate(view, test, idx, ds.numEntities());
  auto want = oracle::bruteForceRanks(test, allFacts(ds), ds.numEntities(),
                                      [&](const HyperFact& f) { return oracle::mdistmult(f, E, R, false); });
  ASSERT_EQ(report.ranks.size(), want.size());
  std::size_t ties = 0;
  for (std::size_t i = 0; i < want.size(); ++i) {
    EXPECT_EQ(report.ranks[i].rank, want[i]) << "query " << i;
    ties += report.ranks[i].rawRank > 1;
  }
  EXPECT_GT(ties, 0u);
}

TEST_F(EvaluateCorpus, Invariants) {
  auto idx = buildFilterIndex(ds);
  const auto& test = ds.facts(Split::test);
  ScoringView view{&E, &R, nullptr, RelationPooling::mean};
  auto report = evaluate(view, test, idx, ds.numEntities());

  std::size_t expected = 0;
  for (const auto& f : test) expected += f.arity() + 2;
  EXPECT_EQ(report.ranks.size(), expected);

  double mrr = 0, h1 = 0, h3 = 0, h10 = 0;
  for (const auto& q : report.ranks) {
    EXPECT_LE(q.rank, q.rawRank);
    EXPECT_GE(q.rank, 1);
    EXPECT_EQ(q.arity, test[q.fact].arity());
    mrr += 1.0 / static_cast<double>(q.rank);
    h1 += q.rank <= 1;
    h3 += q.rank <= 3;
    h10 += q.rank <= 10;
  }
  const double n = static_cast<double>(report.ranks.size());
  EXPECT_NEAR(report.overall.mrr, mrr / n, 1e-12);
  EXPECT_NEAR(report.overall.hits1, h1 / n, 1e-12);
  EXPECT_NEAR(report.overall.hits3, h3 / n, 1e-12);
  EXPECT_NEAR(report.overall.hits10, h10 / n, 1e-12);
  std::size_t byPos = 0;
  for (const auto& [k, m] : report.byPosition) byPos += m.count;
  EXPECT_EQ(byPos, report.ranks.size());
}

TEST_F(EvaluateCorpus, ThreadCountDoesNotChangeResults) {
  auto idx = buildFilterIndex(ds);
  std::vector<HyperFact> queries;
  for (const auto& f : allFacts(ds)) queries.push_back(f);
  ScoringView view{&E, &R, nullptr, RelationPooling::mean};
  auto one = evaluate(view, queries, idx, ds.numEntities(), 1);
  for (unsigned t : {2u, 3u, 8u}) {
    auto many = evaluate(view, queries, idx, ds.numEntities(), t);
    ASSERT_EQ(many.ranks.size(), one.ranks.size());
    for (std::size_t i = 0; i < one.ranks.size(); ++i) {
      EXPECT_EQ(many.ranks[i].rank, one.ranks[i].rank);
      EXPECT_EQ(many.ranks[i].fact, one.ranks[i].fact);
      EXPECT_EQ(many.ranks[i].position, one.ranks[i].position);
    }
    EXPECT_EQ(many.overall.mrr, one.overall.mrr);
  }
}

TEST_F(EvaluateCorpus, EqualScoresRankBelowUnknownCandidates) {
  // With all scores equal, the filtered rank counts unknown completions only.
  Matrix zeros = Matrix::Zero(E.rows(), E.cols());
  ScoringView view{&zeros, &R, nullptr, RelationPooling::mean};
  auto idx = buildFilterIndex(ds);
  auto report = evaluate(view, ds.facts(Split::train), idx, ds.numEntities());
  const auto known = allFacts(ds);
  for (const auto& q : report.ranks) {
    auto f = canonicalized(ds.facts(Split::train)[q.fact]);
    auto completions = bruteCompletions(f, q.position, ds.numEntities(), known);
    EXPECT_EQ(q.rank, static_cast<std::int64_t>(ds.numEntities() - completions.size() + 1));
    EXPECT_EQ(q.rawRank, static_cast<std::int64_t>(ds.numEntities()));
  }
}

TEST(Evaluate, RejectsNonCandidateGold) {
  Matrix E = Matrix::Ones(4, 2);
  Matrix R = Matrix::Ones(1, 2);
  FilterIndex idx;
  std::vector<HyperFact> q{fact(0, 0, 3)};
  EXPECT_THROW(evaluate({&E, &R, nullptr, RelationPooling::mean}, q, idx, 3), VocabularyError);
}
