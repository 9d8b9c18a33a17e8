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

#include <cmath>
#include <sstream>

#include "hkgx/hkgx.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace hkgx;

namespace {

using fixture::tenFacts;
using fixture::toy;

RunConfig smallRun() {
  RunConfig c;
  c.encoder.dim = 16;
  c.encoder.layers = 1;
  c.encoder.dropout = 0.0;
  c.train.batchSize = 16;
  c.train.negatives = 4;
  c.train.lr = 0.01;
  c.train.epochs = 6;
  c.train.evalEvery = 2;
  c.train.seed = 5;
  return c;
}

std::string bytes(const Checkpoint& c) {
  std::ostringstream out(std::ios::binary);
  writeCheckpoint(c, out);
  return out.str();
}

}  // namespace

TEST(SampleNegatives, TripleCountsAndInequality) {
  RngStream rng(1, "neg");
  HyperFact f{EntityId(3), RelationId(0), EntityId(5), {}};
  auto negs = sampleNegatives(f, 2, 10, rng);
  ASSERT_EQ(negs.size(), 4u);
  for (std::size_t i = 0; i < negs.size(); ++i) {
    EXPECT_NE(negs[i], f);
    const std::size_t pos = i / 2;
    for (std::size_t p = 0; p < 2; ++p) {
      if (p == pos) EXPECT_NE(negs[i].entityAt(p), f.entityAt(p));
      else EXPECT_EQ(negs[i].entityAt(p), f.entityAt(p));
    }
  }
}

TEST(SampleNegatives, OnePerPosition) {
  RngStream rng(2, "neg");
  HyperFact f{EntityId(0), RelationId(0), EntityId(1), {{RelationId(1), EntityId(2)}, {RelationId(2), EntityId(3)}}};
  auto negs = sampleNegatives(f, 1, 10, rng);
  ASSERT_EQ(negs.size(), 4u);
  for (std::size_t p = 0; p < 4; ++p) EXPECT_NE(negs[p].entityAt(p), f.entityAt(p));
}

TEST(SampleNegatives, UniformOverWrongEntities) {
  RngStream rng(3, "freq");
  HyperFact f{EntityId(4), RelationId(0), EntityId(7), {}};
  const int draws = 100000;
  std::vector<std::vector<int>> counts(2, std::vector<int>(10, 0));
  for (int i = 0; i < draws; ++i) {
    auto negs = sampleNegatives(f, 1, 10, rng);
    for (std::size_t p = 0; p < 2; ++p) ++counts[p][static_cast<std::size_t>(negs[p].entityAt(p).value)];
  }
  for (std::size_t p = 0; p < 2; ++p) {
    for (int e = 0; e < 10; ++e) {
      const double freq = counts[p][static_cast<std::size_t>(e)] / static_cast<double>(draws);
      if (e == f.entityAt(p).value) EXPECT_EQ(freq, 0.0);
      else EXPECT_NEAR(freq, 1.0 / 9.0, 0.01) << "position " << p << " entity " << e;
    }
  }
}

TEST(SampleNegatives, NeedsTwoEntities) {
  RngStream rng(4, "neg");
  EXPECT_THROW(sampleNegatives(HyperFact{EntityId(0), RelationId(0), EntityId(0), {}}, 1, 1, rng), DataError);
}

TEST(Loss, Examples) {
  std::vector<double> one{0.0};
  EXPECT_NEAR(lossForFact(0.0, one), std::log(2.0), 1e-15);
  EXPECT_NEAR(lossForFact(0.0, one), 0.693147, 1e-6);
  std::vector<double> k(7, 1.5);
  EXPECT_NEAR(lossForFact(1.5, k), std::log(8.0), 1e-14);
  std::vector<double> low(5, -10.0);
  EXPECT_NEAR(lossForFact(10.0, low), std::log1p(5.0 * std::exp(-20.0)), 1e-14);
  EXPECT_EQ(lossForFact(3.0, {}), 0.0);
}

TEST(Loss, MarginBound) {
  RngStream rng(5, "margin");
  for (int i = 0; i < 500; ++i) {
    const std::size_t positions = 2 + rng.below(5);
    const std::size_t k = 1 + rng.below(10);
    const double m = rng.uniform(0.0, 20.0);
    const double pos = rng.uniform(-50, 50);
    std::vector<double> negs(positions * k);
    for (auto& s : negs) s = pos - m - rng.uniform(0.0, 5.0);
    const double loss = lossForFact(pos, negs);
    EXPECT_GE(loss, 0.0);
    EXPECT_LE(loss, static_cast<double>(positions * k) * std::exp(-m) * (1 + 1e-12));
  }
}

TEST(Loss, MatchesTapeSoftmax) {
  nn::Tape t;
  auto s = t.constant(nn::Matrix{{1.0}, {2.0}, {-1.0}});
  auto l = nn::softmaxCrossEntropy(t, s, {{0, 3}});
  std::vector<double> negs{2.0, -1.0};
  EXPECT_NEAR(t.value(l)(0, 0), lossForFact(1.0, negs), 1e-14);
}

TEST(Train, SingleStepDecreasesFactLoss) {
  auto ds = tenFacts();
  auto cfg = smallRun();
  cfg.train.lr = 1e-4;
  for (std::size_t i = 0; i < ds.train.size(); ++i) {
    auto model = buildModel(ds, cfg);
    nn::Adam opt(model.parameters(), {.lr = cfg.train.lr});
    std::vector<HyperFact> batch{ds.train[i]};
    auto lossAt = [&](bool step) {
      nn::Tape t;
      RngStream drop(0, "d");
      RngStream negRng(9, "neg");
      auto fw = model.forward(t, nn::Mode::train, drop);
      auto loss = batchLoss(t, fw, batch, 5, ds.numEntities(), cfg.decoder.pooling, negRng);
      if (step) {
        opt.zeroGrad();
        t.backward(loss);
        opt.step();
      }
      return t.value(loss)(0, 0);
    };
    const double before = lossAt(true);
    const double after = lossAt(false);
    EXPECT_LT(after, before) << "fact " << i;
  }
}

TEST(Train, OverfitsTenFacts) {
  auto ds = tenFacts();
  RunConfig cfg;
  cfg.encoder.dim = 32;
  cfg.encoder.layers = 1;
  cfg.encoder.dropout = 0.0;
  cfg.train.batchSize = 10;
  cfg.train.negatives = 10;
  cfg.train.lr = 0.01;
  cfg.train.epochs = 500;
  cfg.train.seed = 1;
  auto result = train(ds, cfg);
  EXPECT_EQ(result.steps, 500u);
  EXPECT_LT(result.finalLoss, 0.05 * result.initialLoss)
      << "initial " << result.initialLoss << " final " << result.finalLoss;

  auto model = restoreModel(result.best, ds);
  auto snap = model.snapshot();
  // Rank each positive among every corruption of each position.
  FilterIndex none;
  auto report = evaluate(snap.view(), ds.train, none, ds.numEntities());
  for (const auto& q : report.ranks) {
    EXPECT_EQ(q.rawRank, 1) << "fact " << q.fact << " position " << q.position;
  }
}

TEST(Train, DeterministicCheckpoints) {
  auto ds = toy();
  auto cfg = smallRun();
  cfg.encoder.dropout = 0.2;
  auto a = train(ds, cfg);
  auto b = train(ds, cfg);
  EXPECT_EQ(bytes(a.best), bytes(b.best));
  cfg.train.seed = 6;
  auto c = train(ds, cfg);
  EXPECT_NE(bytes(a.best), bytes(c.best));
}

TEST(Train, CheckpointRoundTripReproducesMrr) {
  auto ds = toy();
  auto cfg = smallRun();
  std::ostringstream curve;
  auto result = train(ds, cfg, {.curve = &curve, .onEpoch = {}});
  ASSERT_GT(result.best.bestValidMrr, 0.0);
  std::stringstream buf(bytes(result.best));
  auto loaded = readCheckpoint(buf);
  EXPECT_EQ(loaded.bestValidMrr, result.best.bestValidMrr);
  EXPECT_EQ(loaded.params, result.best.params);
  EXPECT_EQ(loaded.firstMoments, result.best.firstMoments);
  EXPECT_EQ(loaded.optimizerStep, result.best.optimizerStep);
  EXPECT_EQ(toKeyValues(loaded.config), toKeyValues(cfg));
  auto model = restoreModel(loaded, ds);
  EXPECT_EQ(validationMrr(model, ds, buildFilterIndex(ds), 1), result.best.bestValidMrr);

  std::istringstream lines(curve.str());
  std::string header;
  std::getline(lines, header);
  EXPECT_EQ(header, "step,epoch,train_loss,valid_mrr,seconds");
  std::size_t rows = 0;
  for (std::string l; std::getline(lines, l);) ++rows;
  EXPECT_EQ(rows, result.curve.size());
}

TEST(Train, VocabularyMismatchIsAnError) {
  auto cfg = smallRun();
  cfg.train.epochs = 1;
  auto result = train(toy(), cfg);
  EXPECT_THROW(restoreModel(result.best, tenFacts()), DataError);
}

TEST(Train, EarlyStoppingAndCurve) {
  auto ds = toy();
  auto cfg = smallRun();
  cfg.train.epochs = 200;
  cfg.train.evalEvery = 1;
  cfg.train.patience = 2;
  cfg.train.lr = 0.05;
  std::size_t calls = 0;
  auto result = train(ds, cfg, {.onEpoch = [&](const CurvePoint&) { ++calls; }});
  EXPECT_EQ(calls, result.curve.size());
  EXPECT_TRUE(result.earlyStopped || result.curve.size() == 200u);
  double best = 0.0;
  for (const auto& p : result.curve) {
    ASSERT_TRUE(p.validMrr.has_value());
    best = std::max(best, *p.validMrr);
  }
  EXPECT_EQ(result.best.bestValidMrr, best);
}

TEST(Train, MaxStepsCapsTraining) {
  auto cfg = smallRun();
  cfg.train.maxSteps = 3;
  cfg.train.batchSize = 4;
  auto result = train(toy(), cfg);
  EXPECT_EQ(result.steps, 3u);
  EXPECT_EQ(result.curve.size(), 1u);
}

TEST(Train, EveryFlavorRuns) {
  auto ds = toy();
  for (auto enc : {EncoderFlavor::compgcn, EncoderFlavor::rgcn, EncoderFlavor::none}) {
    for (auto dec : {DecoderFlavor::mdistmult, DecoderFlavor::hype}) {
      auto cfg = smallRun();
      cfg.encoder.flavor = enc;
      cfg.decoder.flavor = dec;
      cfg.decoder.batchNorm = dec == DecoderFlavor::hype;
      cfg.decoder.dropout = 0.1;
      cfg.train.epochs = 2;
      auto result = train(ds, cfg);
      EXPECT_TRUE(std::isfinite(result.finalLoss));
      EXPECT_NO_THROW(restoreModel(result.best, ds));
    }
  }
}

TEST(Train, EveryVariantRuns) {
  auto ds = toy();
  for (auto v : {Variant::plain, Variant::cliquePlain, Variant::cliqueSemantic, Variant::noDistinction}) {
    auto cfg = smallRun();
    cfg.train.variant = v;
    cfg.train.epochs = 2;
    EXPECT_NO_THROW(train(ds, cfg)) << variantName(v);
  }
}

TEST(Checkpoint, RejectsCorruptInput) {
  std::stringstream junk("NOTACKPT");
  EXPECT_THROW(readCheckpoint(junk), DataError);
  auto cfg = smallRun();
  cfg.train.epochs = 1;
  auto full = bytes(train(toy(), cfg).best);
  EXPECT_EQ(full.substr(0, 8), "HKGXCKPT");
  std::stringstream truncated(full.substr(0, full.size() - 5));
  EXPECT_THROW(readCheckpoint(truncated), DataError);
}

TEST(Config, KeyValuesRoundTrip) {
  RunConfig c;
  c.encoder.flavor = EncoderFlavor::rgcn;
  c.encoder.shareRatio = 0.3;
  c.decoder.flavor = DecoderFlavor::hype;
  c.train.lr = 5e-4;
  c.train.variant = Variant::cliqueSemantic;
  RunConfig back;
  applyKeyValues(back, toKeyValues(c));
  EXPECT_EQ(toKeyValues(back), toKeyValues(c));
  EXPECT_EQ(back.train.lr, 5e-4);
}

TEST(Config, Parsing) {
  auto kv = parseKeyValues("# comment\nencoder.dim = 8  # trailing\n\ntrain.lr=0.5\n");
  EXPECT_EQ(kv.at("encoder.dim"), "8");
  EXPECT_EQ(kv.at("train.lr"), "0.5");
  RunConfig c;
  EXPECT_THROW(applyKeyValues(c, {{"encoder.dims", "3"}}), ConfigError);
  EXPECT_THROW(applyKeyValues(c, {{"encoder.dim", "three"}}), ConfigError);
  EXPECT_THROW(parseKeyValues("novalue\n"), ConfigError);
  c.train.batchSize = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}
