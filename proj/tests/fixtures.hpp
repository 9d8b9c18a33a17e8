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

#pragma once

// Small datasets and check routines shared by the unit tests and the
// acceptance binary.

#include <functional>
#include <string>
#include <vector>

#include "hkgx/hkgx.hpp"
#include "oracles.hpp"

namespace fixture {

using Quals = std::vector<std::pair<std::string, std::string>>;

inline hkgx::LabeledFact lf(std::string s, std::string r, std::string o, Quals q = {}) {
  return hkgx::LabeledFact{std::move(s), std::move(r), std::move(o), std::move(q)};
}

/// Ten facts, train split only.
inline hkgx::HkgDataset tenFacts() {
  hkgx::DatasetBuilder b;
  for (auto f : {lf("alice", "works_at", "acme", {{"role", "engineer"}, {"since", "y2019"}}),
                 lf("bob", "works_at", "globex", {{"role", "manager"}}),
                 lf("carol", "lives_in", "paris"),
                 lf("dave", "lives_in", "berlin"),
                 lf("alice", "knows", "bob"),
                 lf("carol", "studied_at", "sorbonne", {{"degree", "master"}}),
                 lf("dave", "studied_at", "tum", {{"degree", "bachelor"}, {"major", "physics"}}),
                 lf("bob", "lives_in", "london"),
                 lf("erin", "works_at", "acme", {{"role", "intern"}}),
                 lf("erin", "knows", "carol")}) {
    b.add(hkgx::Split::train, f);
  }
  return std::move(b).build();
}

/// Five facts whose equivalent transform has 7 entities and 3 mediators.
inline hkgx::HkgDataset tenNodeDataset() {
  hkgx::DatasetBuilder b;
  for (auto f : {lf("a", "r", "b", {{"q", "c"}}), lf("b", "r", "c", {{"q", "d"}, {"p", "e"}}),
                 lf("c", "s", "d"), lf("d", "s", "e", {{"q", "a"}}), lf("f", "s", "g")}) {
    b.add(hkgx::Split::train, f);
  }
  return std::move(b).build();
}

inline hkgx::HkgDataset toy() {
  return hkgx::loadDataset(HKGX_SOURCE_DIR "/data/toy", hkgx::SourceFormat::canonical).dataset;
}

struct GradResult {
  std::string name;
  double maxRelError = 0.0;
  std::string worst;
};

/// Finite-difference check of every tape primitive at `points` random draws.
inline std::vector<GradResult> primitiveGradients(int points = 10) {
  using namespace hkgx::nn;
  using Build = std::function<Var(Tape&, std::vector<Var>&)>;
  struct Case {
    std::string name;
    std::vector<std::pair<int, int>> shapes;
    Build build;
    double lo = -1.0, hi = 1.0;
  };
  auto seg = std::make_shared<SegmentMap>();
  seg->src = {0, 1, 1, 3, 2, 0};
  seg->dst = {0, 0, 2, 2, 3, 3};
  seg->weight = {0.5, 0.5, 1.0, -2.0, 0.25, 3.0};
  seg->numOut = 4;
  std::vector<hkgx::HyperFact> facts{
      {hkgx::EntityId(0), hkgx::RelationId(1), hkgx::EntityId(2), {{hkgx::RelationId(0), hkgx::EntityId(3)}}},
      {hkgx::EntityId(4), hkgx::RelationId(2), hkgx::EntityId(4), {}},
      {hkgx::EntityId(1), hkgx::RelationId(0), hkgx::EntityId(3),
       {{hkgx::RelationId(2), hkgx::EntityId(0)}, {hkgx::RelationId(1), hkgx::EntityId(2)}}}};
  std::vector<Case> cases{
      {"add", {{3, 4}, {3, 4}}, [](Tape& t, auto& v) { return add(t, v[0], v[1]); }},
      {"sub", {{3, 4}, {3, 4}}, [](Tape& t, auto& v) { return sub(t, v[0], v[1]); }},
      {"mul", {{3, 4}, {3, 4}}, [](Tape& t, auto& v) { return mul(t, v[0], v[1]); }},
      {"scale", {{3, 4}}, [](Tape& t, auto& v) { return scale(t, v[0], -1.7); }},
      {"tanh", {{3, 4}}, [](Tape& t, auto& v) { return tanh(t, v[0]); }, -2.0, 2.0},
      {"sum", {{3, 4}}, [](Tape& t, auto& v) { return sum(t, v[0]); }},
      {"matmul", {{3, 4}, {4, 5}}, [](Tape& t, auto& v) { return matmul(t, v[0], v[1]); }},
      {"concatCols", {{3, 2}, {3, 4}}, [](Tape& t, auto& v) { return concatCols(t, v[0], v[1]); }},
      {"concatRows", {{2, 3}, {4, 3}}, [](Tape& t, auto& v) { return concatRows(t, v[0], v[1]); }},
      {"concatRowsMany", {{2, 3}, {1, 3}},
       [](Tape& t, auto& v) { return concatRows(t, std::vector<Var>{v[0], v[1], v[0]}); }},
      {"segment", {{4, 3}}, [seg](Tape& t, auto& v) { return segment(t, v[0], seg); }},
      {"gather", {{5, 3}}, [](Tape& t, auto& v) { return gather(t, v[0], {4, 0, 0, 2}); }},
      {"rotate", {{3, 6}, {3, 6}}, [](Tape& t, auto& v) { return rotate(t, v[0], v[1]); }},
      {"dropout", {{4, 5}},
       [](Tape& t, auto& v) {
         hkgx::RngStream mask(3, "mask");
         return dropout(t, v[0], 0.3, Mode::train, mask);
       }},
      {"batchNorm", {{6, 3}, {1, 3}, {1, 3}}, [](Tape& t, auto& v) { return batchNorm(t, v[0], v[1], v[2]); }},
      {"softmaxCrossEntropy", {{7, 1}},
       [](Tape& t, auto& v) { return softmaxCrossEntropy(t, v[0], {{0, 3}, {3, 4}}); }, -3.0, 3.0},
      {"scoreFacts.mdistmult", {{5, 4}, {3, 4}},
       [facts](Tape& t, auto& v) {
         return hkgx::scoreFacts(t, v[0], v[1], Var{}, facts, hkgx::RelationPooling::mean);
       }},
      {"scoreFacts.hype", {{5, 4}, {3, 4}, {4, 3}},
       [facts](Tape& t, auto& v) {
         return hkgx::scoreFacts(t, v[0], v[1], v[2], facts, hkgx::RelationPooling::sum);
       }},
  };

  std::vector<GradResult> out;
  for (const auto& c : cases) {
    GradResult r{c.name, 0.0, {}};
    for (int point = 0; point < points; ++point) {
      hkgx::RngStream rng(static_cast<std::uint64_t>(point), c.name);
      std::vector<Parameter> params;
      for (std::size_t i = 0; i < c.shapes.size(); ++i) {
        params.emplace_back("p" + std::to_string(i),
                            uniformMatrix(c.shapes[i].first, c.shapes[i].second, c.lo, c.hi, rng));
      }
      std::vector<Parameter*> ptrs;
      for (auto& p : params) ptrs.push_back(&p);
      auto res = oracle::checkGradients(ptrs, [&](Tape& t) {
        std::vector<Var> vars;
        for (auto& p : params) vars.push_back(t.param(p));
        Var y = c.build(t, vars);
        hkgx::RngStream w(1000 + static_cast<std::uint64_t>(point), "weights");
        const auto& yv = t.value(y);
        return sum(t, mul(t, y, t.constant(uniformMatrix(yv.rows(), yv.cols(), -1, 1, w))));
      });
      if (res.maxRelError > r.maxRelError) {
        r.maxRelError = res.maxRelError;
        r.worst = "point " + std::to_string(point) + " " + res.worst;
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

/// Finite-difference check of encode -> score -> loss on the 10-node graph.
inline GradResult compositeGradients(hkgx::EncoderFlavor flavor, hkgx::DecoderFlavor decoder, int points = 10) {
  auto ds = tenNodeDataset();
  GradResult r{std::string(hkgx::encoderFlavorName(flavor)) + "+" + std::string(hkgx::decoderFlavorName(decoder)),
               0.0,
               {}};
  for (int point = 0; point < points; ++point) {
    hkgx::RunConfig cfg;
    cfg.encoder.flavor = flavor;
    cfg.encoder.dim = 4;
    cfg.encoder.layers = 2;
    cfg.encoder.dropout = 0.2;
    cfg.encoder.shareRatio = 0.5;
    cfg.decoder.flavor = decoder;
    cfg.decoder.batchNorm = decoder == hkgx::DecoderFlavor::hype;
    cfg.train.seed = static_cast<std::uint64_t>(point) + 1;
    auto model = hkgx::buildModel(ds, cfg);
    // Spread the parameters so tanh and the products are far from trivial.
    hkgx::RngStream spread(static_cast<std::uint64_t>(point), "spread");
    for (auto* p : model.parameters()) {
      p->value += hkgx::nn::uniformMatrix(p->value.rows(), p->value.cols(), -0.5, 0.5, spread);
    }
    std::vector<hkgx::HyperFact> batch(ds.train.begin(), ds.train.end());
    auto res = oracle::checkGradients(model.parameters(), [&](hkgx::nn::Tape& t) {
      hkgx::RngStream drop(static_cast<std::uint64_t>(point), "dropout");
      hkgx::RngStream neg(static_cast<std::uint64_t>(point), "negatives");
      auto fw = model.forward(t, hkgx::nn::Mode::train, drop);
      return hkgx::batchLoss(t, fw, batch, 3, ds.numEntities(), cfg.decoder.pooling, neg);
    }, 1e-6, 12, static_cast<std::uint64_t>(point));
    if (res.maxRelError > r.maxRelError) {
      r.maxRelError = res.maxRelError;
      r.worst = "point " + std::to_string(point) + " " + res.worst;
    }
  }
  return r;
}

}  // namespace fixture
