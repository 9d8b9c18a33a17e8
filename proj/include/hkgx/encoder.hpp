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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "hkgx/numeric.hpp"
#include "hkgx/rng.hpp"
#include "hkgx/transform.hpp"

namespace hkgx {

enum class EncoderFlavor { compgcn, rgcn, none };
enum class Composition { rotate, subtract, multiply };
enum class Aggregation { mean, sum };
enum class Activation { tanh, identity };

inline std::string_view encoderFlavorName(EncoderFlavor f) {
  switch (f) {
    case EncoderFlavor::compgcn: return "compgcn";
    case EncoderFlavor::rgcn: return "rgcn";
    case EncoderFlavor::none: break;
  }
  return "none";
}

inline EncoderFlavor parseEncoderFlavor(std::string_view s) {
  if (s == "compgcn") return EncoderFlavor::compgcn;
  if (s == "rgcn") return EncoderFlavor::rgcn;
  if (s == "none") return EncoderFlavor::none;
  throw ConfigError("unknown encoder flavor '" + std::string(s) + "'");
}

inline std::string_view compositionName(Composition c) {
  switch (c) {
    case Composition::rotate: return "rotate";
    case Composition::subtract: return "subtract";
    case Composition::multiply: break;
  }
  return "multiply";
}

inline Composition parseComposition(std::string_view s) {
  if (s == "rotate") return Composition::rotate;
  if (s == "subtract") return Composition::subtract;
  if (s == "multiply") return Composition::multiply;
  throw ConfigError("unknown composition '" + std::string(s) + "'");
}

inline std::string_view aggregationName(Aggregation a) {
  return a == Aggregation::mean ? "mean" : "sum";
}

inline Aggregation parseAggregation(std::string_view s) {
  if (s == "mean") return Aggregation::mean;
  if (s == "sum") return Aggregation::sum;
  throw ConfigError("unknown aggregation '" + std::string(s) + "'");
}

inline std::string_view activationName(Activation a) {
  return a == Activation::tanh ? "tanh" : "identity";
}

inline Activation parseActivation(std::string_view s) {
  if (s == "tanh") return Activation::tanh;
  if (s == "identity" || s == "none") return Activation::identity;
  throw ConfigError("unknown activation '" + std::string(s) + "'");
}

struct EncoderConfig {
  EncoderFlavor flavor = EncoderFlavor::compgcn;
  int layers = 2;
  int dim = 200;
  double shareRatio = 0.8;
  Composition composition = Composition::rotate;
  double dropout = 0.2;
  Aggregation aggregation = Aggregation::mean;
  Activation activation = Activation::tanh;

  [[nodiscard]] int sharedDim() const {
    return static_cast<int>(std::floor(shareRatio * static_cast<double>(dim)));
  }
  [[nodiscard]] int independentDim() const { return dim - sharedDim(); }

  void validate() const {
    if (dim <= 0) throw ConfigError("encoder.dim must be positive");
    if (flavor != EncoderFlavor::none && (layers < 1 || layers > 4)) {
      throw ConfigError("encoder.layers must be in 1..4");
    }
    if (!(shareRatio >= 0.0 && shareRatio <= 1.0)) {
      throw ConfigError("encoder.share_ratio must be in [0, 1]");
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("encoder.dropout must be in [0, 1)");
    if (flavor == EncoderFlavor::compgcn && composition == Composition::rotate && dim % 2 != 0) {
      throw ConfigError("rotate composition needs an even dimension");
    }
  }
};

/// Message-passing structure derived once from a transformed graph.
struct EncoderGraph {
  std::size_t numEntities = 0;
  std::size_t numOriginalEntities = 0;
  std::size_t numRelations = 0;
  /// Row of each mediator in the shared table, and the table size.
  std::vector<std::int32_t> sharedRow;
  std::size_t numSharedRows = 0;

  // compgcn: forward edges deliver to tails, inverse edges to heads.
  std::vector<std::int32_t> fwdSource;
  std::vector<std::int32_t> fwdRelation;
  std::shared_ptr<const nn::SegmentMap> fwdAggregate;
  std::vector<std::int32_t> invSource;
  std::vector<std::int32_t> invRelation;  // already offset by numRelations
  std::shared_ptr<const nn::SegmentMap> invAggregate;

  // rgcn: one block per (relation, direction) with at least one edge.
  struct Block {
    std::int32_t relation = 0;
    bool inverse = false;
    std::shared_ptr<const nn::SegmentMap> aggregate;  // sources -> compact targets
    std::vector<std::int32_t> targets;                // compact -> entity row
  };
  std::vector<Block> blocks;
  std::shared_ptr<const nn::SegmentMap> blockScatter;

  [[nodiscard]] std::size_t numMediators() const { return sharedRow.size(); }
};

/// Builds the structure for an arbitrary triple list. Entities at rows
/// >= numOriginalEntities are mediators; `psi` gives each one's primary
/// relation, in row order.
inline EncoderGraph buildEncoderGraph(std::size_t numEntities, std::size_t numOriginalEntities,
                                      std::size_t numRelations, const std::vector<Triple>& triples,
                                      const std::vector<RelationId>& psi, Aggregation aggregation) {
  if (numOriginalEntities > numEntities || psi.size() != numEntities - numOriginalEntities) {
    throw ShapeError("encoder graph: mediator count disagrees with psi");
  }
  EncoderGraph g;
  g.numEntities = numEntities;
  g.numOriginalEntities = numOriginalEntities;
  g.numRelations = numRelations;

  std::map<std::int32_t, std::int32_t> psiRows;
  for (auto r : psi) psiRows.emplace(r.value, 0);
  std::int32_t next = 0;
  for (auto& [r, row] : psiRows) row = next++;
  g.numSharedRows = psiRows.size();
  for (auto r : psi) g.sharedRow.push_back(psiRows.at(r.value));

  for (const auto& t : triples) {
    if (t.head < 0 || static_cast<std::size_t>(t.head) >= numEntities || t.tail < 0 ||
        static_cast<std::size_t>(t.tail) >= numEntities || t.relation < 0 ||
        static_cast<std::size_t>(t.relation) >= numRelations) {
      throw ShapeError("encoder graph: triple id out of range");
    }
  }

  // compgcn edge lists, ordered by (target, source, relation).
  using Edge = std::tuple<std::int32_t, std::int32_t, std::int32_t>;
  std::vector<Edge> fwd;
  std::vector<Edge> inv;
  std::vector<double> degree(numEntities, 0.0);
  for (const auto& t : triples) {
    fwd.emplace_back(t.tail, t.head, t.relation);
    inv.emplace_back(t.head, t.tail, t.relation + static_cast<std::int32_t>(numRelations));
    degree[static_cast<std::size_t>(t.tail)] += 1.0;
    degree[static_cast<std::size_t>(t.head)] += 1.0;
  }
  std::sort(fwd.begin(), fwd.end());
  std::sort(inv.begin(), inv.end());
  auto makeAgg = [&](const std::vector<Edge>& edges, std::vector<std::int32_t>& src,
                     std::vector<std::int32_t>& rel) {
    auto m = std::make_shared<nn::SegmentMap>();
    m->numOut = numEntities;
    for (std::size_t i = 0; i < edges.size(); ++i) {
      auto [dst, s, r] = edges[i];
      src.push_back(s);
      rel.push_back(r);
      m->src.push_back(static_cast<std::int32_t>(i));
      m->dst.push_back(dst);
      if (aggregation == Aggregation::mean) m->weight.push_back(1.0 / degree[static_cast<std::size_t>(dst)]);
    }
    return m;
  };
  g.fwdAggregate = makeAgg(fwd, g.fwdSource, g.fwdRelation);
  g.invAggregate = makeAgg(inv, g.invSource, g.invRelation);

  // rgcn blocks keyed by (relation, direction), each ordered by (target, source).
  std::map<std::pair<std::int32_t, bool>, std::vector<std::pair<std::int32_t, std::int32_t>>> byRel;
  for (const auto& t : triples) {
    byRel[{t.relation, false}].emplace_back(t.tail, t.head);
    byRel[{t.relation, true}].emplace_back(t.head, t.tail);
  }
  auto scatter = std::make_shared<nn::SegmentMap>();
  scatter->numOut = numEntities;
  std::int32_t compactBase = 0;
  for (auto& [key, edges] : byRel) {
    std::sort(edges.begin(), edges.end());
    EncoderGraph::Block b;
    b.relation = key.first;
    b.inverse = key.second;
    auto m = std::make_shared<nn::SegmentMap>();
    std::vector<std::size_t> counts;
    for (const auto& [dst, src] : edges) {
      if (b.targets.empty() || b.targets.back() != dst) {
        b.targets.push_back(dst);
        counts.push_back(0);
      }
      ++counts.back();
    }
    std::size_t slot = 0;
    for (std::size_t i = 0; i < edges.size(); ++i) {
      if (edges[i].first != b.targets[slot]) ++slot;
      m->src.push_back(edges[i].second);
      m->dst.push_back(static_cast<std::int32_t>(slot));
      if (aggregation == Aggregation::mean) m->weight.push_back(1.0 / static_cast<double>(counts[slot]));
    }
    m->numOut = b.targets.size();
    b.aggregate = m;
    for (std::size_t i = 0; i < b.targets.size(); ++i) {
      scatter->src.push_back(compactBase + static_cast<std::int32_t>(i));
      scatter->dst.push_back(b.targets[i]);
    }
    compactBase += static_cast<std::int32_t>(b.targets.size());
    g.blocks.push_back(std::move(b));
  }
  g.blockScatter = scatter;
  return g;
}

inline EncoderGraph buildEncoderGraph(const TransformedKg& kg, Aggregation aggregation) {
  return buildEncoderGraph(kg.entities.size(), kg.numOriginalEntities, kg.relations.size(),
                           kg.triples, kg.psi, aggregation);
}

/// All learnable encoder parameters, addressed by slot so the table can be
/// copied freely.
class EmbeddingTable {
 public:
  static constexpr int kNone = -1;

  struct Layer {
    int wIn = kNone;
    int wOut = kNone;
    int wSelf = kNone;
    int wRel = kNone;
    int wLoop = kNone;              // rgcn W_0
    std::vector<int> wBlock;        // rgcn, parallel to EncoderGraph::blocks
  };

  EmbeddingTable() = default;

  EmbeddingTable(const EncoderGraph& g, const EncoderConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    RngStream root(seed, "init");
    const auto d = static_cast<Eigen::Index>(cfg.dim);
    auto embed = [&](std::string name, Eigen::Index rows, Eigen::Index cols) {
      auto rng = root.split(name);
      return add(std::move(name), nn::uniformMatrix(rows, cols, -0.1, 0.1, rng));
    };
    auto weight = [&](std::string name, Eigen::Index rows, Eigen::Index cols) {
      auto rng = root.split(name);
      return add(std::move(name), nn::xavierMatrix(rows, cols, rng));
    };

    entity_ = embed("entity", static_cast<Eigen::Index>(g.numOriginalEntities), d);
    const bool mediators = cfg.flavor != EncoderFlavor::none && g.numMediators() > 0;
    if (mediators && cfg.sharedDim() > 0) {
      shared_ = embed("mediator.shared", static_cast<Eigen::Index>(g.numSharedRows), cfg.sharedDim());
    }
    if (mediators && cfg.independentDim() > 0) {
      independent_ = embed("mediator.independent", static_cast<Eigen::Index>(g.numMediators()),
                           cfg.independentDim());
    }
    const auto relRows = static_cast<Eigen::Index>(
        cfg.flavor == EncoderFlavor::compgcn ? 2 * g.numRelations : g.numRelations);
    relation_ = embed("relation", relRows, d);

    if (cfg.flavor == EncoderFlavor::none) return;
    for (int l = 0; l < cfg.layers; ++l) {
      const std::string p = "layer" + std::to_string(l) + ".";
      Layer layer;
      if (cfg.flavor == EncoderFlavor::compgcn) {
        layer.wIn = weight(p + "w_in", d, d);
        layer.wOut = weight(p + "w_out", d, d);
        layer.wSelf = weight(p + "w_self", d, d);
        layer.wRel = weight(p + "w_rel", d, d);
      } else {
        layer.wLoop = weight(p + "w_0", d, d);
        for (const auto& b : g.blocks) {
          layer.wBlock.push_back(weight(p + "w_r" + std::to_string(b.relation) +
                                            (b.inverse ? ".inv" : ".fwd"),
                                        d, d));
        }
      }
      layers_.push_back(std::move(layer));
    }
  }

  [[nodiscard]] std::vector<nn::Parameter>& all() { return params_; }
  [[nodiscard]] const std::vector<nn::Parameter>& all() const { return params_; }
  nn::Parameter& at(int slot) { return params_.at(static_cast<std::size_t>(slot)); }
  [[nodiscard]] const nn::Parameter& at(int slot) const {
    return params_.at(static_cast<std::size_t>(slot));
  }

  [[nodiscard]] int entitySlot() const { return entity_; }
  [[nodiscard]] int sharedSlot() const { return shared_; }
  [[nodiscard]] int independentSlot() const { return independent_; }
  [[nodiscard]] int relationSlot() const { return relation_; }
  [[nodiscard]] const std::vector<Layer>& layers() const { return layers_; }

 private:
  int add(std::string name, nn::Matrix value) {
    params_.emplace_back(std::move(name), std::move(value));
    return static_cast<int>(params_.size() - 1);
  }

  std::vector<nn::Parameter> params_;
  int entity_ = kNone;
  int shared_ = kNone;
  int independent_ = kNone;
  int relation_ = kNone;
  std::vector<Layer> layers_;
};

/// Layer-0 entity matrix: original rows, then [shared(psi(b)) ; independent(b)]
/// per mediator.
inline nn::Var layerZero(nn::Tape& t, const EncoderGraph& g, EmbeddingTable& table) {
  nn::Var h = t.param(table.at(table.entitySlot()));
  if (table.sharedSlot() == EmbeddingTable::kNone && table.independentSlot() == EmbeddingTable::kNone) {
    return h;
  }
  nn::Var med;
  if (table.sharedSlot() != EmbeddingTable::kNone) {
    med = nn::gather(t, t.param(table.at(table.sharedSlot())), g.sharedRow);
  }
  if (table.independentSlot() != EmbeddingTable::kNone) {
    nn::Var ind = t.param(table.at(table.independentSlot()));
    med = med.valid() ? nn::concatCols(t, med, ind) : ind;
  }
  return nn::concatRows(t, h, med);
}

struct EncoderOutput {
  nn::Var entities;   // numEntities x d (numOriginalEntities for flavor none)
  nn::Var relations;  // first numRelations rows are the forward relations
};

namespace detail {

inline nn::Var compose(nn::Tape& t, nn::Var h, nn::Var r, Composition c) {
  switch (c) {
    case Composition::rotate: return nn::rotate(t, h, r);
    case Composition::subtract: return nn::sub(t, h, r);
    case Composition::multiply: break;
  }
  return nn::mul(t, h, r);
}

}  // namespace detail

inline EncoderOutput encode(nn::Tape& t, const EncoderGraph& g, EmbeddingTable& table,
                            const EncoderConfig& cfg, nn::Mode mode, RngStream& dropoutRng) {
  nn::Var h = layerZero(t, g, table);
  nn::Var rel = t.param(table.at(table.relationSlot()));
  if (cfg.flavor == EncoderFlavor::none) return {h, rel};
  if (t.value(h).rows() != static_cast<Eigen::Index>(g.numEntities)) {
    throw ShapeError("encoder: table rows disagree with graph entity count");
  }

  for (std::size_t l = 0; l < table.layers().size(); ++l) {
    const auto& layer = table.layers()[l];
    nn::Var next;
    if (cfg.flavor == EncoderFlavor::compgcn) {
      auto direction = [&](const std::vector<std::int32_t>& src, const std::vector<std::int32_t>& rels,
                           const std::shared_ptr<const nn::SegmentMap>& agg, int w) {
        nn::Var msg = detail::compose(t, nn::gather(t, h, src), nn::gather(t, rel, rels), cfg.composition);
        return nn::matmul(t, nn::segment(t, msg, agg), t.param(table.at(w)));
      };
      next = nn::matmul(t, h, t.param(table.at(layer.wSelf)));
      if (!g.fwdSource.empty()) {
        next = nn::add(t, next, direction(g.fwdSource, g.fwdRelation, g.fwdAggregate, layer.wIn));
        next = nn::add(t, next, direction(g.invSource, g.invRelation, g.invAggregate, layer.wOut));
      }
      rel = nn::matmul(t, rel, t.param(table.at(layer.wRel)));
    } else {
      next = nn::matmul(t, h, t.param(table.at(layer.wLoop)));
      if (!g.blocks.empty()) {
        std::vector<nn::Var> parts;
        for (std::size_t b = 0; b < g.blocks.size(); ++b) {
          nn::Var pooled = nn::segment(t, h, g.blocks[b].aggregate);
          parts.push_back(nn::matmul(t, pooled, t.param(table.at(layer.wBlock[b]))));
        }
        next = nn::add(t, next, nn::segment(t, nn::concatRows(t, parts), g.blockScatter));
      }
    }
    if (cfg.activation == Activation::tanh) next = nn::tanh(t, next);
    h = nn::dropout(t, next, cfg.dropout, mode, dropoutRng);
  }
  return {h, rel};
}

/// rgcn: W_r = 0, W_0 = I. compgcn: every weight = I. The rgcn assignment
/// with identity activation leaves every embedding unchanged.
inline void assignIdentityWeights(EmbeddingTable& table) {
  for (const auto& layer : table.layers()) {
    for (int slot : {layer.wIn, layer.wOut, layer.wSelf, layer.wRel, layer.wLoop}) {
      if (slot != EmbeddingTable::kNone) table.at(slot).value.setIdentity();
    }
    for (int slot : layer.wBlock) table.at(slot).value.setZero();
  }
}

}  // namespace hkgx
