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

#include <cstdint>
#include <vector>

#include "hkgx/decoder.hpp"
#include "hkgx/encoder.hpp"

namespace hkgx {

/// Encoder and decoder state over one transformed graph.
class Model {
 public:
  Model() = default;

  Model(const TransformedKg& kg, const EncoderConfig& enc, const DecoderConfig& dec,
        std::size_t maxPositions, std::uint64_t seed)
      : encoderConfig_(enc),
        decoderConfig_(dec),
        graph_(buildEncoderGraph(kg, enc.aggregation)),
        table_(graph_, enc, seed),
        decoder_(dec, enc.dim, maxPositions, seed),
        numOriginalEntities_(kg.numOriginalEntities),
        numOriginalRelations_(kg.numOriginalRelations) {}

  struct Forward {
    nn::Var entities;
    nn::Var relations;
    nn::Var filters;  // invalid for mdistmult
  };

  /// Encodes the graph and applies the decoder-side normalization and
  /// dropout to the entity matrix.
  Forward forward(nn::Tape& t, nn::Mode mode, RngStream& rng) {
    auto encRng = rng.split("encoder.dropout");
    auto decRng = rng.split("decoder.dropout");
    auto out = encode(t, graph_, table_, encoderConfig_, mode, encRng);
    nn::Var e = out.entities;
    if (decoder_.gammaSlot() != DecoderParams::kNone) {
      e = nn::batchNorm(t, e, t.param(decoder_.at(decoder_.gammaSlot())),
                        t.param(decoder_.at(decoder_.betaSlot())));
    }
    e = nn::dropout(t, e, decoderConfig_.dropout, mode, decRng);
    nn::Var f;
    if (decoder_.filterSlot() != DecoderParams::kNone) f = t.param(decoder_.at(decoder_.filterSlot()));
    return {e, out.relations, f};
  }

  /// Inference-mode matrices for ranking.
  struct Snapshot {
    nn::Matrix entities;
    nn::Matrix relations;
    nn::Matrix filters;
    bool hasFilters = false;
    RelationPooling pooling = RelationPooling::mean;

    [[nodiscard]] ScoringView view() const {
      return {&entities, &relations, hasFilters ? &filters : nullptr, pooling};
    }
  };

  [[nodiscard]] Snapshot snapshot() const {
    // Eval mode reads parameters only; no backward pass runs on this tape.
    nn::Tape t;
    RngStream unused(0, "eval");
    auto fw = const_cast<Model*>(this)->forward(t, nn::Mode::eval, unused);
    Snapshot s;
    s.entities = t.value(fw.entities);
    s.relations = t.value(fw.relations);
    if (fw.filters.valid()) {
      s.filters = t.value(fw.filters);
      s.hasFilters = true;
    }
    s.pooling = decoderConfig_.pooling;
    return s;
  }

  /// Every parameter in declared order: encoder, then decoder.
  std::vector<nn::Parameter*> parameters() {
    std::vector<nn::Parameter*> out;
    for (auto& p : table_.all()) out.push_back(&p);
    for (auto& p : decoder_.all()) out.push_back(&p);
    return out;
  }

  [[nodiscard]] std::vector<const nn::Parameter*> parameters() const {
    std::vector<const nn::Parameter*> out;
    for (const auto& p : table_.all()) out.push_back(&p);
    for (const auto& p : decoder_.all()) out.push_back(&p);
    return out;
  }

  [[nodiscard]] const EncoderConfig& encoderConfig() const { return encoderConfig_; }
  [[nodiscard]] const DecoderConfig& decoderConfig() const { return decoderConfig_; }
  [[nodiscard]] const EncoderGraph& graph() const { return graph_; }
  EmbeddingTable& table() { return table_; }
  [[nodiscard]] const EmbeddingTable& table() const { return table_; }
  DecoderParams& decoder() { return decoder_; }
  [[nodiscard]] std::size_t numOriginalEntities() const { return numOriginalEntities_; }
  [[nodiscard]] std::size_t numOriginalRelations() const { return numOriginalRelations_; }

 private:
  EncoderConfig encoderConfig_;
  DecoderConfig decoderConfig_;
  EncoderGraph graph_;
  EmbeddingTable table_;
  DecoderParams decoder_;
  std::size_t numOriginalEntities_ = 0;
  std::size_t numOriginalRelations_ = 0;
};

}  // namespace hkgx
