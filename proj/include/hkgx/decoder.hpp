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

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hkgx/core.hpp"
#include "hkgx/numeric.hpp"
#include "hkgx/rng.hpp"

namespace hkgx {

enum class DecoderFlavor { mdistmult, hype };
enum class RelationPooling { mean, sum };

inline std::string_view decoderFlavorName(DecoderFlavor f) {
  return f == DecoderFlavor::mdistmult ? "mdistmult" : "hype";
}

inline DecoderFlavor parseDecoderFlavor(std::string_view s) {
  if (s == "mdistmult") return DecoderFlavor::mdistmult;
  if (s == "hype") return DecoderFlavor::hype;
  throw ConfigError("unknown decoder flavor '" + std::string(s) + "'");
}

inline std::string_view poolingName(RelationPooling p) {
  return p == RelationPooling::mean ? "mean" : "sum";
}

inline RelationPooling parsePooling(std::string_view s) {
  if (s == "mean") return RelationPooling::mean;
  if (s == "sum") return RelationPooling::sum;
  throw ConfigError("unknown relation pooling '" + std::string(s) + "'");
}

struct DecoderConfig {
  DecoderFlavor flavor = DecoderFlavor::mdistmult;
  RelationPooling pooling = RelationPooling::mean;
  int filterLength = 3;
  /// Positional filters for hype; 0 sizes them from the data (max arity + 2).
  int positions = 0;
  double dropout = 0.0;
  bool batchNorm = false;

  void validate(int dim) const {
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("decoder.dropout must be in [0, 1)");
    if (flavor == DecoderFlavor::hype) {
      if (filterLength < 1 || filterLength > dim) {
        throw ConfigError("decoder.filter_length must be in 1..dim");
      }
      if (positions < 0) throw ConfigError("decoder.positions must be non-negative");
    }
  }
};

/// Read-only matrices a score is computed from. `filters` is null for
/// mdistmult.
struct ScoringView {
  const nn::Matrix* entities = nullptr;
  const nn::Matrix* relations = nullptr;
  const nn::Matrix* filters = nullptr;
  RelationPooling pooling = RelationPooling::mean;
};

namespace detail {

inline void checkFact(const HyperFact& f, const ScoringView& v) {
  auto bad = [](const std::string& what) { throw VocabularyError("score: " + what + " out of range"); };
  auto ent = [&](EntityId e) {
    if (e.value < 0 || e.value >= v.entities->rows()) bad("entity " + std::to_string(e.value));
  };
  auto rel = [&](RelationId r) {
    if (r.value < 0 || r.value >= v.relations->rows()) bad("relation " + std::to_string(r.value));
  };
  ent(f.subject);
  ent(f.object);
  rel(f.relation);
  for (const auto& q : f.qualifiers) {
    rel(q.attribute);
    ent(q.value);
  }
  if (v.filters && static_cast<Eigen::Index>(f.numPositions()) > v.filters->rows()) {
    throw ConfigError("fact has " + std::to_string(f.numPositions()) + " positions but only " +
                      std::to_string(v.filters->rows()) + " positional filters exist");
  }
}

inline double poolFactor(const HyperFact& f, RelationPooling p) {
  return p == RelationPooling::mean ? 1.0 / static_cast<double>(f.arity() + 1) : 1.0;
}

// r_hat[j] = factor * (r[j] + a_1[j] + ... + a_n[j])
inline std::vector<double> pooledRelation(const HyperFact& f, const nn::Matrix& R, RelationPooling p) {
  const auto d = R.cols();
  const double factor = poolFactor(f, p);
  std::vector<double> out(static_cast<std::size_t>(d));
  for (Eigen::Index j = 0; j < d; ++j) {
    double s = R(f.relation.value, j);
    for (const auto& q : f.qualifiers) s += R(q.attribute.value, j);
    out[static_cast<std::size_t>(j)] = s * factor;
  }
  return out;
}

// Circular convolution of one entity row with the filter of `position`.
inline std::vector<double> convolve(const nn::Matrix& E, std::int32_t row, const nn::Matrix& F,
                                    std::size_t position) {
  const auto d = E.cols();
  const auto len = F.cols();
  std::vector<double> out(static_cast<std::size_t>(d));
  for (Eigen::Index j = 0; j < d; ++j) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < len; ++k) {
      s += F(static_cast<Eigen::Index>(position), k) * E(row, (j + k) % d);
    }
    out[static_cast<std::size_t>(j)] = s;
  }
  return out;
}

// Position-ordered entity vectors after the optional positional filter.
inline std::vector<std::vector<double>> positionVectors(const HyperFact& f, const ScoringView& v) {
  std::vector<std::vector<double>> out;
  for (std::size_t p = 0; p < f.numPositions(); ++p) {
    const auto row = f.entityAt(p).value;
    if (v.filters) {
      out.push_back(convolve(*v.entities, row, *v.filters, p));
    } else {
      const auto* data = v.entities->data() + static_cast<Eigen::Index>(row) * v.entities->cols();
      out.emplace_back(data, data + v.entities->cols());
    }
  }
  return out;
}

}  // namespace detail

/// Multilinear score: sum_j r_hat[j] * e_0[j] * e_1[j] * ... in position
/// order (subject, object, values).
inline double score(const HyperFact& f, const ScoringView& v) {
  detail::checkFact(f, v);
  const auto rhat = detail::pooledRelation(f, *v.relations, v.pooling);
  const auto ents = detail::positionVectors(f, v);
  double acc = 0.0;
  for (std::size_t j = 0; j < rhat.size(); ++j) {
    double p = rhat[j];
    for (const auto& e : ents) p *= e[j];
    acc += p;
  }
  return acc;
}

/// Scores of `f` with position `hole` filled by each entity in
/// [0, numCandidates). Entry e is bit-identical to score() of that fact.
inline std::vector<double> scoreCandidates(const HyperFact& f, std::size_t hole,
                                           std::size_t numCandidates, const ScoringView& v) {
  if (hole >= f.numPositions()) {
    throw ConfigError("hole position " + std::to_string(hole) + " out of range for a fact with " +
                      std::to_string(f.numPositions()) + " positions");
  }
  if (static_cast<Eigen::Index>(numCandidates) > v.entities->rows()) {
    throw ConfigError("more candidates than entity rows");
  }
  detail::checkFact(f, v);
  const auto rhat = detail::pooledRelation(f, *v.relations, v.pooling);
  const auto ents = detail::positionVectors(f, v);
  const std::size_t d = rhat.size();
  // Products up to the hole are shared across candidates; the remaining
  // factors are applied in the same order as score().
  std::vector<double> prefix(rhat);
  for (std::size_t p = 0; p < hole; ++p) {
    for (std::size_t j = 0; j < d; ++j) prefix[j] *= ents[p][j];
  }
  std::vector<double> out(numCandidates);
  std::vector<double> cand(d);
  for (std::size_t c = 0; c < numCandidates; ++c) {
    if (v.filters) {
      cand = detail::convolve(*v.entities, static_cast<std::int32_t>(c), *v.filters, hole);
    } else {
      const auto* row = v.entities->data() + static_cast<Eigen::Index>(c) * v.entities->cols();
      std::copy(row, row + d, cand.begin());
    }
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      double p = prefix[j] * cand[j];
      for (std::size_t q = hole + 1; q < ents.size(); ++q) p *= ents[q][j];
      acc += p;
    }
    out[c] = acc;
  }
  return out;
}

/// Decoder parameters: positional filters (hype) and the normalization
/// affine (when enabled).
class DecoderParams {
 public:
  static constexpr int kNone = -1;

  DecoderParams() = default;

  DecoderParams(const DecoderConfig& cfg, int dim, std::size_t maxPositions, std::uint64_t seed) {
    cfg.validate(dim);
    RngStream root(seed, "init.decoder");
    if (cfg.flavor == DecoderFlavor::hype) {
      const auto rows = cfg.positions > 0 ? static_cast<Eigen::Index>(cfg.positions)
                                          : static_cast<Eigen::Index>(maxPositions);
      auto rng = root.split("filters");
      nn::Matrix f = nn::uniformMatrix(rows, cfg.filterLength, -0.1, 0.1, rng);
      f.col(0).array() += 1.0;
      filters_ = add("decoder.filters", std::move(f));
    }
    if (cfg.batchNorm) {
      gamma_ = add("decoder.bn_gamma", nn::Matrix::Ones(1, dim));
      beta_ = add("decoder.bn_beta", nn::Matrix::Zero(1, dim));
    }
  }

  [[nodiscard]] std::vector<nn::Parameter>& all() { return params_; }
  [[nodiscard]] const std::vector<nn::Parameter>& all() const { return params_; }
  nn::Parameter& at(int slot) { return params_.at(static_cast<std::size_t>(slot)); }
  [[nodiscard]] const nn::Parameter& at(int slot) const {
    return params_.at(static_cast<std::size_t>(slot));
  }
  [[nodiscard]] int filterSlot() const { return filters_; }
  [[nodiscard]] int gammaSlot() const { return gamma_; }
  [[nodiscard]] int betaSlot() const { return beta_; }

 private:
  int add(std::string name, nn::Matrix value) {
    params_.emplace_back(std::move(name), std::move(value));
    return static_cast<int>(params_.size() - 1);
  }

  std::vector<nn::Parameter> params_;
  int filters_ = kNone;
  int gamma_ = kNone;
  int beta_ = kNone;
};

/// Records the scores of `facts` as a column. `filters` may be an invalid
/// Var for mdistmult.
inline nn::Var scoreFacts(nn::Tape& t, nn::Var entities, nn::Var relations, nn::Var filters,
                          std::vector<HyperFact> facts, RelationPooling pooling) {
  const auto& E = t.value(entities);
  const auto& R = t.value(relations);
  if (E.cols() != R.cols()) throw ShapeError("scoreFacts: entity and relation dims differ");
  if (filters.valid() && t.value(filters).cols() > E.cols()) {
    throw ShapeError("scoreFacts: filter longer than the embedding");
  }
  ScoringView view{&E, &R, filters.valid() ? &t.value(filters) : nullptr, pooling};
  nn::Matrix y(static_cast<Eigen::Index>(facts.size()), 1);
  for (std::size_t i = 0; i < facts.size(); ++i) y(static_cast<Eigen::Index>(i), 0) = score(facts[i], view);

  auto shared = std::make_shared<std::vector<HyperFact>>(std::move(facts));
  std::vector<nn::Var> inputs{entities, relations};
  if (filters.valid()) inputs.push_back(filters);
  return t.record(std::move(y), inputs, [entities, relations, filters, shared, pooling](nn::Tape& tp, nn::Var self) {
    const nn::Matrix& g = tp.grad(self);
    const auto& E = tp.value(entities);
    const auto& R = tp.value(relations);
    const nn::Matrix* F = filters.valid() ? &tp.value(filters) : nullptr;
    auto* gE = tp.accumulate(entities);
    auto* gR = tp.accumulate(relations);
    auto* gF = filters.valid() ? tp.accumulate(filters) : nullptr;
    ScoringView view{&E, &R, F, pooling};
    const auto d = static_cast<std::size_t>(E.cols());
    for (std::size_t i = 0; i < shared->size(); ++i) {
      const double up = g(static_cast<Eigen::Index>(i), 0);
      if (up == 0.0) continue;
      const auto& f = (*shared)[i];
      const auto rhat = detail::pooledRelation(f, R, pooling);
      const auto ents = detail::positionVectors(f, view);
      const std::size_t n = ents.size();
      std::vector<double> dRhat(d);
      std::vector<std::vector<double>> dEnt(n, std::vector<double>(d));
      std::vector<double> before(n + 1);
      std::vector<double> after(n + 1);
      for (std::size_t j = 0; j < d; ++j) {
        before[0] = 1.0;
        for (std::size_t p = 0; p < n; ++p) before[p + 1] = before[p] * ents[p][j];
        after[n] = 1.0;
        for (std::size_t p = n; p > 0; --p) after[p - 1] = after[p] * ents[p - 1][j];
        dRhat[j] = up * before[n];
        for (std::size_t p = 0; p < n; ++p) dEnt[p][j] = up * rhat[j] * before[p] * after[p + 1];
      }
      if (gR) {
        const double factor = detail::poolFactor(f, pooling);
        for (std::size_t j = 0; j < d; ++j) {
          (*gR)(f.relation.value, static_cast<Eigen::Index>(j)) += factor * dRhat[j];
          for (const auto& q : f.qualifiers) {
            (*gR)(q.attribute.value, static_cast<Eigen::Index>(j)) += factor * dRhat[j];
          }
        }
      }
      for (std::size_t p = 0; p < n; ++p) {
        const auto row = f.entityAt(p).value;
        if (!F) {
          if (gE) {
            for (std::size_t j = 0; j < d; ++j) (*gE)(row, static_cast<Eigen::Index>(j)) += dEnt[p][j];
          }
          continue;
        }
        const auto len = F->cols();
        for (std::size_t j = 0; j < d; ++j) {
          for (Eigen::Index k = 0; k < len; ++k) {
            const auto col = static_cast<Eigen::Index>((j + static_cast<std::size_t>(k)) % d);
            if (gE) (*gE)(row, col) += (*F)(static_cast<Eigen::Index>(p), k) * dEnt[p][j];
            if (gF) (*gF)(static_cast<Eigen::Index>(p), k) += E(row, col) * dEnt[p][j];
          }
        }
      }
    }
  });
}

}  // namespace hkgx
