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
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "hkgx/error.hpp"

namespace hkgx {

// ---------------------------------------------------------------------------
// Identifiers
// ---------------------------------------------------------------------------

/// Dense index into a vocabulary. The tag keeps entity and relation id
/// spaces apart at compile time.
template <typename Tag>
struct Id {
  std::int32_t value = -1;

  constexpr Id() = default;
  constexpr explicit Id(std::int32_t v) : value(v) {}
  constexpr auto operator<=>(const Id&) const = default;
  [[nodiscard]] constexpr std::size_t index() const {
    return static_cast<std::size_t>(value);
  }
};

using EntityId = Id<struct EntityTag>;
using RelationId = Id<struct RelationTag>;

inline std::uint64_t fnv1a(std::string_view bytes,
                           std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::size_t hashCombine(std::size_t seed, std::size_t v) {
  return seed ^ (v + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
}

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

/// Bijective label <-> id table; ids are contiguous from 0 in first-intern
/// order.
class Vocabulary {
 public:
  std::int32_t intern(std::string_view label) {
    auto it = index_.find(std::string(label));
    if (it != index_.end()) return it->second;
    auto id = static_cast<std::int32_t>(labels_.size());
    labels_.emplace_back(label);
    index_.emplace(labels_.back(), id);
    return id;
  }

  [[nodiscard]] std::optional<std::int32_t> find(std::string_view label) const {
    auto it = index_.find(std::string(label));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  [[nodiscard]] const std::string& label(std::int32_t id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= labels_.size()) {
      throw VocabularyError("unknown vocabulary id " + std::to_string(id));
    }
    return labels_[static_cast<std::size_t>(id)];
  }

  [[nodiscard]] bool contains(std::int32_t id) const {
    return id >= 0 && static_cast<std::size_t>(id) < labels_.size();
  }
  [[nodiscard]] std::size_t size() const { return labels_.size(); }
  [[nodiscard]] const std::vector<std::string>& labels() const { return labels_; }

  bool operator==(const Vocabulary& other) const { return labels_ == other.labels_; }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::int32_t> index_;
};

// ---------------------------------------------------------------------------
// Facts
// ---------------------------------------------------------------------------

struct Qualifier {
  RelationId attribute;
  EntityId value;
  auto operator<=>(const Qualifier&) const = default;
};

/// One hyper-relational fact: a primary triple plus an ordered qualifier list.
/// A fact with no qualifiers is a plain triple.
struct HyperFact {
  EntityId subject;
  RelationId relation;
  EntityId object;
  std::vector<Qualifier> qualifiers;

  [[nodiscard]] std::size_t arity() const { return qualifiers.size(); }
  /// Entity positions: 0 = subject, 1 = object, 2 + i = value of qualifier i.
  [[nodiscard]] std::size_t numPositions() const { return qualifiers.size() + 2; }
  [[nodiscard]] EntityId entityAt(std::size_t position) const {
    if (position == 0) return subject;
    if (position == 1) return object;
    return qualifiers.at(position - 2).value;
  }
  void setEntityAt(std::size_t position, EntityId e) {
    if (position == 0) {
      subject = e;
    } else if (position == 1) {
      object = e;
    } else {
      qualifiers.at(position - 2).value = e;
    }
  }

  auto operator<=>(const HyperFact&) const = default;
  bool operator==(const HyperFact&) const = default;
};

struct HyperFactHash {
  std::size_t operator()(const HyperFact& f) const noexcept {
    std::size_t h = std::hash<std::int32_t>{}(f.subject.value);
    h = hashCombine(h, static_cast<std::size_t>(f.relation.value));
    h = hashCombine(h, static_cast<std::size_t>(f.object.value));
    for (const auto& q : f.qualifiers) {
      h = hashCombine(h, static_cast<std::size_t>(q.attribute.value));
      h = hashCombine(h, static_cast<std::size_t>(q.value.value));
    }
    return h;
  }
};

/// Sorts qualifiers by (attribute, value) and drops duplicate pairs.
/// Does not validate ids.
inline HyperFact canonicalized(HyperFact fact) {
  std::sort(fact.qualifiers.begin(), fact.qualifiers.end());
  fact.qualifiers.erase(std::unique(fact.qualifiers.begin(), fact.qualifiers.end()),
                        fact.qualifiers.end());
  return fact;
}

/// Canonical form with every id checked against the vocabulary sizes.
inline HyperFact canonicalize(HyperFact fact, std::size_t numEntities,
                              std::size_t numRelations) {
  auto checkEntity = [&](EntityId e) {
    if (e.value < 0 || e.index() >= numEntities) {
      throw VocabularyError("unknown entity id " + std::to_string(e.value));
    }
  };
  auto checkRelation = [&](RelationId r) {
    if (r.value < 0 || r.index() >= numRelations) {
      throw VocabularyError("unknown relation id " + std::to_string(r.value));
    }
  };
  checkEntity(fact.subject);
  checkEntity(fact.object);
  checkRelation(fact.relation);
  for (const auto& q : fact.qualifiers) {
    checkRelation(q.attribute);
    checkEntity(q.value);
  }
  return canonicalized(std::move(fact));
}

/// A fact spelled with string labels, as found in interchange files.
struct LabeledFact {
  std::string subject;
  std::string relation;
  std::string object;
  std::vector<std::pair<std::string, std::string>> qualifiers;

  bool operator==(const LabeledFact&) const = default;
  auto operator<=>(const LabeledFact&) const = default;
};

/// Qualifiers sorted by label pair and de-duplicated; used to compare facts
/// coming from different vocabularies.
inline LabeledFact labelCanonical(LabeledFact f) {
  std::sort(f.qualifiers.begin(), f.qualifiers.end());
  f.qualifiers.erase(std::unique(f.qualifiers.begin(), f.qualifiers.end()),
                     f.qualifiers.end());
  return f;
}

/// `s<TAB>r<TAB>o<TAB>a1<TAB>v1...`
inline std::string formatCanonicalLine(const LabeledFact& f) {
  std::string out = f.subject + '\t' + f.relation + '\t' + f.object;
  for (const auto& [a, v] : f.qualifiers) {
    out += '\t';
    out += a;
    out += '\t';
    out += v;
  }
  return out;
}

inline LabeledFact parseCanonicalLine(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    auto tab = line.find('\t', start);
    fields.emplace_back(line.substr(start, tab == std::string_view::npos ? tab : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  if (fields.size() < 3) {
    throw FormatError("canonical record needs at least 3 tab-separated fields, got " +
                      std::to_string(fields.size()));
  }
  if ((fields.size() - 3) % 2 != 0) {
    throw FormatError("canonical record has an attribute without a value");
  }
  for (const auto& f : fields) {
    if (f.empty()) throw FormatError("canonical record has an empty field");
  }
  LabeledFact fact{fields[0], fields[1], fields[2], {}};
  for (std::size_t i = 3; i < fields.size(); i += 2) {
    fact.qualifiers.emplace_back(fields[i], fields[i + 1]);
  }
  return fact;
}

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

enum class Split : std::uint8_t { train = 1, valid = 2, test = 4 };

/// Bitmask over splits.
class SplitSet {
 public:
  constexpr SplitSet() = default;
  constexpr SplitSet(Split s) : bits_(static_cast<std::uint8_t>(s)) {}  // NOLINT
  static constexpr SplitSet all() { return SplitSet(7); }
  constexpr SplitSet operator|(SplitSet o) const { return SplitSet(bits_ | o.bits_); }
  [[nodiscard]] constexpr bool has(Split s) const {
    return (bits_ & static_cast<std::uint8_t>(s)) != 0;
  }
  [[nodiscard]] constexpr std::uint8_t bits() const { return bits_; }
  constexpr bool operator==(const SplitSet&) const = default;

 private:
  constexpr explicit SplitSet(int bits) : bits_(static_cast<std::uint8_t>(bits)) {}
  std::uint8_t bits_ = 0;
};

inline std::string_view splitName(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::valid: return "valid";
    case Split::test: return "test";
  }
  return "?";
}

inline Split parseSplit(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "valid") return Split::valid;
  if (name == "test") return Split::test;
  throw ConfigError("unknown split '" + std::string(name) + "'");
}

/// "train", "valid", "test", "all", or a '+'-joined combination.
inline SplitSet parseSplitSet(std::string_view spec) {
  if (spec == "all") return SplitSet::all();
  SplitSet out;
  std::size_t start = 0;
  while (start <= spec.size()) {
    auto plus = spec.find('+', start);
    out = out | parseSplit(spec.substr(start, plus == std::string_view::npos ? plus : plus - start));
    if (plus == std::string_view::npos) break;
    start = plus + 1;
  }
  return out;
}

inline std::string splitSetName(SplitSet s) {
  if (s == SplitSet::all()) return "all";
  std::string out;
  for (Split sp : {Split::train, Split::valid, Split::test}) {
    if (!s.has(sp)) continue;
    if (!out.empty()) out += '+';
    out += splitName(sp);
  }
  return out;
}

class HkgDataset {
 public:
  Vocabulary entities;
  Vocabulary relations;
  std::vector<HyperFact> train;
  std::vector<HyperFact> valid;
  std::vector<HyperFact> test;

  [[nodiscard]] const std::vector<HyperFact>& facts(Split s) const {
    switch (s) {
      case Split::train: return train;
      case Split::valid: return valid;
      case Split::test: break;
    }
    return test;
  }
  std::vector<HyperFact>& facts(Split s) {
    return const_cast<std::vector<HyperFact>&>(std::as_const(*this).facts(s));
  }

  /// Facts of the selected splits in train -> valid -> test order with
  /// canonical duplicates across splits removed (first occurrence wins).
  [[nodiscard]] std::vector<HyperFact> selectFacts(SplitSet splits) const {
    std::vector<HyperFact> out;
    std::unordered_set<HyperFact, HyperFactHash> seen;
    for (Split s : {Split::train, Split::valid, Split::test}) {
      if (!splits.has(s)) continue;
      for (const auto& f : facts(s)) {
        if (seen.insert(f).second) out.push_back(f);
      }
    }
    return out;
  }

  [[nodiscard]] std::size_t numEntities() const { return entities.size(); }
  [[nodiscard]] std::size_t numRelations() const { return relations.size(); }

  /// Relations used as primary relation by any fact in any split, ascending.
  [[nodiscard]] std::vector<RelationId> primaryRelations() const {
    std::set<RelationId> rels;
    for (Split s : {Split::train, Split::valid, Split::test}) {
      for (const auto& f : facts(s)) rels.insert(f.relation);
    }
    return {rels.begin(), rels.end()};
  }

  [[nodiscard]] std::size_t maxQualifiers() const {
    std::size_t m = 0;
    for (Split s : {Split::train, Split::valid, Split::test}) {
      for (const auto& f : facts(s)) m = std::max(m, f.qualifiers.size());
    }
    return m;
  }

  [[nodiscard]] LabeledFact labeled(const HyperFact& f) const {
    LabeledFact out{entities.label(f.subject.value), relations.label(f.relation.value),
                    entities.label(f.object.value), {}};
    for (const auto& q : f.qualifiers) {
      out.qualifiers.emplace_back(relations.label(q.attribute.value),
                                  entities.label(q.value.value));
    }
    return out;
  }

  /// Checks every id resolves and facts are canonical and unique per split.
  void validate() const {
    for (Split s : {Split::train, Split::valid, Split::test}) {
      std::unordered_set<HyperFact, HyperFactHash> seen;
      for (const auto& f : facts(s)) {
        auto c = canonicalize(f, entities.size(), relations.size());
        if (c != f) throw ValidationError("non-canonical fact in split " + std::string(splitName(s)));
        if (!seen.insert(f).second) {
          throw ValidationError("duplicate fact in split " + std::string(splitName(s)));
        }
      }
    }
  }

  /// Stable digest of both vocabularies; checkpoints record it.
  [[nodiscard]] std::uint64_t vocabHash() const {
    std::uint64_t h = fnv1a("entities");
    for (const auto& l : entities.labels()) h = fnv1a(std::string_view(l.c_str(), l.size() + 1), h);
    h = fnv1a("relations", h);
    for (const auto& l : relations.labels()) h = fnv1a(std::string_view(l.c_str(), l.size() + 1), h);
    return h;
  }
};

/// Interns labeled facts into a dataset; vocabulary ids follow first
/// occurrence in call order.
class DatasetBuilder {
 public:
  HyperFact intern(const LabeledFact& lf) {
    HyperFact f;
    f.subject = EntityId(ds_.entities.intern(lf.subject));
    f.relation = RelationId(ds_.relations.intern(lf.relation));
    f.object = EntityId(ds_.entities.intern(lf.object));
    for (const auto& [a, v] : lf.qualifiers) {
      RelationId attr(ds_.relations.intern(a));
      EntityId val(ds_.entities.intern(v));
      f.qualifiers.push_back({attr, val});
    }
    return canonicalized(std::move(f));
  }

  /// Adds the fact to a split; returns false when it duplicates an earlier
  /// fact of the same split (and drops it).
  bool add(Split split, const LabeledFact& lf) {
    auto f = intern(lf);
    auto& seen = seen_[splitIndex(split)];
    if (!seen.insert(f).second) return false;
    ds_.facts(split).push_back(std::move(f));
    return true;
  }

  [[nodiscard]] const HkgDataset& peek() const { return ds_; }
  HkgDataset build() && { return std::move(ds_); }

 private:
  static std::size_t splitIndex(Split s) {
    return s == Split::train ? 0 : (s == Split::valid ? 1 : 2);
  }
  HkgDataset ds_;
  std::unordered_set<HyperFact, HyperFactHash> seen_[3];
};

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

struct DatasetStats {
  std::size_t numEntities = 0;             // n_e
  std::size_t numRelations = 0;            // n_r
  std::size_t numPrimaryRelations = 0;     // n_r^pri
  std::size_t numQualifierRelations = 0;   // n_r^qua
  std::size_t maxQualifiers = 0;           // n_a
  std::size_t numTripleFacts = 0;          // N^pri: facts without qualifiers
  std::size_t numQualifiedFacts = 0;       // N^qua
  std::size_t numFacts = 0;                // N
  std::size_t numQualifiers = 0;           // sum of n_k over qualified facts

  bool operator==(const DatasetStats&) const = default;
};

inline DatasetStats factStats(std::span<const HyperFact> facts, std::size_t numEntities,
                              std::size_t numRelations) {
  DatasetStats st;
  st.numEntities = numEntities;
  st.numRelations = numRelations;
  std::unordered_set<std::int32_t> pri;
  std::unordered_set<std::int32_t> qua;
  for (const auto& f : facts) {
    pri.insert(f.relation.value);
    for (const auto& q : f.qualifiers) qua.insert(q.attribute.value);
    st.maxQualifiers = std::max(st.maxQualifiers, f.qualifiers.size());
    if (f.qualifiers.empty()) {
      ++st.numTripleFacts;
    } else {
      ++st.numQualifiedFacts;
      st.numQualifiers += f.qualifiers.size();
    }
  }
  st.numFacts = facts.size();
  st.numPrimaryRelations = pri.size();
  st.numQualifierRelations = qua.size();
  return st;
}

/// Counts over the selected splits (duplicates across splits are counted
/// once). n_e and n_r are always the full vocabulary sizes.
inline DatasetStats datasetStats(const HkgDataset& ds, SplitSet splits = SplitSet::all()) {
  auto facts = ds.selectFacts(splits);
  return factStats(facts, ds.numEntities(), ds.numRelations());
}

}  // namespace hkgx

template <typename Tag>
struct std::hash<hkgx::Id<Tag>> {
  std::size_t operator()(const hkgx::Id<Tag>& id) const noexcept {
    return std::hash<std::int32_t>{}(id.value);
  }
};
