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
#include <array>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "hkgx/core.hpp"
#include "hkgx/ingest.hpp"

namespace hkgx {

enum class Variant { equivalent, plain, cliquePlain, cliqueSemantic, noDistinction };

inline std::string_view variantName(Variant v) {
  switch (v) {
    case Variant::equivalent: return "equivalent";
    case Variant::plain: return "plain";
    case Variant::cliquePlain: return "clique-plain";
    case Variant::cliqueSemantic: return "clique-semantic";
    case Variant::noDistinction: return "no-distinction";
  }
  return "?";
}

inline Variant parseVariant(std::string_view name) {
  for (Variant v : {Variant::equivalent, Variant::plain, Variant::cliquePlain,
                    Variant::cliqueSemantic, Variant::noDistinction}) {
    if (variantName(v) == name) return v;
  }
  throw ConfigError("unknown transformation variant '" + std::string(name) + "'");
}

inline bool isStarVariant(Variant v) {
  return v == Variant::equivalent || v == Variant::plain || v == Variant::noDistinction;
}

inline constexpr std::string_view kSubSuffix = "#sub";
inline constexpr std::string_view kObjSuffix = "#obj";

inline std::string mediatorLabel(std::size_t factIndex) {
  return std::string(kMediatorPrefix) + std::to_string(factIndex);
}

/// Edge of the transformed graph over extended vocabularies.
struct Triple {
  std::int32_t head = 0;
  std::int32_t relation = 0;
  std::int32_t tail = 0;
  auto operator<=>(const Triple&) const = default;
};

struct TripleHash {
  std::size_t operator()(const Triple& t) const noexcept {
    auto h = std::hash<std::int32_t>{}(t.head);
    h = hashCombine(h, static_cast<std::size_t>(t.relation));
    return hashCombine(h, static_cast<std::size_t>(t.tail));
  }
};

/// Triple graph produced from an HKG. Original entities occupy ext ids
/// [0, numOriginalEntities); mediators follow. Original relations occupy
/// [0, numOriginalRelations); generated `#sub`/`#obj` relations follow.
struct TransformedKg {
  Variant variant = Variant::equivalent;
  SplitSet splits = SplitSet::all();
  std::size_t numOriginalEntities = 0;
  std::size_t numOriginalRelations = 0;
  Vocabulary entities;
  Vocabulary relations;
  std::vector<Triple> triples;
  /// Per mediator slot: index of the source fact.
  std::vector<std::int64_t> mediatorOf;
  /// Per mediator slot: primary relation (original relation id).
  std::vector<RelationId> psi;
  /// Per triple: source fact index when the triple is (also) a qualifier-free
  /// fact, else -1. Empty when provenance is unknown.
  std::vector<std::int64_t> standaloneFact;

  [[nodiscard]] std::size_t numMediators() const { return mediatorOf.size(); }
  [[nodiscard]] bool isMediator(std::int32_t ext) const {
    return ext >= static_cast<std::int32_t>(numOriginalEntities);
  }
  [[nodiscard]] std::size_t mediatorSlot(std::int32_t ext) const {
    return static_cast<std::size_t>(ext) - numOriginalEntities;
  }
  [[nodiscard]] bool hasProvenance() const { return standaloneFact.size() == triples.size(); }

  /// `head<TAB>relation<TAB>tail` lines.
  [[nodiscard]] std::string triplesText() const {
    std::string out;
    for (const auto& t : triples) {
      out += entities.label(t.head);
      out += '\t';
      out += relations.label(t.relation);
      out += '\t';
      out += entities.label(t.tail);
      out += '\n';
    }
    return out;
  }
};

namespace detail {

class KgEmitter {
 public:
  explicit KgEmitter(TransformedKg& kg) : kg_(kg) {}

  void emit(std::int32_t h, std::int32_t r, std::int32_t t, std::int64_t standaloneOf = -1) {
    Triple tr{h, r, t};
    auto [it, inserted] = index_.emplace(tr, kg_.triples.size());
    if (inserted) {
      kg_.triples.push_back(tr);
      kg_.standaloneFact.push_back(standaloneOf);
    } else if (standaloneOf >= 0 && kg_.standaloneFact[it->second] < 0) {
      kg_.standaloneFact[it->second] = standaloneOf;
    }
  }

 private:
  TransformedKg& kg_;
  std::unordered_map<Triple, std::size_t, TripleHash> index_;
};

}  // namespace detail

/// Transforms the selected splits of `ds` into a triple graph.
///
/// equivalent: per qualifier-bearing fact k, a mediator `_med:k` with
/// (s,r,o), (b,r#sub,s), (b,r#obj,o), (b,a_i,v_i); qualifier-free facts stay
/// (s,r,o). no-distinction drops the (s,r,o) edge of qualifier-bearing facts.
/// plain: star with every spoke labeled r. clique-plain: (p_i,r,p_j) for each
/// participant pair i<j over [s,o,v_1..v_n]. clique-semantic: like
/// clique-plain, but a pair whose later member is v_j is labeled a_j.
inline TransformedKg transform(const HkgDataset& ds, Variant variant,
                               SplitSet splits = SplitSet::all()) {
  for (const auto& label : ds.relations.labels()) {
    if (label.find(kReservedRelationChar) != std::string::npos) {
      throw ValidationError("relation label '" + label + "' contains reserved character '#'");
    }
  }
  for (const auto& label : ds.entities.labels()) {
    if (label.starts_with(kMediatorPrefix)) {
      throw ValidationError("entity label '" + label + "' uses reserved prefix '_med:'");
    }
  }

  TransformedKg kg;
  kg.variant = variant;
  kg.splits = splits;
  kg.numOriginalEntities = ds.numEntities();
  kg.numOriginalRelations = ds.numRelations();
  for (const auto& l : ds.entities.labels()) kg.entities.intern(l);
  for (const auto& l : ds.relations.labels()) kg.relations.intern(l);

  const auto facts = ds.selectFacts(splits);

  std::unordered_map<std::int32_t, std::pair<std::int32_t, std::int32_t>> subObj;
  if (variant == Variant::equivalent || variant == Variant::noDistinction) {
    std::set<std::int32_t> primary;
    for (const auto& f : facts) primary.insert(f.relation.value);
    for (auto r : primary) {
      const auto& base = ds.relations.label(r);
      auto sub = kg.relations.intern(base + std::string(kSubSuffix));
      auto obj = kg.relations.intern(base + std::string(kObjSuffix));
      subObj.emplace(r, std::make_pair(sub, obj));
    }
  }

  detail::KgEmitter emit(kg);
  for (std::size_t k = 0; k < facts.size(); ++k) {
    const auto& f = facts[k];
    const auto s = f.subject.value;
    const auto r = f.relation.value;
    const auto o = f.object.value;
    const auto fi = static_cast<std::int64_t>(k);

    if (f.qualifiers.empty()) {
      emit.emit(s, r, o, fi);
      continue;
    }

    if (isStarVariant(variant)) {
      auto b = kg.entities.intern(mediatorLabel(k));
      kg.mediatorOf.push_back(fi);
      kg.psi.push_back(f.relation);
      if (variant == Variant::plain) {
        emit.emit(b, r, s);
        emit.emit(b, r, o);
        for (const auto& q : f.qualifiers) emit.emit(b, r, q.value.value);
      } else {
        if (variant == Variant::equivalent) emit.emit(s, r, o);
        const auto& [sub, obj] = subObj.at(r);
        emit.emit(b, sub, s);
        emit.emit(b, obj, o);
        for (const auto& q : f.qualifiers) emit.emit(b, q.attribute.value, q.value.value);
      }
      continue;
    }

    std::vector<std::int32_t> participants{s, o};
    for (const auto& q : f.qualifiers) participants.push_back(q.value.value);
    for (std::size_t j = 1; j < participants.size(); ++j) {
      for (std::size_t i = 0; i < j; ++i) {
        std::int32_t label = r;
        if (variant == Variant::cliqueSemantic && j >= 2) {
          label = f.qualifiers[j - 2].attribute.value;
        }
        emit.emit(participants[i], label, participants[j]);
      }
    }
  }
  return kg;
}

inline TransformedKg transformEquivalent(const HkgDataset& ds, SplitSet splits = SplitSet::all()) {
  return transform(ds, Variant::equivalent, splits);
}

inline TransformedKg transformVariant(const HkgDataset& ds, Variant variant,
                                      SplitSet splits = SplitSet::all()) {
  return transform(ds, variant, splits);
}

// ---------------------------------------------------------------------------
// Recovery
// ---------------------------------------------------------------------------

/// Rebuilds the hyper-relational facts from an equivalent-transformed graph
/// by locating each mediator's (r#sub, r#obj) motif. Qualifier-free facts are
/// the non-mediator triples that are flagged standalone (with provenance) or
/// are not the motif edge of any mediator (without provenance).
inline std::vector<LabeledFact> recover(const TransformedKg& kg) {
  if (kg.variant != Variant::equivalent) {
    throw StructureError("recovery requires an equivalent-transformed graph, got " +
                         std::string(variantName(kg.variant)));
  }
  enum class Kind { original, sub, obj };
  std::vector<Kind> kind(kg.relations.size(), Kind::original);
  std::vector<std::int32_t> baseOf(kg.relations.size(), -1);
  for (std::size_t r = 0; r < kg.relations.size(); ++r) {
    const auto& label = kg.relations.label(static_cast<std::int32_t>(r));
    std::string_view sv(label);
    bool isSub = sv.ends_with(kSubSuffix);
    bool isObj = sv.ends_with(kObjSuffix);
    if (!isSub && !isObj) continue;
    kind[r] = isSub ? Kind::sub : Kind::obj;
    auto base = kg.relations.find(sv.substr(0, sv.size() - kSubSuffix.size()));
    if (!base) throw StructureError("generated relation '" + label + "' has no base relation");
    baseOf[r] = *base;
  }

  std::unordered_map<Triple, std::size_t, TripleHash> position;
  position.reserve(kg.triples.size());
  for (std::size_t i = 0; i < kg.triples.size(); ++i) position.emplace(kg.triples[i], i);

  const std::size_t numMed = kg.entities.size() - kg.numOriginalEntities;
  std::vector<std::vector<std::size_t>> incident(numMed);
  for (std::size_t i = 0; i < kg.triples.size(); ++i) {
    const auto& t = kg.triples[i];
    if (kg.isMediator(t.tail)) {
      throw StructureError("mediator " + kg.entities.label(t.tail) + " appears as a tail");
    }
    if (kg.isMediator(t.head)) {
      incident[kg.mediatorSlot(t.head)].push_back(i);
    } else if (kind[static_cast<std::size_t>(t.relation)] != Kind::original) {
      throw StructureError("relation " + kg.relations.label(t.relation) +
                           " used on a non-mediator entity");
    }
  }

  struct Keyed {
    std::int64_t key;
    LabeledFact fact;
  };
  std::vector<Keyed> out;
  std::vector<bool> motifTriple(kg.triples.size(), false);

  for (std::size_t m = 0; m < numMed; ++m) {
    const auto ext = static_cast<std::int32_t>(kg.numOriginalEntities + m);
    const auto& name = kg.entities.label(ext);
    std::int64_t subEdge = -1;
    std::int64_t objEdge = -1;
    for (auto i : incident[m]) {
      auto k = kind[static_cast<std::size_t>(kg.triples[i].relation)];
      if (k == Kind::sub) {
        if (subEdge >= 0) throw StructureError("mediator " + name + " has several #sub edges");
        subEdge = static_cast<std::int64_t>(i);
      } else if (k == Kind::obj) {
        if (objEdge >= 0) throw StructureError("mediator " + name + " has several #obj edges");
        objEdge = static_cast<std::int64_t>(i);
      }
    }
    if (subEdge < 0 || objEdge < 0) {
      throw StructureError("mediator " + name + " lacks a #sub or #obj edge");
    }
    const auto& se = kg.triples[static_cast<std::size_t>(subEdge)];
    const auto& oe = kg.triples[static_cast<std::size_t>(objEdge)];
    auto base = baseOf[static_cast<std::size_t>(se.relation)];
    if (base != baseOf[static_cast<std::size_t>(oe.relation)]) {
      throw StructureError("mediator " + name + " has #sub/#obj edges of different relations");
    }
    auto motif = position.find(Triple{se.tail, base, oe.tail});
    if (motif == position.end()) {
      throw StructureError("mediator " + name + " has no primary triple edge");
    }
    motifTriple[motif->second] = true;

    LabeledFact f{kg.entities.label(se.tail), kg.relations.label(base), kg.entities.label(oe.tail),
                  {}};
    for (auto i : incident[m]) {
      const auto& t = kg.triples[i];
      if (kind[static_cast<std::size_t>(t.relation)] != Kind::original) continue;
      f.qualifiers.emplace_back(kg.relations.label(t.relation), kg.entities.label(t.tail));
    }
    if (f.qualifiers.empty()) throw StructureError("mediator " + name + " has no qualifiers");

    std::int64_t key = static_cast<std::int64_t>(incident[m].front());
    if (kg.hasProvenance() && m < kg.mediatorOf.size()) {
      key = kg.mediatorOf[m];
    }
    out.push_back({key, labelCanonical(std::move(f))});
  }

  for (std::size_t i = 0; i < kg.triples.size(); ++i) {
    const auto& t = kg.triples[i];
    if (kg.isMediator(t.head)) continue;
    std::int64_t key = static_cast<std::int64_t>(i);
    if (kg.hasProvenance()) {
      if (kg.standaloneFact[i] < 0) continue;
      key = kg.standaloneFact[i];
    } else if (motifTriple[i]) {
      continue;
    }
    out.push_back({key, LabeledFact{kg.entities.label(t.head), kg.relations.label(t.relation),
                                    kg.entities.label(t.tail), {}}});
  }

  std::stable_sort(out.begin(), out.end(),
                   [](const Keyed& a, const Keyed& b) { return a.key < b.key; });
  std::vector<LabeledFact> facts;
  facts.reserve(out.size());
  for (auto& k : out) facts.push_back(std::move(k.fact));
  return facts;
}

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

struct TransformStats {
  std::size_t nodeCount = 0;
  std::size_t edgeCount = 0;
  std::size_t relationCount = 0;
  std::size_t expectedNodes = 0;
  std::size_t expectedEdges = 0;
  std::size_t expectedRelations = 0;
  /// Named terms of the closed-form expectation, for diagnostics.
  std::vector<std::pair<std::string, long long>> terms;

  [[nodiscard]] bool exact() const {
    return nodeCount == expectedNodes && edgeCount == expectedEdges &&
           relationCount == expectedRelations;
  }
};

/// Computes graph sizes and checks them against closed-form counts from the
/// dataset statistics:
///   equivalent      nodes n_e + N^qua, edges N^pri + sum(3 + n_k) - shared
///                   primary triples, relations n_r + 2 n_r^pri
///   no-distinction  nodes n_e + N^qua, edges N^pri + sum(2 + n_k)
///   plain           nodes n_e + N^qua, edges N^pri + sum(2 + n_k) - repeated
///                   participants within a fact
///   clique-*        nodes n_e, edges N^pri + sum C(n_k + 2, 2) - coinciding
///                   pair edges
/// Throws StatsMismatch with a per-term breakdown when a count differs.
inline TransformStats verifyStats(const TransformedKg& kg, const HkgDataset& ds) {
  const auto facts = ds.selectFacts(kg.splits);
  const auto st = factStats(facts, ds.numEntities(), ds.numRelations());

  TransformStats out;
  out.nodeCount = kg.entities.size();
  out.edgeCount = kg.triples.size();
  out.relationCount = kg.relations.size();

  auto term = [&](std::string name, long long v) { out.terms.emplace_back(std::move(name), v); };
  term("n_e", static_cast<long long>(st.numEntities));
  term("n_r", static_cast<long long>(st.numRelations));
  term("n_r_pri", static_cast<long long>(st.numPrimaryRelations));
  term("N_pri", static_cast<long long>(st.numTripleFacts));
  term("N_qua", static_cast<long long>(st.numQualifiedFacts));
  term("sum_n_k", static_cast<long long>(st.numQualifiers));

  const bool star = isStarVariant(kg.variant);
  out.expectedNodes = st.numEntities + (star ? st.numQualifiedFacts : 0);
  out.expectedRelations = st.numRelations;
  if (kg.variant == Variant::equivalent || kg.variant == Variant::noDistinction) {
    out.expectedRelations += 2 * st.numPrimaryRelations;
  }

  long long edges = static_cast<long long>(st.numTripleFacts);
  switch (kg.variant) {
    case Variant::equivalent: {
      std::set<std::tuple<std::int32_t, std::int32_t, std::int32_t>> primary;
      for (const auto& f : facts) primary.emplace(f.subject.value, f.relation.value, f.object.value);
      long long shared = static_cast<long long>(facts.size() - primary.size());
      edges += static_cast<long long>(3 * st.numQualifiedFacts + st.numQualifiers) - shared;
      term("shared_primary_triples", shared);
      break;
    }
    case Variant::noDistinction:
      edges += static_cast<long long>(2 * st.numQualifiedFacts + st.numQualifiers);
      break;
    case Variant::plain: {
      long long repeated = 0;
      for (const auto& f : facts) {
        if (f.qualifiers.empty()) continue;
        std::set<std::int32_t> p{f.subject.value, f.object.value};
        for (const auto& q : f.qualifiers) p.insert(q.value.value);
        repeated += static_cast<long long>(f.numPositions() - p.size());
      }
      edges += static_cast<long long>(2 * st.numQualifiedFacts + st.numQualifiers) - repeated;
      term("repeated_participants", repeated);
      break;
    }
    case Variant::cliquePlain:
    case Variant::cliqueSemantic: {
      edges = 0;
      long long pairs = 0;
      std::set<std::tuple<std::int32_t, std::int32_t, std::int32_t>> distinct;
      for (const auto& f : facts) {
        const auto m = static_cast<long long>(f.numPositions());
        pairs += m * (m - 1) / 2;
        for (std::size_t j = 1; j < f.numPositions(); ++j) {
          for (std::size_t i = 0; i < j; ++i) {
            auto label = (kg.variant == Variant::cliqueSemantic && j >= 2)
                             ? f.qualifiers[j - 2].attribute.value
                             : f.relation.value;
            distinct.emplace(f.entityAt(i).value, label, f.entityAt(j).value);
          }
        }
      }
      edges = static_cast<long long>(distinct.size());
      term("participant_pairs", pairs);
      term("coinciding_pairs", pairs - static_cast<long long>(distinct.size()));
      break;
    }
  }
  out.expectedEdges = static_cast<std::size_t>(edges);

  if (!out.exact()) {
    std::ostringstream msg;
    msg << "transform statistics mismatch for variant " << variantName(kg.variant) << ":";
    msg << " nodes " << out.nodeCount << " vs expected " << out.expectedNodes << " (diff "
        << static_cast<long long>(out.nodeCount) - static_cast<long long>(out.expectedNodes) << ");";
    msg << " edges " << out.edgeCount << " vs expected " << out.expectedEdges << " (diff "
        << static_cast<long long>(out.edgeCount) - static_cast<long long>(out.expectedEdges) << ");";
    msg << " relations " << out.relationCount << " vs expected " << out.expectedRelations
        << " (diff "
        << static_cast<long long>(out.relationCount) -
               static_cast<long long>(out.expectedRelations)
        << "); terms:";
    for (const auto& [k, v] : out.terms) msg << ' ' << k << '=' << v;
    throw StatsMismatch(msg.str());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

inline std::filesystem::path sidecarPath(const std::filesystem::path& triplesFile) {
  return std::filesystem::path(triplesFile.string() + ".meta.json");
}

/// Writes the triple file and its JSON sidecar (vocabularies, mediator
/// bookkeeping, standalone-triple provenance).
inline void writeTransformed(const TransformedKg& kg, const std::filesystem::path& file) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw DataError("cannot write " + file.string());
    out << kg.triplesText();
  }
  nlohmann::ordered_json meta;
  meta["format"] = "hkgx-transformed-kg";
  meta["version"] = 1;
  meta["variant"] = std::string(variantName(kg.variant));
  meta["splits"] = splitSetName(kg.splits);
  meta["num_original_entities"] = kg.numOriginalEntities;
  meta["num_original_relations"] = kg.numOriginalRelations;
  meta["entities"] = kg.entities.labels();
  meta["relations"] = kg.relations.labels();
  nlohmann::ordered_json mediators = nlohmann::ordered_json::array();
  for (std::size_t m = 0; m < kg.numMediators(); ++m) {
    mediators.push_back({{"fact", kg.mediatorOf[m]},
                         {"psi", kg.relations.label(kg.psi[m].value)}});
  }
  meta["mediators"] = std::move(mediators);
  nlohmann::ordered_json standalone = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < kg.standaloneFact.size(); ++i) {
    if (kg.standaloneFact[i] >= 0) standalone.push_back({i, kg.standaloneFact[i]});
  }
  meta["standalone"] = std::move(standalone);
  std::ofstream out(sidecarPath(file), std::ios::binary);
  if (!out) throw DataError("cannot write " + sidecarPath(file).string());
  out << meta.dump(1) << '\n';
}

/// Reads a transformed graph. With `useSidecar` and a sidecar present, the
/// result equals what was written; otherwise vocabularies are rebuilt from
/// the labels (`_med:` entities are mediators, `#sub`/`#obj` relations are
/// generated) and provenance is unknown.
inline TransformedKg readTransformed(const std::filesystem::path& file, bool useSidecar = true) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("cannot open transformed graph " + file.string());
  std::vector<std::array<std::string, 3>> rows;
  std::string line;
  std::size_t lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto a = line.find('\t');
    auto b = a == std::string::npos ? a : line.find('\t', a + 1);
    if (b == std::string::npos || line.find('\t', b + 1) != std::string::npos) {
      throw FormatError(file.string() + ":" + std::to_string(lineNo) +
                        ": expected head<TAB>relation<TAB>tail");
    }
    rows.push_back({line.substr(0, a), line.substr(a + 1, b - a - 1), line.substr(b + 1)});
  }

  TransformedKg kg;
  const auto side = sidecarPath(file);
  if (useSidecar && std::filesystem::exists(side)) {
    std::ifstream sin(side, std::ios::binary);
    auto meta = nlohmann::json::parse(sin, nullptr, false);
    if (meta.is_discarded() || meta.value("format", "") != "hkgx-transformed-kg") {
      throw FormatError("invalid sidecar " + side.string());
    }
    kg.variant = parseVariant(meta.at("variant").get<std::string>());
    kg.splits = parseSplitSet(meta.at("splits").get<std::string>());
    kg.numOriginalEntities = meta.at("num_original_entities").get<std::size_t>();
    kg.numOriginalRelations = meta.at("num_original_relations").get<std::size_t>();
    for (const auto& l : meta.at("entities")) kg.entities.intern(l.get<std::string>());
    for (const auto& l : meta.at("relations")) kg.relations.intern(l.get<std::string>());
    for (const auto& m : meta.at("mediators")) {
      kg.mediatorOf.push_back(m.at("fact").get<std::int64_t>());
      auto r = kg.relations.find(m.at("psi").get<std::string>());
      if (!r) throw FormatError("sidecar psi names an unknown relation");
      kg.psi.emplace_back(*r);
    }
    auto resolve = [&](const Vocabulary& v, const std::string& l) {
      auto id = v.find(l);
      if (!id) throw FormatError("label '" + l + "' missing from sidecar vocabulary");
      return *id;
    };
    for (const auto& r : rows) {
      kg.triples.push_back({resolve(kg.entities, r[0]), resolve(kg.relations, r[1]),
                            resolve(kg.entities, r[2])});
    }
    kg.standaloneFact.assign(kg.triples.size(), -1);
    for (const auto& s : meta.at("standalone")) {
      auto idx = s.at(0).get<std::size_t>();
      if (idx >= kg.triples.size()) throw FormatError("sidecar standalone index out of range");
      kg.standaloneFact[idx] = s.at(1).get<std::int64_t>();
    }
    return kg;
  }

  auto isMed = [](const std::string& l) { return l.starts_with(kMediatorPrefix); };
  auto isGenerated = [](const std::string& l) {
    return std::string_view(l).ends_with(kSubSuffix) || std::string_view(l).ends_with(kObjSuffix);
  };
  std::vector<std::pair<std::int64_t, std::string>> mediators;
  std::unordered_set<std::string> seenMed;
  std::vector<std::string> generated;
  std::unordered_set<std::string> seenGen;
  for (const auto& r : rows) {
    for (const auto* e : {&r[0], &r[2]}) {
      if (isMed(*e)) {
        if (seenMed.insert(*e).second) {
          std::int64_t k = 0;
          auto digits = std::string_view(*e).substr(kMediatorPrefix.size());
          auto res = std::from_chars(digits.data(), digits.data() + digits.size(), k);
          if (res.ec != std::errc() || res.ptr != digits.data() + digits.size()) {
            throw FormatError("malformed mediator label '" + *e + "'");
          }
          mediators.emplace_back(k, *e);
        }
      } else {
        kg.entities.intern(*e);
      }
    }
    if (isGenerated(r[1])) {
      if (seenGen.insert(r[1]).second) generated.push_back(r[1]);
    } else {
      kg.relations.intern(r[1]);
    }
  }
  kg.numOriginalEntities = kg.entities.size();
  kg.numOriginalRelations = kg.relations.size();
  std::sort(mediators.begin(), mediators.end());
  for (const auto& [k, label] : mediators) {
    kg.entities.intern(label);
    kg.mediatorOf.push_back(k);
  }
  for (const auto& g : generated) kg.relations.intern(g);
  for (const auto& r : rows) {
    kg.triples.push_back({*kg.entities.find(r[0]), *kg.relations.find(r[1]),
                          *kg.entities.find(r[2])});
  }
  // psi follows from the #sub edge when present.
  kg.psi.assign(kg.mediatorOf.size(), RelationId(-1));
  for (const auto& t : kg.triples) {
    if (!kg.isMediator(t.head)) continue;
    std::string_view rl(kg.relations.label(t.relation));
    if (!rl.ends_with(kSubSuffix)) continue;
    if (auto base = kg.relations.find(rl.substr(0, rl.size() - kSubSuffix.size()))) {
      kg.psi[kg.mediatorSlot(t.head)] = RelationId(*base);
    }
  }
  return kg;
}

}  // namespace hkgx
