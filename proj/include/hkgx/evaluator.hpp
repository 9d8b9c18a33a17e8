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
#include <cstdint>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "hkgx/core.hpp"
#include "hkgx/decoder.hpp"

namespace hkgx {

enum class PositionKind : std::int32_t { subject = 0, object = 1, value = 2 };

inline PositionKind positionKind(std::size_t position) {
  if (position == 0) return PositionKind::subject;
  if (position == 1) return PositionKind::object;
  return PositionKind::value;
}

inline std::string_view positionKindName(PositionKind k) {
  switch (k) {
    case PositionKind::subject: return "subject";
    case PositionKind::object: return "object";
    case PositionKind::value: break;
  }
  return "value";
}

/// Known-true completions of each fact pattern with one entity blanked.
class FilterIndex {
 public:
  using Key = std::vector<std::int32_t>;

  /// Key layout: kind, relation, subject|-1, object|-1, blanked attribute|-1,
  /// then the remaining qualifier pairs in canonical order.
  static Key key(const HyperFact& f, std::size_t position) {
    Key k;
    k.reserve(5 + 2 * f.arity());
    const auto kind = positionKind(position);
    k.push_back(static_cast<std::int32_t>(kind));
    k.push_back(f.relation.value);
    k.push_back(position == 0 ? -1 : f.subject.value);
    k.push_back(position == 1 ? -1 : f.object.value);
    k.push_back(kind == PositionKind::value ? f.qualifiers[position - 2].attribute.value : -1);
    std::vector<Qualifier> rest;
    rest.reserve(f.arity());
    for (std::size_t i = 0; i < f.arity(); ++i) {
      if (i + 2 != position) rest.push_back(f.qualifiers[i]);
    }
    std::sort(rest.begin(), rest.end());
    for (const auto& q : rest) {
      k.push_back(q.attribute.value);
      k.push_back(q.value.value);
    }
    return k;
  }

  void add(const HyperFact& fact) {
    const auto f = canonicalized(fact);
    for (std::size_t p = 0; p < f.numPositions(); ++p) {
      auto& set = map_[key(f, p)];
      const auto e = f.entityAt(p).value;
      auto it = std::lower_bound(set.begin(), set.end(), e);
      if (it == set.end() || *it != e) set.insert(it, e);
    }
  }

  /// Sorted entity ids completing the pattern, or null.
  [[nodiscard]] const std::vector<std::int32_t>* find(const HyperFact& f, std::size_t position) const {
    auto it = map_.find(key(f, position));
    return it == map_.end() ? nullptr : &it->second;
  }

  [[nodiscard]] std::size_t size() const { return map_.size(); }

  /// Total entity memberships over all patterns.
  [[nodiscard]] std::size_t memberships() const {
    std::size_t n = 0;
    for (const auto& [k, v] : map_) n += v.size();
    return n;
  }

  [[nodiscard]] std::map<Key, std::vector<std::int32_t>> ordered() const {
    return {map_.begin(), map_.end()};
  }

 private:
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept {
      std::size_t h = k.size();
      for (auto v : k) h = hashCombine(h, static_cast<std::size_t>(v));
      return h;
    }
  };
  std::unordered_map<Key, std::vector<std::int32_t>, KeyHash> map_;
};

inline FilterIndex buildFilterIndex(const HkgDataset& ds, SplitSet splits = SplitSet::all()) {
  FilterIndex idx;
  for (Split s : {Split::train, Split::valid, Split::test}) {
    if (!splits.has(s)) continue;
    for (const auto& f : ds.facts(s)) idx.add(f);
  }
  return idx;
}

struct QueryRank {
  std::size_t fact = 0;
  std::size_t position = 0;
  std::size_t arity = 0;
  std::int64_t rank = 0;
  std::int64_t rawRank = 0;
};

struct Metrics {
  std::size_t count = 0;
  double mrr = 0.0;
  double hits1 = 0.0;
  double hits3 = 0.0;
  double hits10 = 0.0;

  void add(std::int64_t rank) {
    ++count;
    mrr += 1.0 / static_cast<double>(rank);
    hits1 += rank <= 1 ? 1.0 : 0.0;
    hits3 += rank <= 3 ? 1.0 : 0.0;
    hits10 += rank <= 10 ? 1.0 : 0.0;
  }

  void finish() {
    if (count == 0) return;
    const auto n = static_cast<double>(count);
    mrr /= n;
    hits1 /= n;
    hits3 /= n;
    hits10 /= n;
  }

  [[nodiscard]] nlohmann::ordered_json toJson() const {
    return {{"count", count}, {"mrr", mrr}, {"hits@1", hits1}, {"hits@3", hits3}, {"hits@10", hits10}};
  }
};

struct RankReport {
  std::vector<QueryRank> ranks;
  Metrics overall;
  std::map<std::string, Metrics> byPosition;
  std::map<std::size_t, Metrics> byArity;

  [[nodiscard]] nlohmann::ordered_json toJson() const {
    nlohmann::ordered_json j;
    j["overall"] = overall.toJson();
    nlohmann::ordered_json pos = nlohmann::ordered_json::object();
    for (const auto& [k, m] : byPosition) pos[k] = m.toJson();
    j["by_position"] = pos;
    nlohmann::ordered_json ar = nlohmann::ordered_json::object();
    for (const auto& [k, m] : byArity) ar[std::to_string(k)] = m.toJson();
    j["by_arity"] = ar;
    return j;
  }

  void writeRanksCsv(std::ostream& out) const {
    out << "fact,position,arity,rank,raw_rank\n";
    for (const auto& q : ranks) {
      out << q.fact << ',' << q.position << ',' << q.arity << ',' << q.rank << ',' << q.rawRank << '\n';
    }
  }
};

/// Aggregates per-query ranks in query order.
inline RankReport summarize(std::vector<QueryRank> ranks) {
  RankReport r;
  r.ranks = std::move(ranks);
  for (const auto& q : r.ranks) {
    r.overall.add(q.rank);
    r.byPosition[std::string(positionKindName(positionKind(q.position)))].add(q.rank);
    r.byArity[q.arity].add(q.rank);
  }
  r.overall.finish();
  for (auto& [k, m] : r.byPosition) m.finish();
  for (auto& [k, m] : r.byArity) m.finish();
  return r;
}

/// Filtered rank with gold losing ties: 1 + |{c != gold, c not a known
/// completion, score(c) >= score(gold)}|. Also returns the unfiltered rank.
inline std::pair<std::int64_t, std::int64_t> rankGold(const std::vector<double>& scores, std::int32_t gold,
                                                      const std::vector<std::int32_t>* known) {
  const double g = scores[static_cast<std::size_t>(gold)];
  std::int64_t raw = 1;
  std::int64_t filtered = 1;
  std::size_t ki = 0;
  for (std::size_t c = 0; c < scores.size(); ++c) {
    const auto ci = static_cast<std::int32_t>(c);
    bool isKnown = false;
    if (known) {
      while (ki < known->size() && (*known)[ki] < ci) ++ki;
      isKnown = ki < known->size() && (*known)[ki] == ci;
    }
    if (ci == gold || !(scores[c] >= g)) continue;
    ++raw;
    if (!isKnown) ++filtered;
  }
  return {filtered, raw};
}

/// Ranks every entity position of every query fact against candidates
/// [0, numCandidates). Queries are split across `threads` workers; output
/// order does not depend on the thread count.
inline RankReport evaluate(const ScoringView& view, std::span<const HyperFact> queries,
                           const FilterIndex& filter, std::size_t numCandidates, unsigned threads = 1) {
  std::vector<std::size_t> offsets(queries.size() + 1, 0);
  for (std::size_t i = 0; i < queries.size(); ++i) {
    offsets[i + 1] = offsets[i] + queries[i].numPositions();
  }
  std::vector<QueryRank> ranks(offsets.back());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto f = canonicalized(queries[i]);
      for (std::size_t p = 0; p < f.numPositions(); ++p) {
        const auto gold = f.entityAt(p).value;
        if (gold < 0 || static_cast<std::size_t>(gold) >= numCandidates) {
          throw VocabularyError("query entity " + std::to_string(gold) + " is not a candidate");
        }
        auto scores = scoreCandidates(f, p, numCandidates, view);
        auto [rank, raw] = rankGold(scores, gold, filter.find(f, p));
        ranks[offsets[i] + p] = {i, p, f.arity(), rank, raw};
      }
    }
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, queries.size()))));
  if (threads == 1) {
    work(0, queries.size());
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    const std::size_t chunk = (queries.size() + threads - 1) / threads;
    for (unsigned w = 0; w < threads; ++w) {
      const std::size_t b = std::min(queries.size(), w * chunk);
      const std::size_t e = std::min(queries.size(), b + chunk);
      pool.emplace_back([&, w, b, e] {
        try {
          work(b, e);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& err : errors) {
      if (err) std::rethrow_exception(err);
    }
  }
  return summarize(std::move(ranks));
}

}  // namespace hkgx
