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

#include <cctype>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hkgx/core.hpp"

namespace hkgx {

enum class SourceFormat { jf17k, wikipeople, fbauto, canonical };

inline SourceFormat parseSourceFormat(std::string_view name) {
  if (name == "jf17k") return SourceFormat::jf17k;
  if (name == "wikipeople") return SourceFormat::wikipeople;
  if (name == "fbauto") return SourceFormat::fbauto;
  if (name == "canonical") return SourceFormat::canonical;
  throw ConfigError("unknown format '" + std::string(name) + "'");
}

/// Labels carrying these markers would collide with names the transformation
/// generates.
inline constexpr char kReservedRelationChar = '#';
inline constexpr std::string_view kMediatorPrefix = "_med:";

inline void checkReservedLabels(const LabeledFact& f) {
  auto checkRelation = [](const std::string& r) {
    if (r.find(kReservedRelationChar) != std::string::npos) {
      throw ValidationError("relation label '" + r + "' contains reserved character '#'");
    }
  };
  auto checkEntity = [](const std::string& e) {
    if (e.starts_with(kMediatorPrefix)) {
      throw ValidationError("entity label '" + e + "' uses reserved prefix '_med:'");
    }
  };
  checkEntity(f.subject);
  checkEntity(f.object);
  checkRelation(f.relation);
  for (const auto& [a, v] : f.qualifiers) {
    checkRelation(a);
    checkEntity(v);
  }
}

namespace detail {

// Splits on whitespace runs. Two consecutive tabs mark an empty field.
inline std::vector<std::string> splitWhitespace(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  bool leading = true;
  while (i < line.size()) {
    std::size_t tabs = 0;
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) {
      if (line[i] == '\t') ++tabs;
      ++i;
    }
    if (!leading && tabs >= 2 && i < line.size()) throw FormatError("empty token");
    if (i >= line.size()) break;
    auto start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    out.emplace_back(line.substr(start, i - start));
    leading = false;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace detail

/// `relation e_s e_o e_1 ... e_n`: the first two entities are subject and
/// object; the relation splits into `<rel>_so` and `<rel>_<i>` per extra
/// position.
inline LabeledFact parseJf17kRecord(std::string_view line) {
  auto tokens = detail::splitWhitespace(line);
  if (tokens.size() < 3) {
    throw FormatError("record needs a relation and at least 2 entities, got " +
                      std::to_string(tokens.size()) + " tokens");
  }
  const std::string& raw = tokens[0];
  LabeledFact f{tokens[1], raw + "_so", tokens[2], {}};
  for (std::size_t i = 3; i < tokens.size(); ++i) {
    f.qualifiers.emplace_back(raw + "_" + std::to_string(i - 2), tokens[i]);
  }
  return f;
}

/// Role map with exactly one `<stem>_h` and one `<stem>_t` key; the stem
/// becomes the primary relation and every other role a qualifier, in record
/// order.
inline LabeledFact parseWikiPeopleRecord(
    const std::vector<std::pair<std::string, std::string>>& roles) {
  const std::pair<std::string, std::string>* head = nullptr;
  const std::pair<std::string, std::string>* tail = nullptr;
  for (const auto& kv : roles) {
    if (kv.first.size() > 2 && kv.first.ends_with("_h")) {
      if (head) throw FormatError("record has more than one '_h' role");
      head = &kv;
    } else if (kv.first.size() > 2 && kv.first.ends_with("_t")) {
      if (tail) throw FormatError("record has more than one '_t' role");
      tail = &kv;
    }
  }
  if (!head || !tail) throw FormatError("record lacks a '_h'/'_t' subject/object pair");
  auto stem = head->first.substr(0, head->first.size() - 2);
  if (stem != tail->first.substr(0, tail->first.size() - 2)) {
    throw FormatError("mismatched '_h'/'_t' stems: " + head->first + " vs " + tail->first);
  }
  LabeledFact f{head->second, stem, tail->second, {}};
  for (const auto& kv : roles) {
    if (&kv == head || &kv == tail) continue;
    f.qualifiers.push_back(kv);
  }
  return f;
}

/// One WikiPeople record: a JSON object (string or string-array values; the
/// numeric arity field is ignored), or the loose `{k:v, k: v}` notation.
/// Multi-valued roles expand into one qualifier per value.
inline LabeledFact parseWikiPeopleLine(std::string_view line) {
  std::vector<std::pair<std::string, std::string>> roles;
  auto body = detail::trim(line);
  auto parsed = nlohmann::ordered_json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (!parsed.is_discarded()) {
    if (!parsed.is_object()) throw FormatError("record is not a JSON object");
    for (const auto& [key, value] : parsed.items()) {
      if (value.is_string()) {
        roles.emplace_back(key, value.get<std::string>());
      } else if (value.is_array()) {
        for (const auto& v : value) {
          if (!v.is_string()) throw FormatError("role '" + key + "' has a non-string value");
          roles.emplace_back(key, v.get<std::string>());
        }
      } else if (!value.is_number()) {
        throw FormatError("role '" + key + "' has an unsupported value type");
      }
    }
  } else {
    if (body.size() < 2 || body.front() != '{' || body.back() != '}') {
      throw FormatError("record is neither JSON nor {role:value, ...}");
    }
    body = body.substr(1, body.size() - 2);
    std::size_t start = 0;
    while (start <= body.size()) {
      auto comma = body.find(',', start);
      auto item = detail::trim(body.substr(start, comma == std::string_view::npos ? comma : comma - start));
      auto colon = item.find(':');
      if (colon == std::string_view::npos) throw FormatError("role without ':'");
      auto key = detail::trim(item.substr(0, colon));
      auto val = detail::trim(item.substr(colon + 1));
      if (key.empty() || val.empty()) throw FormatError("empty role or value");
      roles.emplace_back(std::string(key), std::string(val));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
  }
  for (const auto& [k, v] : roles) {
    if (k.empty() || v.empty()) throw FormatError("empty role or value");
  }
  return parseWikiPeopleRecord(roles);
}

inline LabeledFact parseRecord(SourceFormat format, std::string_view line) {
  switch (format) {
    case SourceFormat::jf17k:
    case SourceFormat::fbauto:
      return parseJf17kRecord(line);
    case SourceFormat::wikipeople:
      return parseWikiPeopleLine(line);
    case SourceFormat::canonical:
      break;
  }
  return parseCanonicalLine(line);
}

struct LoadOptions {
  /// Reject entities that first appear outside the training split.
  bool strict = false;
  /// Count malformed lines as warnings instead of failing.
  bool skipMalformed = false;
};

struct LoadReport {
  std::size_t linesRead = 0;
  std::size_t malformedSkipped = 0;
  std::size_t duplicatesDropped = 0;
  std::vector<std::string> warnings;
  std::vector<std::filesystem::path> files;
};

struct LoadedDataset {
  HkgDataset dataset;
  LoadReport report;
};

inline std::filesystem::path splitFile(const std::filesystem::path& dir, SourceFormat format,
                                       Split split) {
  std::string name(splitName(split));
  std::vector<std::string> candidates;
  if (format == SourceFormat::wikipeople) {
    candidates = {"n-ary_" + name + ".json", name + ".json", name + ".txt", name};
  } else {
    candidates = {name + ".txt", name};
  }
  for (const auto& c : candidates) {
    auto p = dir / c;
    if (std::filesystem::is_regular_file(p)) return p;
  }
  throw DataError("missing " + name + " file in " + dir.string() + " (tried " + candidates.front() +
                  ")");
}

inline LoadedDataset loadDataset(const std::filesystem::path& dir, SourceFormat format,
                                 const LoadOptions& options = {}) {
  if (!std::filesystem::is_directory(dir)) {
    throw DataError("dataset directory not found: " + dir.string());
  }
  DatasetBuilder builder;
  LoadReport report;
  std::unordered_set<std::string> trainEntities;
  for (Split split : {Split::train, Split::valid, Split::test}) {
    auto path = splitFile(dir, format, split);
    report.files.push_back(path);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::string line;
    std::size_t lineNo = 0;
    std::size_t added = 0;
    while (std::getline(in, line)) {
      ++lineNo;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (detail::trim(line).empty()) continue;
      ++report.linesRead;
      LabeledFact lf;
      try {
        lf = parseRecord(format, line);
      } catch (const FormatError& e) {
        std::string msg = path.string() + ":" + std::to_string(lineNo) + ": " + e.what();
        if (!options.skipMalformed) throw FormatError(msg);
        ++report.malformedSkipped;
        report.warnings.push_back(msg);
        continue;
      }
      try {
        checkReservedLabels(lf);
      } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ":" + std::to_string(lineNo) + ": " + e.what());
      }
      if (split == Split::train) {
        trainEntities.insert(lf.subject);
        trainEntities.insert(lf.object);
        for (const auto& q : lf.qualifiers) trainEntities.insert(q.second);
      } else if (options.strict) {
        auto check = [&](const std::string& e) {
          if (!trainEntities.contains(e)) {
            throw ValidationError(path.string() + ":" + std::to_string(lineNo) + ": entity '" + e +
                                  "' does not occur in the training split");
          }
        };
        check(lf.subject);
        check(lf.object);
        for (const auto& q : lf.qualifiers) check(q.second);
      }
      if (builder.add(split, lf)) {
        ++added;
      } else {
        ++report.duplicatesDropped;
      }
    }
    if (split == Split::train && added == 0) {
      throw DataError("training split is empty: " + path.string());
    }
  }
  return {std::move(builder).build(), std::move(report)};
}

inline void writeCanonical(const HkgDataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (Split split : {Split::train, Split::valid, Split::test}) {
    auto path = dir / (std::string(splitName(split)) + ".txt");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    for (const auto& f : ds.facts(split)) out << formatCanonicalLine(ds.labeled(f)) << '\n';
  }
}

}  // namespace hkgx
