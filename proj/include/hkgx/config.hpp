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

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>

#include "hkgx/decoder.hpp"
#include "hkgx/encoder.hpp"
#include "hkgx/ingest.hpp"
#include "hkgx/transform.hpp"

namespace hkgx {

struct TrainConfig {
  Variant variant = Variant::equivalent;
  std::size_t batchSize = 128;
  double lr = 1e-3;
  std::size_t negatives = 10;
  std::size_t epochs = 200;
  /// Stop after this many optimizer steps; 0 means no limit.
  std::size_t maxSteps = 0;
  std::size_t evalEvery = 5;
  std::size_t patience = 5;
  std::uint64_t seed = 42;
  unsigned threads = 1;

  void validate() const {
    if (batchSize == 0) throw ConfigError("train.batch_size must be positive");
    if (!(lr > 0.0)) throw ConfigError("train.lr must be positive");
    if (negatives == 0) throw ConfigError("train.negatives must be positive");
    if (epochs == 0) throw ConfigError("train.epochs must be positive");
    if (evalEvery == 0) throw ConfigError("train.eval_every must be positive");
    if (patience == 0) throw ConfigError("train.patience must be positive");
    if (threads == 0) throw ConfigError("train.threads must be positive");
  }
};

struct RunConfig {
  EncoderConfig encoder;
  DecoderConfig decoder;
  TrainConfig train;

  void validate() const {
    encoder.validate();
    decoder.validate(encoder.dim);
    train.validate();
  }
};

using KeyValues = std::map<std::string, std::string>;

namespace detail {

inline std::string formatDouble(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename T>
T parseNumber(const std::string& key, const std::string& text) {
  T out{};
  auto res = std::from_chars(text.data(), text.data() + text.size(), out);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ConfigError("config key '" + key + "': cannot parse '" + text + "'");
  }
  return out;
}

inline bool parseBool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "on") return true;
  if (text == "false" || text == "0" || text == "off") return false;
  throw ConfigError("config key '" + key + "': expected true/false, got '" + text + "'");
}

}  // namespace detail

/// `key = value` lines; `#` starts a comment; later keys override earlier.
inline KeyValues parseKeyValues(std::string_view text, const std::string& source = "config") {
  KeyValues out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto body = detail::trim(line);
    if (body.empty()) continue;
    auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(source + ":" + std::to_string(lineNo) + ": expected key = value");
    }
    auto key = detail::trim(body.substr(0, eq));
    auto value = detail::trim(body.substr(eq + 1));
    if (key.empty()) throw ConfigError(source + ":" + std::to_string(lineNo) + ": empty key");
    out[std::string(key)] = std::string(value);
  }
  return out;
}

inline KeyValues readKeyValues(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + file.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parseKeyValues(buf.str(), file.string());
}

/// Applies overrides; unknown keys are errors.
inline void applyKeyValues(RunConfig& c, const KeyValues& kv) {
  using detail::parseNumber;
  for (const auto& [k, v] : kv) {
    auto& e = c.encoder;
    auto& d = c.decoder;
    auto& t = c.train;
    if (k == "encoder.flavor") e.flavor = parseEncoderFlavor(v);
    else if (k == "encoder.layers") e.layers = parseNumber<int>(k, v);
    else if (k == "encoder.dim") e.dim = parseNumber<int>(k, v);
    else if (k == "encoder.share_ratio") e.shareRatio = parseNumber<double>(k, v);
    else if (k == "encoder.composition") e.composition = parseComposition(v);
    else if (k == "encoder.dropout") e.dropout = parseNumber<double>(k, v);
    else if (k == "encoder.aggregation") e.aggregation = parseAggregation(v);
    else if (k == "encoder.activation") e.activation = parseActivation(v);
    else if (k == "decoder.flavor") d.flavor = parseDecoderFlavor(v);
    else if (k == "decoder.pooling") d.pooling = parsePooling(v);
    else if (k == "decoder.filter_length") d.filterLength = parseNumber<int>(k, v);
    else if (k == "decoder.positions") d.positions = parseNumber<int>(k, v);
    else if (k == "decoder.dropout") d.dropout = parseNumber<double>(k, v);
    else if (k == "decoder.batch_norm") d.batchNorm = detail::parseBool(k, v);
    else if (k == "train.variant") t.variant = parseVariant(v);
    else if (k == "train.batch_size") t.batchSize = parseNumber<std::size_t>(k, v);
    else if (k == "train.lr") t.lr = parseNumber<double>(k, v);
    else if (k == "train.negatives") t.negatives = parseNumber<std::size_t>(k, v);
    else if (k == "train.epochs") t.epochs = parseNumber<std::size_t>(k, v);
    else if (k == "train.max_steps") t.maxSteps = parseNumber<std::size_t>(k, v);
    else if (k == "train.eval_every") t.evalEvery = parseNumber<std::size_t>(k, v);
    else if (k == "train.patience") t.patience = parseNumber<std::size_t>(k, v);
    else if (k == "train.seed") t.seed = parseNumber<std::uint64_t>(k, v);
    else if (k == "train.threads") t.threads = parseNumber<unsigned>(k, v);
    else throw ConfigError("unknown config key '" + k + "'");
  }
}

/// Every field, defaults included, in a form applyKeyValues reads back.
inline KeyValues toKeyValues(const RunConfig& c) {
  using detail::formatDouble;
  const auto& e = c.encoder;
  const auto& d = c.decoder;
  const auto& t = c.train;
  return {
      {"encoder.flavor", std::string(encoderFlavorName(e.flavor))},
      {"encoder.layers", std::to_string(e.layers)},
      {"encoder.dim", std::to_string(e.dim)},
      {"encoder.share_ratio", formatDouble(e.shareRatio)},
      {"encoder.composition", std::string(compositionName(e.composition))},
      {"encoder.dropout", formatDouble(e.dropout)},
      {"encoder.aggregation", std::string(aggregationName(e.aggregation))},
      {"encoder.activation", std::string(activationName(e.activation))},
      {"decoder.flavor", std::string(decoderFlavorName(d.flavor))},
      {"decoder.pooling", std::string(poolingName(d.pooling))},
      {"decoder.filter_length", std::to_string(d.filterLength)},
      {"decoder.positions", std::to_string(d.positions)},
      {"decoder.dropout", formatDouble(d.dropout)},
      {"decoder.batch_norm", d.batchNorm ? "true" : "false"},
      {"train.variant", std::string(variantName(t.variant))},
      {"train.batch_size", std::to_string(t.batchSize)},
      {"train.lr", formatDouble(t.lr)},
      {"train.negatives", std::to_string(t.negatives)},
      {"train.epochs", std::to_string(t.epochs)},
      {"train.max_steps", std::to_string(t.maxSteps)},
      {"train.eval_every", std::to_string(t.evalEvery)},
      {"train.patience", std::to_string(t.patience)},
      {"train.seed", std::to_string(t.seed)},
      {"train.threads", std::to_string(t.threads)},
  };
}

}  // namespace hkgx
