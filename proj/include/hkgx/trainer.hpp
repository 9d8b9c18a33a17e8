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

#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hkgx/config.hpp"
#include "hkgx/evaluator.hpp"
#include "hkgx/model.hpp"

namespace hkgx {

/// k corruptions per entity position, in position order. Each replaces the
/// entity at that position with a uniformly drawn different entity; the
/// result is not re-canonicalized, so the corrupted slot stays put.
inline std::vector<HyperFact> sampleNegatives(const HyperFact& fact, std::size_t k,
                                              std::size_t numEntities, RngStream& rng) {
  if (numEntities < 2) throw DataError("negative sampling needs at least 2 entities");
  std::vector<HyperFact> out;
  out.reserve(k * fact.numPositions());
  for (std::size_t p = 0; p < fact.numPositions(); ++p) {
    const auto truth = static_cast<std::uint64_t>(fact.entityAt(p).value);
    for (std::size_t i = 0; i < k; ++i) {
      auto e = rng.below(numEntities - 1);
      if (e >= truth) ++e;
      HyperFact neg = fact;
      neg.setEntityAt(p, EntityId(static_cast<std::int32_t>(e)));
      out.push_back(std::move(neg));
    }
  }
  return out;
}

/// -log(exp(pos) / (exp(pos) + sum exp(neg))), with max subtraction.
inline double lossForFact(double positive, std::span<const double> negatives) {
  if (negatives.empty()) return 0.0;
  double m = positive;
  for (double s : negatives) m = std::max(m, s);
  double z = std::exp(positive - m);
  for (double s : negatives) z += std::exp(s - m);
  return m + std::log(z) - positive;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

inline constexpr char kCheckpointMagic[8] = {'H', 'K', 'G', 'X', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  RunConfig config;
  std::uint64_t vocabHash = 0;
  std::uint64_t step = 0;
  std::size_t epoch = 0;
  double bestValidMrr = 0.0;
  std::vector<std::string> names;
  std::vector<nn::Matrix> params;
  std::uint64_t optimizerStep = 0;
  std::vector<nn::Matrix> firstMoments;
  std::vector<nn::Matrix> secondMoments;
};

namespace detail {

template <typename T>
void writeLe(std::ostream& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T readLe(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw DataError("checkpoint truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T v;
  std::memcpy(&v, bytes, sizeof(T));
  return v;
}

inline void writeBlock(std::ostream& out, const nn::Matrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) writeLe<double>(out, m.data()[i]);
}

inline nn::Matrix readBlock(std::istream& in, Eigen::Index rows, Eigen::Index cols) {
  nn::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = readLe<double>(in);
  return m;
}

}  // namespace detail

inline void writeCheckpoint(const Checkpoint& c, std::ostream& out) {
  nlohmann::ordered_json header;
  header["format_version"] = kCheckpointVersion;
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& [k, v] : toKeyValues(c.config)) cfg[k] = v;
  header["config"] = cfg;
  header["vocab_hash"] = c.vocabHash;
  header["step"] = c.step;
  header["epoch"] = c.epoch;
  header["best_valid_mrr"] = detail::formatDouble(c.bestValidMrr);
  header["init"] = "uniform(-0.1,0.1) embeddings, glorot-uniform weights";
  nlohmann::ordered_json params = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < c.params.size(); ++i) {
    params.push_back({{"name", c.names[i]}, {"rows", c.params[i].rows()}, {"cols", c.params[i].cols()}});
  }
  header["parameters"] = params;
  header["optimizer_step"] = c.optimizerStep;
  header["optimizer_moments"] = !c.firstMoments.empty();
  const std::string text = header.dump();
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::writeLe<std::uint32_t>(out, kCheckpointVersion);
  detail::writeLe<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& m : c.params) detail::writeBlock(out, m);
  for (const auto& m : c.firstMoments) detail::writeBlock(out, m);
  for (const auto& m : c.secondMoments) detail::writeBlock(out, m);
}

inline void saveCheckpoint(const Checkpoint& c, const std::filesystem::path& file) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + file.string());
  writeCheckpoint(c, out);
  if (!out) throw DataError("failed writing checkpoint " + file.string());
}

inline Checkpoint readCheckpoint(std::istream& in) {
  char magic[sizeof kCheckpointMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
    throw DataError("not a checkpoint (bad magic bytes)");
  }
  const auto version = detail::readLe<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto len = detail::readLe<std::uint64_t>(in);
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw DataError("checkpoint truncated");
  auto header = nlohmann::json::parse(text, nullptr, false);
  if (header.is_discarded()) throw DataError("checkpoint header is not valid JSON");

  Checkpoint c;
  try {
    KeyValues kv;
    for (const auto& [k, v] : header.at("config").items()) kv[k] = v.get<std::string>();
    applyKeyValues(c.config, kv);
    c.vocabHash = header.at("vocab_hash").get<std::uint64_t>();
    c.step = header.at("step").get<std::uint64_t>();
    c.epoch = header.at("epoch").get<std::size_t>();
    c.bestValidMrr = detail::parseNumber<double>("best_valid_mrr", header.at("best_valid_mrr").get<std::string>());
    c.optimizerStep = header.at("optimizer_step").get<std::uint64_t>();
    std::vector<std::pair<Eigen::Index, Eigen::Index>> shapes;
    for (const auto& p : header.at("parameters")) {
      c.names.push_back(p.at("name").get<std::string>());
      shapes.emplace_back(p.at("rows").get<Eigen::Index>(), p.at("cols").get<Eigen::Index>());
    }
    for (auto [r, k] : shapes) c.params.push_back(detail::readBlock(in, r, k));
    if (header.at("optimizer_moments").get<bool>()) {
      for (auto [r, k] : shapes) c.firstMoments.push_back(detail::readBlock(in, r, k));
      for (auto [r, k] : shapes) c.secondMoments.push_back(detail::readBlock(in, r, k));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint header: ") + e.what());
  }
  return c;
}

inline Checkpoint loadCheckpoint(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + file.string());
  return readCheckpoint(in);
}

/// Positions the model is sized for: subject, object and the widest
/// qualifier list.
inline std::size_t maxPositions(const HkgDataset& ds) { return ds.maxQualifiers() + 2; }

inline Model buildModel(const HkgDataset& ds, const RunConfig& cfg) {
  cfg.validate();
  auto kg = transform(ds, cfg.train.variant, SplitSet(Split::train));
  return Model(kg, cfg.encoder, cfg.decoder, maxPositions(ds), cfg.train.seed);
}

/// Rebuilds the model a checkpoint was trained with on `ds` and loads its
/// parameters.
inline Model restoreModel(const Checkpoint& c, const HkgDataset& ds) {
  if (c.vocabHash != ds.vocabHash()) {
    throw DataError("checkpoint vocabulary hash does not match the dataset");
  }
  Model m = buildModel(ds, c.config);
  auto params = m.parameters();
  if (params.size() != c.params.size()) {
    throw DataError("checkpoint has " + std::to_string(c.params.size()) + " parameters, model expects " +
                    std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->name != c.names[i] || params[i]->value.rows() != c.params[i].rows() ||
        params[i]->value.cols() != c.params[i].cols()) {
      throw DataError("checkpoint parameter '" + c.names[i] + "' does not match model parameter '" +
                      params[i]->name + "'");
    }
    params[i]->value = c.params[i];
  }
  return m;
}

inline Checkpoint captureCheckpoint(Model& m, const nn::Adam* opt, const RunConfig& cfg,
                                    std::uint64_t vocabHash) {
  Checkpoint c;
  c.config = cfg;
  c.vocabHash = vocabHash;
  for (auto* p : m.parameters()) {
    c.names.push_back(p->name);
    c.params.push_back(p->value);
  }
  if (opt) {
    c.optimizerStep = opt->stepCount();
    c.firstMoments = opt->firstMoments();
    c.secondMoments = opt->secondMoments();
  }
  return c;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct CurvePoint {
  std::uint64_t step = 0;
  std::size_t epoch = 0;
  double trainLoss = 0.0;
  std::optional<double> validMrr;
  double seconds = 0.0;
};

inline void writeCurveHeader(std::ostream& out) { out << "step,epoch,train_loss,valid_mrr,seconds\n"; }

inline void writeCurvePoint(std::ostream& out, const CurvePoint& p) {
  out << p.step << ',' << p.epoch << ',' << detail::formatDouble(p.trainLoss) << ',';
  if (p.validMrr) out << detail::formatDouble(*p.validMrr);
  out << ',' << detail::formatDouble(p.seconds) << '\n';
}

struct TrainHooks {
  /// Receives one CSV row per epoch when set.
  std::ostream* curve = nullptr;
  std::function<void(const CurvePoint&)> onEpoch;
};

struct TrainResult {
  Checkpoint best;
  std::vector<CurvePoint> curve;
  double initialLoss = 0.0;
  double finalLoss = 0.0;
  std::uint64_t steps = 0;
  bool earlyStopped = false;
};

/// Records the summed loss of `batch` (each fact against its negatives).
inline nn::Var batchLoss(nn::Tape& t, const Model::Forward& fw, const std::vector<HyperFact>& batch,
                         std::size_t negatives, std::size_t numEntities, RelationPooling pooling,
                         RngStream& rng) {
  std::vector<HyperFact> all;
  std::vector<nn::ScoreGroup> groups;
  for (const auto& f : batch) {
    auto negs = sampleNegatives(f, negatives, numEntities, rng);
    groups.push_back({all.size(), negs.size() + 1});
    all.push_back(f);
    for (auto& n : negs) all.push_back(std::move(n));
  }
  auto scores = scoreFacts(t, fw.entities, fw.relations, fw.filters, std::move(all), pooling);
  return nn::softmaxCrossEntropy(t, scores, std::move(groups));
}

/// Filtered validation MRR for the current parameters.
inline double validationMrr(const Model& m, const HkgDataset& ds, const FilterIndex& filter, unsigned threads) {
  const auto snap = m.snapshot();
  auto report = evaluate(snap.view(), ds.valid, filter, ds.numEntities(), threads);
  return report.overall.mrr;
}

/// Mini-batch training on the train split's transformed graph with early
/// stopping on filtered validation MRR. Returns the best checkpoint.
inline TrainResult train(const HkgDataset& ds, const RunConfig& cfg, const TrainHooks& hooks = {}) {
  cfg.validate();
  if (ds.train.empty()) throw DataError("training split is empty");
  Model model = buildModel(ds, cfg);
  nn::Adam opt(model.parameters(), nn::AdamConfig{cfg.train.lr});
  const FilterIndex filter = buildFilterIndex(ds);
  const auto vocabHash = ds.vocabHash();
  const auto start = std::chrono::steady_clock::now();

  RngStream root(cfg.train.seed, "train");
  RngStream negRng = root.split("negatives");
  TrainResult result;
  std::optional<Checkpoint> best;
  double bestMrr = -1.0;
  std::size_t bad = 0;
  bool stop = false;
  std::uint64_t step = 0;
  if (hooks.curve) writeCurveHeader(*hooks.curve);

  std::vector<std::size_t> order(ds.train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= cfg.train.epochs && !stop; ++epoch) {
    RngStream shuffleRng = root.split("shuffle").split(std::to_string(epoch));
    shuffle(order, shuffleRng);
    double epochLoss = 0.0;
    for (std::size_t b = 0; b < order.size(); b += cfg.train.batchSize) {
      std::vector<HyperFact> batch;
      for (std::size_t i = b; i < std::min(order.size(), b + cfg.train.batchSize); ++i) {
        batch.push_back(ds.train[order[i]]);
      }
      nn::Tape t;
      RngStream dropRng = root.split("dropout").split(std::to_string(step));
      auto fw = model.forward(t, nn::Mode::train, dropRng);
      auto loss = batchLoss(t, fw, batch, cfg.train.negatives, ds.numEntities(), cfg.decoder.pooling, negRng);
      const double value = t.value(loss)(0, 0);
      if (!std::isfinite(value)) {
        throw NumericError("non-finite loss at step " + std::to_string(step) + " (epoch " +
                           std::to_string(epoch) + ")");
      }
      opt.zeroGrad();
      t.backward(loss);
      try {
        opt.step();
      } catch (const NumericError& e) {
        throw NumericError("step " + std::to_string(step) + ": " + e.what());
      }
      if (step == 0) result.initialLoss = value;
      result.finalLoss = value;
      epochLoss += value;
      ++step;
      if (cfg.train.maxSteps > 0 && step >= cfg.train.maxSteps) {
        stop = true;
        break;
      }
    }

    CurvePoint point;
    point.step = step;
    point.epoch = epoch;
    point.trainLoss = epochLoss / static_cast<double>(ds.train.size());
    const bool last = stop || epoch == cfg.train.epochs;
    if (!ds.valid.empty() && (epoch % cfg.train.evalEvery == 0 || last)) {
      const double mrr = validationMrr(model, ds, filter, cfg.train.threads);
      point.validMrr = mrr;
      if (mrr > bestMrr) {
        bestMrr = mrr;
        bad = 0;
        best = captureCheckpoint(model, &opt, cfg, vocabHash);
        best->step = step;
        best->epoch = epoch;
        best->bestValidMrr = mrr;
      } else if (++bad >= cfg.train.patience) {
        stop = true;
        result.earlyStopped = true;
      }
    }
    point.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.curve.push_back(point);
    if (hooks.curve) writeCurvePoint(*hooks.curve, point);
    if (hooks.onEpoch) hooks.onEpoch(point);
  }

  if (!best) {
    best = captureCheckpoint(model, &opt, cfg, vocabHash);
    best->step = step;
    best->epoch = result.curve.empty() ? 0 : result.curve.back().epoch;
    best->bestValidMrr = 0.0;
  }
  result.best = std::move(*best);
  result.steps = step;
  return result;
}

}  // namespace hkgx
