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

// hkgx: command-line entry point.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data or
// validation error, 3 numeric failure.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "hkgx/hkgx.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string isoNow() {
  const auto now = std::chrono::system_clock::now();
  const auto t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t fileDigest(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw hkgx::DataError("cannot read " + p.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return hkgx::fnv1a(buf.str());
}

// Digest of a file, or of every regular file directly inside a directory.
ordered_json digests(const fs::path& p) {
  ordered_json out = ordered_json::array();
  std::vector<fs::path> files;
  if (fs::is_directory(p)) {
    for (const auto& e : fs::directory_iterator(p)) {
      if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
  } else if (fs::is_regular_file(p)) {
    files.push_back(p);
  }
  for (const auto& f : files) {
    out.push_back({{"path", f.string()}, {"fnv1a64", hex64(fileDigest(f))}});
  }
  return out;
}

class Manifest {
 public:
  explicit Manifest(std::string sub) : started_(isoNow()) { j_["subcommand"] = std::move(sub); }

  void set(const std::string& key, ordered_json value) { config_[key] = std::move(value); }
  void seed(std::uint64_t s) { seed_ = s; }
  void input(const fs::path& p) {
    for (auto& d : digests(p)) inputs_.push_back(std::move(d));
  }

  void write(const fs::path& file) {
    j_["config"] = config_;
    j_["seed"] = seed_ ? ordered_json(*seed_) : ordered_json(nullptr);
    j_["inputs"] = inputs_;
    j_["version"] = std::string(hkgx::kVersion);
    j_["build"] = std::string(hkgx::kBuildHash);
    j_["started"] = started_;
    j_["finished"] = isoNow();
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary);
    if (!out) throw hkgx::DataError("cannot write manifest " + file.string());
    out << j_.dump(2) << '\n';
    spdlog::info("event=manifest path={}", file.string());
  }

 private:
  ordered_json j_;
  ordered_json config_ = ordered_json::object();
  ordered_json inputs_ = ordered_json::array();
  std::optional<std::uint64_t> seed_;
  std::string started_;
};

fs::path manifestFor(const fs::path& out) {
  if (fs::is_directory(out)) return out / "manifest.json";
  return fs::path(out.string() + ".manifest.json");
}

void writeJson(const fs::path& file, const ordered_json& j) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  if (!out) throw hkgx::DataError("cannot write " + file.string());
  out << j.dump(2) << '\n';
}

hkgx::HkgDataset loadData(const fs::path& dir, const std::string& format, bool strict, bool skipMalformed) {
  auto loaded = hkgx::loadDataset(dir, hkgx::parseSourceFormat(format), {strict, skipMalformed});
  for (const auto& w : loaded.report.warnings) spdlog::warn("event=malformed_line detail=\"{}\"", w);
  spdlog::info("event=loaded dir={} lines={} duplicates_dropped={} malformed_skipped={} entities={} relations={}",
               dir.string(), loaded.report.linesRead, loaded.report.duplicatesDropped,
               loaded.report.malformedSkipped, loaded.dataset.numEntities(), loaded.dataset.numRelations());
  return std::move(loaded.dataset);
}

ordered_json statsJson(const hkgx::DatasetStats& s) {
  return {{"n_e", s.numEntities},
          {"n_r", s.numRelations},
          {"n_r_pri", s.numPrimaryRelations},
          {"n_r_qua", s.numQualifierRelations},
          {"max_qualifiers", s.maxQualifiers},
          {"N_pri", s.numTripleFacts},
          {"N_qua", s.numQualifiedFacts},
          {"N", s.numFacts},
          {"sum_n_k", s.numQualifiers}};
}

std::string_view splitLabel(hkgx::Split s) { return hkgx::splitName(s); }

struct Common {
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  bool verbose = false;
};

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("hkgx");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("%Y-%m-%dT%H:%M:%S.%e level=%l %v");

  CLI::App app{"hkgx: hyper-relational knowledge graph toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("hkgx ") + std::string(hkgx::kVersion) + " (build " +
                                        std::string(hkgx::kBuildHash) + ")");
  Common common;
  app.add_option("--threads", common.threads, "worker cap for transform and eval")->check(CLI::PositiveNumber);
  app.add_flag("-v,--verbose", common.verbose, "debug logging");

  // ingest
  std::string format = "canonical";
  fs::path in;
  fs::path out;
  bool strict = false;
  bool skipMalformed = false;
  auto* ingest = app.add_subcommand("ingest", "parse a raw dataset into the canonical format");
  ingest->add_option("--format", format, "jf17k|wikipeople|fbauto|canonical")->required();
  ingest->add_option("--in", in, "input directory")->required();
  ingest->add_option("--out", out, "output directory")->required();
  ingest->add_flag("--strict", strict, "reject entities first seen outside train");
  ingest->add_flag("--skip-malformed", skipMalformed, "count malformed lines as warnings");

  // transform
  std::string variant = "equivalent";
  std::string splits = "all";
  auto* transformCmd = app.add_subcommand("transform", "turn a dataset into a triple graph");
  transformCmd->add_option("--variant", variant, "equivalent|plain|clique-plain|clique-semantic|no-distinction");
  transformCmd->add_option("--in", in, "dataset directory")->required();
  transformCmd->add_option("--out", out, "triples file")->required();
  transformCmd->add_option("--format", format, "dataset format");
  transformCmd->add_option("--splits", splits, "all or e.g. train+valid");

  // recover
  bool noSidecar = false;
  auto* recoverCmd = app.add_subcommand("recover", "rebuild facts from an equivalent-transformed graph");
  recoverCmd->add_option("--in", in, "triples file")->required();
  recoverCmd->add_option("--out", out, "output directory")->required();
  recoverCmd->add_flag("--no-sidecar", noSidecar, "ignore the metadata sidecar");

  // stats
  auto* statsCmd = app.add_subcommand("stats", "dataset and transformation statistics");
  statsCmd->add_option("--in", in, "dataset directory")->required();
  statsCmd->add_option("--format", format, "dataset format");
  statsCmd->add_option("--splits", splits, "all or e.g. train+valid");
  statsCmd->add_option("--out", out, "also write JSON here");

  // train
  fs::path configFile;
  fs::path data;
  fs::path curveFile;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  auto* trainCmd = app.add_subcommand("train", "train embeddings and write the best checkpoint");
  trainCmd->add_option("--config", configFile, "key=value config file");
  trainCmd->add_option("--data", data, "dataset directory")->required();
  trainCmd->add_option("--out", out, "checkpoint file")->required();
  trainCmd->add_option("--format", format, "dataset format");
  trainCmd->add_option("--set", overrides, "key=value override (repeatable)");
  trainCmd->add_option("--seed", seed, "seed for every random stream");
  trainCmd->add_option("--curve", curveFile, "learning-curve CSV (default: CKPT.curve.csv)");

  // eval
  fs::path ckpt;
  std::string split = "test";
  fs::path dumpRanks;
  auto* evalCmd = app.add_subcommand("eval", "filtered link prediction at every entity position");
  evalCmd->add_option("--ckpt", ckpt, "checkpoint")->required();
  evalCmd->add_option("--data", data, "dataset directory")->required();
  evalCmd->add_option("--split", split, "valid|test");
  evalCmd->add_option("--out", out, "report JSON")->required();
  evalCmd->add_option("--format", format, "dataset format");
  evalCmd->add_option("--dump-ranks", dumpRanks, "per-query rank CSV");

  // export-embeddings
  bool relations = false;
  auto* exportCmd = app.add_subcommand("export-embeddings", "write label<TAB>values rows");
  exportCmd->add_option("--ckpt", ckpt, "checkpoint")->required();
  exportCmd->add_option("--data", data, "dataset directory")->required();
  exportCmd->add_option("--out", out, "TSV file")->required();
  exportCmd->add_option("--format", format, "dataset format");
  exportCmd->add_flag("--relations", relations, "export relations instead of entities");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  if (common.verbose) spdlog::set_level(spdlog::level::debug);

  try {
    if (*ingest) {
      Manifest m("ingest");
      m.set("format", format);
      m.set("in", in.string());
      m.set("out", out.string());
      m.set("strict", strict);
      m.set("skip_malformed", skipMalformed);
      m.input(in);
      auto ds = loadData(in, format, strict, skipMalformed);
      ds.validate();
      hkgx::writeCanonical(ds, out);
      for (auto s : {hkgx::Split::train, hkgx::Split::valid, hkgx::Split::test}) {
        std::cout << splitLabel(s) << '\t' << ds.facts(s).size() << '\n';
      }
      m.write(out / "manifest.json");
    } else if (*transformCmd) {
      Manifest m("transform");
      m.set("variant", variant);
      m.set("in", in.string());
      m.set("out", out.string());
      m.set("format", format);
      m.set("splits", splits);
      m.input(in);
      auto ds = loadData(in, format, false, false);
      auto kg = hkgx::transform(ds, hkgx::parseVariant(variant), hkgx::parseSplitSet(splits));
      auto st = hkgx::verifyStats(kg, ds);
      hkgx::writeTransformed(kg, out);
      spdlog::info("event=transformed variant={} nodes={} edges={} relations={} mediators={}", variant,
                   st.nodeCount, st.edgeCount, st.relationCount, kg.numMediators());
      m.write(manifestFor(out));
    } else if (*recoverCmd) {
      Manifest m("recover");
      m.set("in", in.string());
      m.set("out", out.string());
      m.set("sidecar", !noSidecar);
      m.input(in);
      if (!noSidecar && fs::exists(hkgx::sidecarPath(in))) m.input(hkgx::sidecarPath(in));
      auto kg = hkgx::readTransformed(in, !noSidecar);
      auto facts = hkgx::recover(kg);
      fs::create_directories(out);
      std::ofstream os(out / "recovered.txt", std::ios::binary);
      if (!os) throw hkgx::DataError("cannot write " + (out / "recovered.txt").string());
      for (const auto& f : facts) os << hkgx::formatCanonicalLine(f) << '\n';
      spdlog::info("event=recovered facts={}", facts.size());
      m.write(out / "manifest.json");
    } else if (*statsCmd) {
      auto ds = loadData(in, format, false, false);
      auto st = hkgx::datasetStats(ds, hkgx::parseSplitSet(splits));
      auto j = statsJson(st);
      ordered_json sizes;
      for (auto s : {hkgx::Split::train, hkgx::Split::valid, hkgx::Split::test}) {
        sizes[std::string(splitLabel(s))] = ds.facts(s).size();
      }
      for (const auto& [k, v] : j.items()) std::cout << k << '\t' << v << '\n';
      for (const auto& [k, v] : sizes.items()) std::cout << "split." << k << '\t' << v << '\n';
      if (!out.empty()) {
        j["splits"] = sizes;
        writeJson(out, j);
        Manifest m("stats");
        m.set("in", in.string());
        m.set("format", format);
        m.set("splits", splits);
        m.input(in);
        m.write(manifestFor(out));
      }
    } else if (*trainCmd) {
      hkgx::RunConfig cfg;
      hkgx::KeyValues kv;
      if (!configFile.empty()) kv = hkgx::readKeyValues(configFile);
      for (const auto& o : overrides) {
        auto eq = o.find('=');
        if (eq == std::string::npos) throw hkgx::ConfigError("--set expects key=value, got '" + o + "'");
        kv[std::string(hkgx::detail::trim(o.substr(0, eq)))] = std::string(hkgx::detail::trim(o.substr(eq + 1)));
      }
      if (seed) {
        kv["train.seed"] = std::to_string(*seed);
      } else if (!kv.contains("train.seed")) {
        std::random_device rd;
        const auto drawn = (static_cast<std::uint64_t>(rd()) << 32) | rd();
        kv["train.seed"] = std::to_string(drawn);
        spdlog::info("event=random_seed seed={}", drawn);
      }
      hkgx::applyKeyValues(cfg, kv);
      cfg.validate();

      Manifest m("train");
      for (const auto& [k, v] : hkgx::toKeyValues(cfg)) m.set(k, v);
      m.set("data", data.string());
      m.set("out", out.string());
      m.seed(cfg.train.seed);
      m.input(data);
      if (!configFile.empty()) m.input(configFile);

      auto ds = loadData(data, format, false, false);
      if (curveFile.empty()) curveFile = out.string() + ".curve.csv";
      if (curveFile.has_parent_path()) fs::create_directories(curveFile.parent_path());
      std::ofstream curve(curveFile, std::ios::binary);
      if (!curve) throw hkgx::DataError("cannot write " + curveFile.string());
      hkgx::TrainHooks hooks;
      hooks.curve = &curve;
      hooks.onEpoch = [](const hkgx::CurvePoint& p) {
        if (p.validMrr) {
          spdlog::info("event=epoch epoch={} step={} train_loss={:.6f} valid_mrr={:.6f}", p.epoch, p.step,
                       p.trainLoss, *p.validMrr);
        } else {
          spdlog::debug("event=epoch epoch={} step={} train_loss={:.6f}", p.epoch, p.step, p.trainLoss);
        }
      };
      auto result = hkgx::train(ds, cfg, hooks);
      hkgx::saveCheckpoint(result.best, out);
      spdlog::info("event=trained steps={} best_epoch={} best_valid_mrr={:.6f} early_stopped={}", result.steps,
                   result.best.epoch, result.best.bestValidMrr, result.earlyStopped);
      m.write(manifestFor(out));
    } else if (*evalCmd) {
      Manifest m("eval");
      m.set("ckpt", ckpt.string());
      m.set("data", data.string());
      m.set("split", split);
      m.set("format", format);
      m.set("threads", common.threads);
      m.input(ckpt);
      m.input(data);
      const auto sp = hkgx::parseSplit(split);
      if (sp == hkgx::Split::train) throw hkgx::ConfigError("--split must be valid or test");
      auto ds = loadData(data, format, false, false);
      auto c = hkgx::loadCheckpoint(ckpt);
      auto model = hkgx::restoreModel(c, ds);
      m.seed(c.config.train.seed);
      const auto snap = model.snapshot();
      const auto filter = hkgx::buildFilterIndex(ds);
      auto report = hkgx::evaluate(snap.view(), ds.facts(sp), filter, ds.numEntities(), common.threads);
      auto j = report.toJson();
      j["split"] = split;
      j["queries"] = report.ranks.size();
      writeJson(out, j);
      if (!dumpRanks.empty()) {
        std::ofstream os(dumpRanks, std::ios::binary);
        if (!os) throw hkgx::DataError("cannot write " + dumpRanks.string());
        report.writeRanksCsv(os);
      }
      std::cout << "mrr\t" << report.overall.mrr << "\nhits@1\t" << report.overall.hits1 << "\nhits@3\t"
                << report.overall.hits3 << "\nhits@10\t" << report.overall.hits10 << '\n';
      m.write(manifestFor(out));
    } else if (*exportCmd) {
      Manifest m("export-embeddings");
      m.set("ckpt", ckpt.string());
      m.set("data", data.string());
      m.set("relations", relations);
      m.input(ckpt);
      m.input(data);
      auto ds = loadData(data, format, false, false);
      auto c = hkgx::loadCheckpoint(ckpt);
      auto model = hkgx::restoreModel(c, ds);
      const auto snap = model.snapshot();
      const auto& mat = relations ? snap.relations : snap.entities;
      const auto& vocab = relations ? ds.relations : ds.entities;
      if (out.has_parent_path()) fs::create_directories(out.parent_path());
      std::ofstream os(out, std::ios::binary);
      if (!os) throw hkgx::DataError("cannot write " + out.string());
      for (std::size_t i = 0; i < vocab.size(); ++i) {
        os << vocab.label(static_cast<std::int32_t>(i));
        for (Eigen::Index k = 0; k < mat.cols(); ++k) {
          os << '\t' << hkgx::detail::formatDouble(mat(static_cast<Eigen::Index>(i), k));
        }
        os << '\n';
      }
      m.write(manifestFor(out));
    }
  } catch (const hkgx::ConfigError& e) {
    spdlog::error("event=config_error detail=\"{}\"", e.what());
    return 1;
  } catch (const hkgx::NumericError& e) {
    spdlog::error("event=numeric_error detail=\"{}\"", e.what());
    return 3;
  } catch (const hkgx::DataError& e) {
    spdlog::error("event=data_error detail=\"{}\"", e.what());
    return 2;
  } catch (const fs::filesystem_error& e) {
    spdlog::error("event=data_error detail=\"{}\"", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("event=error detail=\"{}\"", e.what());
    return 2;
  }
  return 0;
}
