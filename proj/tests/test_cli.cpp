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

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hkgx/hkgx.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace hkgx;

namespace {

const fs::path kToy = HKGX_SOURCE_DIR "/data/toy";

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() / ("hkgx_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }

  Outcome run(const std::string& args) {
    const auto o = dir / "stdout.txt";
    const auto e = dir / "stderr.txt";
    const std::string cmd = std::string("\"") + HKGX_CLI_PATH + "\" " + args + " >\"" + o.string() + "\" 2>\"" +
                            e.string() + "\"";
    const int status = std::system(cmd.c_str());
    Outcome r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(o);
    r.err = slurp(e);
    return r;
  }

  nlohmann::json json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

  std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

  fs::path dir;
};

}  // namespace

TEST_F(Cli, Version) {
  auto r = run("--version");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out.rfind("hkgx " + std::string(kVersion) + " (build ", 0), 0u) << r.out;
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("frobnicate").code, 1);
  EXPECT_EQ(run("stats --bogus").code, 1);
  EXPECT_EQ(run("transform --in x").code, 1);
}

TEST_F(Cli, MissingInputIsDataError) {
  auto missing = dir / "nope";
  auto r = run("stats --in " + q(missing));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find(missing.string()), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("level=error"), std::string::npos);
}

TEST_F(Cli, Stats) {
  auto r = run("stats --in " + q(kToy));
  ASSERT_EQ(r.code, 0) << r.err;
  auto ds = loadDataset(kToy, SourceFormat::canonical).dataset;
  EXPECT_NE(r.out.find("n_e\t" + std::to_string(ds.numEntities())), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("n_r\t" + std::to_string(ds.numRelations())), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("split.train\t" + std::to_string(ds.train.size())), std::string::npos) << r.out;

  auto withOut = run("stats --in " + q(kToy) + " --out " + q(dir / "stats.json"));
  ASSERT_EQ(withOut.code, 0);
  EXPECT_EQ(json(dir / "stats.json")["n_e"], ds.numEntities());
  EXPECT_TRUE(fs::exists(dir / "stats.json.manifest.json"));
}

TEST_F(Cli, TransformRecoverRoundTrip) {
  auto r = run("transform --variant equivalent --in " + q(kToy) + " --out " + q(dir / "kg.tsv"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(sidecarPath(dir / "kg.tsv")));
  auto m = json(dir / "kg.tsv.manifest.json");
  EXPECT_EQ(m["subcommand"], "transform");
  EXPECT_EQ(m["config"]["variant"], "equivalent");
  EXPECT_FALSE(m["inputs"].empty());
  EXPECT_TRUE(m.contains("version"));
  EXPECT_TRUE(m.contains("started"));
  EXPECT_TRUE(m.contains("finished"));

  auto rec = run("recover --in " + q(dir / "kg.tsv") + " --out " + q(dir / "rec"));
  ASSERT_EQ(rec.code, 0) << rec.err;
  EXPECT_TRUE(fs::exists(dir / "rec" / "manifest.json"));
  std::vector<LabeledFact> got;
  std::istringstream lines(slurp(dir / "rec" / "recovered.txt"));
  for (std::string l; std::getline(lines, l);) got.push_back(parseCanonicalLine(l));
  auto ds = loadDataset(kToy, SourceFormat::canonical).dataset;
  EXPECT_EQ(oracle::factSet(got), oracle::factSet(oracle::labeledFacts(ds)));
}

TEST_F(Cli, TransformIsByteStable) {
  ASSERT_EQ(run("transform --in " + q(kToy) + " --out " + q(dir / "a.tsv")).code, 0);
  ASSERT_EQ(run("transform --in " + q(kToy) + " --out " + q(dir / "b.tsv")).code, 0);
  EXPECT_EQ(slurp(dir / "a.tsv"), slurp(dir / "b.tsv"));
  EXPECT_EQ(slurp(sidecarPath(dir / "a.tsv")), slurp(sidecarPath(dir / "b.tsv")));
}

TEST_F(Cli, TransformVariantNames) {
  for (std::string v : {"plain", "clique-plain", "clique-semantic", "no-distinction"}) {
    EXPECT_EQ(run("transform --variant " + v + " --in " + q(kToy) + " --out " + q(dir / (v + ".tsv"))).code, 0) << v;
  }
  EXPECT_EQ(run("transform --variant star --in " + q(kToy) + " --out " + q(dir / "x.tsv")).code, 1);
  auto rec = run("recover --in " + q(dir / "plain.tsv") + " --out " + q(dir / "rec"));
  EXPECT_EQ(rec.code, 2);
}

TEST_F(Cli, IngestCanonical) {
  auto r = run("ingest --format canonical --in " + q(kToy) + " --out " + q(dir / "ds"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "ds" / "manifest.json"));
  auto a = loadDataset(kToy, SourceFormat::canonical).dataset;
  auto b = loadDataset(dir / "ds", SourceFormat::canonical).dataset;
  EXPECT_EQ(oracle::factSet(oracle::labeledFacts(a)), oracle::factSet(oracle::labeledFacts(b)));
}

TEST_F(Cli, IngestMalformedLine) {
  fs::create_directories(dir / "raw");
  std::ofstream(dir / "raw" / "train.txt") << "a\tr\tb\nbroken line\n";
  std::ofstream(dir / "raw" / "valid.txt") << "";
  std::ofstream(dir / "raw" / "test.txt") << "";
  auto r = run("ingest --format canonical --in " + q(dir / "raw") + " --out " + q(dir / "ds"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("train.txt:2"), std::string::npos) << r.err;
  EXPECT_EQ(run("ingest --format canonical --skip-malformed --in " + q(dir / "raw") + " --out " + q(dir / "ds")).code, 0);
}

TEST_F(Cli, TrainEvalExport) {
  {
    std::ofstream cfg(dir / "run.cfg");
    cfg << "encoder.dim = 8\nencoder.layers = 1\ntrain.epochs = 4\ntrain.eval_every = 2\n";
  }
  auto t = run("train --config " + q(dir / "run.cfg") + " --set train.negatives=3 --seed 7 --data " + q(kToy) +
               " --out " + q(dir / "model.ckpt"));
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_NE(t.err.find("event=trained"), std::string::npos);
  auto m = json(dir / "model.ckpt.manifest.json");
  EXPECT_EQ(m["seed"], 7);
  EXPECT_EQ(m["config"]["encoder.dim"], "8");
  EXPECT_EQ(m["config"]["train.negatives"], "3");
  EXPECT_EQ(m["config"]["decoder.flavor"], "mdistmult");  // defaults materialized

  auto curve = slurp(dir / "model.ckpt.curve.csv");
  EXPECT_EQ(curve.rfind("step,epoch,train_loss,valid_mrr,seconds\n", 0), 0u);

  auto e = run("eval --ckpt " + q(dir / "model.ckpt") + " --data " + q(kToy) + " --split valid --out " +
               q(dir / "report.json") + " --dump-ranks " + q(dir / "ranks.csv"));
  ASSERT_EQ(e.code, 0) << e.err;
  auto report = json(dir / "report.json");
  auto ckpt = loadCheckpoint(dir / "model.ckpt");
  EXPECT_EQ(report["overall"]["mrr"].get<double>(), ckpt.bestValidMrr);
  EXPECT_TRUE(fs::exists(dir / "report.json.manifest.json"));
  EXPECT_EQ(slurp(dir / "ranks.csv").rfind("fact,position,arity,rank,raw_rank\n", 0), 0u);

  auto x = run("export-embeddings --ckpt " + q(dir / "model.ckpt") + " --data " + q(kToy) + " --out " +
               q(dir / "emb.tsv"));
  ASSERT_EQ(x.code, 0) << x.err;
  std::istringstream rows(slurp(dir / "emb.tsv"));
  std::string first;
  std::getline(rows, first);
  EXPECT_EQ(std::count(first.begin(), first.end(), '\t'), 8);

  // Same seed, same checkpoint bytes.
  auto again = run("train --config " + q(dir / "run.cfg") + " --set train.negatives=3 --seed 7 --data " + q(kToy) +
                   " --out " + q(dir / "model2.ckpt"));
  ASSERT_EQ(again.code, 0);
  EXPECT_EQ(slurp(dir / "model.ckpt"), slurp(dir / "model2.ckpt"));
}

TEST_F(Cli, TrainWithoutSeedLogsOne) {
  auto t = run("train --set encoder.dim=4 --set encoder.layers=1 --set train.epochs=1 --data " + q(kToy) +
               " --out " + q(dir / "m.ckpt"));
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_NE(t.err.find("event=random_seed seed="), std::string::npos);
  EXPECT_TRUE(json(dir / "m.ckpt.manifest.json")["seed"].is_number());
}

TEST_F(Cli, TrainWithAllDefaults) {
  auto t = run("train --seed 3 --data " + q(kToy) + " --out " + q(dir / "m.ckpt"));
  ASSERT_EQ(t.code, 0) << t.err;
  auto m = json(dir / "m.ckpt.manifest.json");
  EXPECT_EQ(m["config"]["encoder.dim"], "200");
  EXPECT_EQ(m["config"]["encoder.flavor"], "compgcn");
  EXPECT_TRUE(fs::exists(dir / "m.ckpt.curve.csv"));
}

TEST_F(Cli, ConfigErrors) {
  EXPECT_EQ(run("train --set encoder.bogus=1 --data " + q(kToy) + " --out " + q(dir / "m.ckpt")).code, 1);
  EXPECT_EQ(run("train --set encoder.dim=0 --data " + q(kToy) + " --out " + q(dir / "m.ckpt")).code, 1);
  EXPECT_EQ(run("train --set noequals --data " + q(kToy) + " --out " + q(dir / "m.ckpt")).code, 1);
}

TEST_F(Cli, NumericFailureExitsThree) {
  auto t = run("train --set encoder.dim=4 --set encoder.layers=1 --set train.lr=1e300 --set train.epochs=50 "
               "--set encoder.activation=identity --set encoder.composition=multiply --seed 1 --data " +
               q(kToy) + " --out " + q(dir / "m.ckpt"));
  EXPECT_EQ(t.code, 3) << t.err;
  EXPECT_NE(t.err.find("event=numeric_error"), std::string::npos);
}

TEST_F(Cli, EvalRejectsMismatchedData) {
  ASSERT_EQ(run("train --set encoder.dim=4 --set encoder.layers=1 --set train.epochs=1 --seed 1 --data " + q(kToy) +
                " --out " + q(dir / "m.ckpt")).code,
            0);
  fs::create_directories(dir / "other");
  std::ofstream(dir / "other" / "train.txt") << "x\tr\ty\n";
  std::ofstream(dir / "other" / "valid.txt") << "x\tr\ty\n";
  std::ofstream(dir / "other" / "test.txt") << "x\tr\ty\n";
  auto e = run("eval --ckpt " + q(dir / "m.ckpt") + " --data " + q(dir / "other") + " --out " + q(dir / "r.json"));
  EXPECT_EQ(e.code, 2);
  EXPECT_NE(e.err.find("vocabulary"), std::string::npos) << e.err;
}
