/*
 * Copyright 2026 The hippoptd Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

#include "hippoptd/cli.hpp"

using namespace hippoptd;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "hippoptd");
  std::ostringstream out, err;
  const int code = cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "hippoptd_test_cli" / name;
  fs::remove_all(dir);
  return dir.string();
}

double field(const std::string& text, const std::string& key) {
  std::istringstream in(text);
  std::string k;
  std::string v;
  while (in >> k) {
    if (k == key && in >> v) return std::stod(v);
  }
  return std::nan("");
}

// JSON with the provenance timestamp blanked.
nlohmann::json stable_json(const std::string& path) {
  auto j = nlohmann::json::parse(io::read_file(path));
  j["provenance"]["timestamp"] = "";
  return j;
}

}  // namespace

TEST(Cli, BoundPrintsValue) {
  const auto r = run({"bound", "--n", "8", "--eps", "0.01"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("0.0815888"), std::string::npos) << r.out;
  EXPECT_NEAR(field(r.out, "bound"), (2 * std::log(8.0) + 4) * 0.01, 1e-15);
}

TEST(Cli, BoundMeasureStaysUnderTwiceBound) {
  for (const char* n : {"8", "64"}) {
    for (const char* eps : {"0.001", "0.01"}) {
      const auto r = run({"bound", "--n", n, "--eps", eps, "--measure", "--points", "2000"});
      ASSERT_EQ(r.code, 0) << r.err;
      EXPECT_LE(field(r.out, "measured"), 2.0 * field(r.out, "bound")) << r.out;
    }
  }
}

TEST(Cli, SpikesLastSpike) {
  const std::string dir = fresh_dir("spikes");
  const auto r = run({"spikes", "--n", "32", "--out", dir});
  ASSERT_EQ(r.code, 0) << r.err;
  const double s = field(r.out, "last_spike");
  EXPECT_GE(s, 300.0);
  EXPECT_LE(s, 345.0);
  const auto p = io::import_json(dir + "/spikes.json");
  EXPECT_EQ(p.kind, io::Payload::Kind::kTable);
  EXPECT_EQ(p.columns, (std::vector<std::string>{"center", "peak_gap"}));
  EXPECT_EQ(p.summary.at("last_spike"), s);
}

TEST(Cli, SweepSingleCell) {
  const std::string dir = fresh_dir("sweep");
  const auto r = run({"sweep", "--n-list", "8", "--gamma-list", "10", "--out", dir, "--format",
                      "csv"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto t = io::import_csv(dir + "/sweep.csv");
  EXPECT_EQ(t.columns, (std::vector<std::string>{"n", "gamma", "kappa", "e_norm"}));
  ASSERT_EQ(t.rows, 1u);
  EXPECT_LE(std::abs(std::log(t.at(0, 2) / 4.40)), std::log(3.0));
  EXPECT_TRUE(fs::exists(dir + "/provenance.json"));
  EXPECT_NE(r.out.find("exponent none"), std::string::npos);
}

TEST(Cli, HippoPayloads) {
  const std::string dir = fresh_dir("hippo");
  const auto r = run({"hippo", "--n", "5", "--format", "npy", "--out", dir});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* name : {"A_H", "B_H", "A_perp", "V_H", "Lambda_H"}) {
    EXPECT_TRUE(fs::exists(dir + "/" + name + ".npy")) << name;
  }
  const auto a = io::import_npy(dir + "/A_H.npy");
  EXPECT_EQ(a.rows, 5u);
  EXPECT_EQ(a.at(1, 0), -std::sqrt(3.0));
  const auto lam = io::import_npy(dir + "/Lambda_H.npy");
  EXPECT_TRUE(lam.is_complex());
  const auto manifest = nlohmann::json::parse(io::read_file(dir + "/provenance.json"));
  EXPECT_EQ(manifest["payloads"].size(), 5u);
  EXPECT_EQ(manifest["provenance"]["seed"], 0);
  EXPECT_EQ(run({"hippo", "--n", "5", "--format", "csv"}).code, cli::kUsage);
}

TEST(Cli, TransferClosedMatchesDense) {
  const std::string d1 = fresh_dir("tc"), d2 = fresh_dir("td");
  const std::vector<std::string> base{"transfer", "--n", "12", "--ell", "2", "--smin", "0.1",
                                      "--smax", "1000", "--points", "64"};
  auto a1 = base, a2 = base;
  a1.insert(a1.end(), {"--closed-form", "--out", d1});
  a2.insert(a2.end(), {"--dense", "--out", d2});
  ASSERT_EQ(run(a1).code, 0);
  ASSERT_EQ(run(a2).code, 0);
  const auto p = io::import_json(d1 + "/transfer.json");
  const auto q = io::import_json(d2 + "/transfer.json");
  ASSERT_EQ(p.rows, 64u);
  for (std::size_t i = 0; i < p.rows; ++i) {
    EXPECT_LE(std::abs(p.at(i, 3) - q.at(i, 3)), 1e-9 * q.at(i, 3) + 1e-15);
  }
  EXPECT_EQ(run({"transfer", "--n", "4", "--closed-form", "--dense"}).code, cli::kUsage);
}

TEST(Cli, SimulateAndConverge) {
  const std::string dir = fresh_dir("sim");
  const auto r = run({"simulate", "--n", "8", "--system", "dplr", "--signal", "cosine:30",
                      "--steps", "200", "--dt", "1e-3", "--method", "zoh", "--out", dir});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto t = io::import_json(dir + "/run.json");
  EXPECT_EQ(t.kind, io::Payload::Kind::kTrace);
  EXPECT_EQ(t.rows, 201u);
  EXPECT_EQ(t.columns, (std::vector<std::string>{"t", "u", "y_re", "y_im"}));

  const auto p = run({"simulate", "--n", "6", "--system", "pert", "--ginibre-eps", "0.01",
                      "--signal", "expdecay", "--steps", "100"});
  EXPECT_EQ(p.code, 0) << p.err;
  EXPECT_EQ(run({"simulate", "--n", "6", "--system", "pert", "--signal", "impulse"}).code,
            cli::kUsage);

  const std::string cdir = fresh_dir("conv");
  const auto c = run({"converge", "--signal", "expdecay", "--n-list", "4,8,16", "--steps", "2000",
                      "--out", cdir, "--format", "csv"});
  ASSERT_EQ(c.code, 0) << c.err;
  EXPECT_LT(field(c.out, "slope"), 0.0);
  EXPECT_EQ(io::import_csv(cdir + "/convergence.csv").columns,
            (std::vector<std::string>{"n", "error"}));
}

TEST(Cli, PtdReproducible) {
  const std::string d1 = fresh_dir("ptd1"), d2 = fresh_dir("ptd2");
  for (const auto& fmt : {"json", "npy"}) {
    const std::vector<std::string> args{"ptd", "--n", "8", "--gamma", "100", "--seed", "3",
                                        "--max-iters", "80", "--format", fmt};
    auto a1 = args, a2 = args;
    a1.insert(a1.end(), {"--out", d1});
    a2.insert(a2.end(), {"--out", d2});
    ASSERT_EQ(run(a1).code, 0);
    ASSERT_EQ(run(a2).code, 0);
    for (const char* name : {"lambda", "b_pert", "V", "E"}) {
      const std::string f = std::string(name) + "." + fmt;
      if (std::string(fmt) == "npy") {
        EXPECT_EQ(io::read_file(d1 + "/" + f), io::read_file(d2 + "/" + f)) << f;
      }
    }
  }
  // Command lines differ only in --out, so compare payload fields.
  for (const char* name : {"lambda", "b_pert", "V", "E"}) {
    auto j1 = stable_json(d1 + "/" + name + ".json");
    auto j2 = stable_json(d2 + "/" + name + ".json");
    j1.erase("provenance");
    j2.erase("provenance");
    EXPECT_EQ(j1, j2) << name;
  }
  const auto other = fresh_dir("ptd3");
  ASSERT_EQ(run({"ptd", "--n", "8", "--gamma", "100", "--seed", "4", "--max-iters", "80",
                 "--out", other})
                .code,
            0);
  EXPECT_NE(io::read_file(other + "/E.json"), io::read_file(d1 + "/E.json"));
}

TEST(Cli, IdenticalInvocationsIdenticalBytes) {
  const std::string dir = fresh_dir("same");
  const std::vector<std::string> args{"sweep", "--n-list", "4", "--gamma-list", "10,1000",
                                      "--seed", "2", "--max-iters", "40", "--out", dir};
  ASSERT_EQ(run(args).code, 0);
  const auto first = stable_json(dir + "/sweep.json").dump();
  ASSERT_EQ(run(args).code, 0);
  EXPECT_EQ(stable_json(dir + "/sweep.json").dump(), first);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run({}).code, cli::kUsage);
  EXPECT_EQ(run({"frobnicate"}).code, cli::kUsage);
  const auto unknown = run({"bound", "--n", "8", "--eps", "0.1", "--bogus"});
  EXPECT_EQ(unknown.code, cli::kUsage);
  EXPECT_NE(unknown.err.find("Usage"), std::string::npos);
  EXPECT_EQ(run({"bound", "--n", "8", "--eps", "2"}).code, cli::kUsage);
  EXPECT_EQ(run({"simulate", "--n", "4", "--signal", "square"}).code, cli::kUsage);
  EXPECT_EQ(run({"spikes", "--n", "4", "--out", "/dev/null/sub"}).code, cli::kIo);
  const auto numeric = run({"ptd", "--n", "400", "--ginibre-eps", "0"});
  EXPECT_EQ(numeric.code, cli::kNumeric);
  EXPECT_NE(numeric.err.find("kappa_eig_upper"), std::string::npos) << numeric.err;
  EXPECT_EQ(run({"--help"}).code, cli::kOk);
  EXPECT_EQ(run({"--version"}).code, cli::kOk);
}
