// Copyright 2026 The qexp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "qexp/cli.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace qexp::cli {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code;
  std::string out, err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "qexp");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("qexp_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string read(const std::string& name) const {
    std::ifstream in(dir_ / name, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  std::set<std::string> listing(const fs::path& d) const {
    std::set<std::string> s;
    for (const auto& e : fs::directory_iterator(d)) s.insert(e.path().filename().string());
    return s;
  }

  fs::path dir_;
};

TEST(GitBlobId, KnownValues) {
  EXPECT_EQ(git_blob_id(""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  EXPECT_EQ(git_blob_id("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST(Parsing, Lists) {
  EXPECT_EQ(split_commas("4, 8,16"), (std::vector<std::string>{"4", "8", "16"}));
  EXPECT_THROW(split_commas("4,,8"), UsageError);
  EXPECT_THROW(parse_int("4x", "--N"), UsageError);
  EXPECT_THROW(parse_u64("-1", "--seed"), UsageError);
  EXPECT_TRUE(std::isinf(parse_q("inf")));
  EXPECT_EQ(parse_q("2.5"), 2.5);
}

TEST_F(CliTest, HelpAndUsageErrors) {
  EXPECT_EQ(invoke({"--help"}).code, kOk);
  EXPECT_EQ(invoke({"theorem", "--help"}).code, kOk);
  EXPECT_EQ(invoke({}).code, kUsage);
  EXPECT_EQ(invoke({"frobnicate"}).code, kUsage);
  EXPECT_EQ(invoke({"chi", "--bogus", "1"}).code, kUsage);
  EXPECT_EQ(invoke({"chi", "--N", "4,x", "--out", dir_.string()}).code, kUsage);
  EXPECT_EQ(invoke({"sample", "--kind", "gue"}).code, kUsage);
}

TEST_F(CliTest, ConfigErrors) {
  EXPECT_EQ(invoke({"chi", "--config", path("missing.json"), "--out", dir_.string()}).code, kConfigError);
  std::ofstream(path("bad.json")) << "{ not json";
  EXPECT_EQ(invoke({"chi", "--config", path("bad.json"), "--out", dir_.string()}).code, kConfigError);
  std::ofstream(path("unknown.json")) << R"({"trails": 5})";
  EXPECT_EQ(invoke({"chi", "--config", path("unknown.json"), "--out", dir_.string()}).code, kConfigError);
  // Lemma with vanishing coefficients.
  const Outcome r = invoke({"lemma", "--N", "4", "--coeffs", "0,0", "--trials", "5", "--out", dir_.string()});
  EXPECT_EQ(r.code, kConfigError);
  EXPECT_NE(r.err.find("zero"), std::string::npos);
  EXPECT_EQ(invoke({"gaussian-bound", "--N", "3", "--p", "3", "--out", dir_.string()}).code, kConfigError);
}

TEST_F(CliTest, IoError) {
  std::ofstream(path("file")) << "x";
  EXPECT_EQ(invoke({"chi", "--N", "2", "--trials", "10", "--out", path("file")}).code, kIoError);
}

TEST_F(CliTest, IsometryColumnIsOne) {
  const Outcome r = invoke({"theorem", "--n", "1", "--coeffs", "1.0", "--N", "4,12,20", "--trials", "6", "--out",
                        dir_.string()});
  ASSERT_EQ(r.code, kOk) << r.err;
  std::istringstream csv(read("theorem.csv"));
  std::string line;
  std::getline(csv, line);
  ASSERT_EQ(line.substr(0, 20), "N,n,trials,mean_norm");
  int rows = 0;
  while (std::getline(csv, line)) {
    const auto cells = split_commas(line);
    EXPECT_EQ(cells[3], "1") << line;
    ++rows;
  }
  EXPECT_EQ(rows, 3);
}

TEST_F(CliTest, ManifestAndOutputs) {
  const Outcome r = invoke({"chi", "--N", "2,4", "--trials", "50", "--seed", "9", "--out", dir_.string()});
  ASSERT_EQ(r.code, kOk) << r.err;
  EXPECT_EQ(listing(dir_), (std::set<std::string>{"chi.csv", "chi.manifest.json"}));
  const auto m = nlohmann::json::parse(read("chi.manifest.json"));
  EXPECT_EQ(m.at("subcommand"), "chi");
  EXPECT_EQ(m.at("master_seed"), 9u);
  EXPECT_EQ(m.at("version"), kVersion);
  EXPECT_EQ(m.at("resolved_config").at("trials"), 50);
  EXPECT_EQ(m.at("resolved_config").at("N"), nlohmann::json::array({2, 4}));
  EXPECT_GE(m.at("duration_seconds").get<double>(), 0.0);
  EXPECT_EQ(m.at("started_at").get<std::string>().size(), 20u);
  EXPECT_EQ(m.at("config_hash"), "sha256:" + sha256_hex(m.at("resolved_config").dump()));
  EXPECT_EQ(m.at("outputs")[0].at("content_id"), git_blob_id(read("chi.csv")));
  EXPECT_EQ(read("chi.csv").substr(0, 31), "N,method,trials,chi_hat,stderr,");
}

TEST_F(CliTest, NestedOutputDirectoryIsCreated) {
  const fs::path nested = dir_ / "a" / "b";
  ASSERT_EQ(invoke({"sample", "--N", "3", "--kind", "haar", "--out", nested.string()}).code, kOk);
  EXPECT_EQ(listing(nested), (std::set<std::string>{"sample.csv", "sample.manifest.json"}));
  EXPECT_EQ(listing(dir_), (std::set<std::string>{"a"}));
}

TEST_F(CliTest, SampleMatchesLibrary) {
  ASSERT_EQ(invoke({"sample", "--N", "3", "--seed", "5", "--out", dir_.string()}).code, kOk);
  EXPECT_EQ(read("sample.csv"), matrix_to_csv(sample_ginibre(3, SeedStream(5))).str());
  ASSERT_EQ(invoke({"sample", "--N", "3", "--seed", "5", "--kind", "modulus", "--out", dir_.string()}).code, kOk);
  EXPECT_EQ(read("sample.csv"), matrix_to_csv(modulus(sample_ginibre(3, SeedStream(5)))).str());
}

TEST_F(CliTest, ConfigFileAndOverrides) {
  std::ofstream(path("cfg.json")) << R"({"N": [3, 5], "n": 2, "trials": 12, "seed": 3, "p": [1, 2]})";
  const fs::path a = dir_ / "a", b = dir_ / "b";
  ASSERT_EQ(invoke({"lemma", "--config", path("cfg.json"), "--out", a.string()}).code, kOk);
  auto m = nlohmann::json::parse(read("a/lemma.manifest.json"));
  EXPECT_EQ(m.at("resolved_config").at("N"), nlohmann::json::array({3, 5}));
  EXPECT_EQ(m.at("master_seed"), 3u);
  EXPECT_EQ(m.at("resolved_config").at("coeffs").size(), 2u);
  // Flags win over the file.
  ASSERT_EQ(invoke({"lemma", "--config", path("cfg.json"), "--trials", "8", "--seed", "4", "--out", b.string()}).code,
            kOk);
  m = nlohmann::json::parse(read("b/lemma.manifest.json"));
  EXPECT_EQ(m.at("resolved_config").at("trials"), 8);
  EXPECT_EQ(m.at("master_seed"), 4u);
  EXPECT_EQ(m.at("resolved_config").at("N"), nlohmann::json::array({3, 5}));
}

TEST_F(CliTest, CoefficientFiles) {
  std::ofstream(path("blocks.json")) << R"({"blocks": [[[1, 0], [0, 0]], [[0, 0], [0, 1]]]})";
  const Outcome r = invoke({"matrix-coeff", "--N", "3", "--trials", "4", "--coeffs", path("blocks.json"), "--out",
                        dir_.string()});
  ASSERT_EQ(r.code, kOk) << r.err;
  EXPECT_NE(read("matrix_coeff.csv").find("\n3,2,2,4,"), std::string::npos);

  std::ofstream(path("array.json")) << R"({"coeff_matrix": [[0.5, 0], [0, [0, 0.5]]]})";
  ASSERT_EQ(invoke({"double-sum", "--N", "3", "--trials", "4", "--coeffs", path("array.json"), "--out",
                    dir_.string()})
                .code,
            kOk);
  std::ofstream(path("list.json")) << R"([[0.6, 0], [0, 0.8]])";
  ASSERT_EQ(invoke({"theorem", "--N", "3", "--trials", "4", "--coeffs", path("list.json"), "--out", dir_.string()})
                .code,
            kOk);
}

TEST_F(CliTest, StatisticalFailureExitsOne) {
  // An absurdly tight band makes the cross-estimator agreement fail.
  std::ofstream(path("tight.json")) << R"({"sigma": 1e-9})";
  const Outcome r = invoke({"chi", "--N", "4", "--trials", "50", "--config", path("tight.json"), "--out", dir_.string()});
  EXPECT_EQ(r.code, kCheckFailed);
  EXPECT_NE(r.err.find("failed rows"), std::string::npos);
  EXPECT_NE(read("chi.csv").find(",0\n"), std::string::npos);
}

TEST_F(CliTest, RerunIsByteIdentical) {
  const fs::path a = dir_ / "a", b = dir_ / "b";
  ASSERT_EQ(invoke({"double-sum", "--N", "4,6", "--trials", "6", "--threads", "1", "--out", a.string()}).code, kOk);
  ASSERT_EQ(invoke({"double-sum", "--N", "4,6", "--trials", "6", "--threads", "3", "--out", b.string()}).code, kOk);
  EXPECT_EQ(read("a/double_sum.csv"), read("b/double_sum.csv"));
}

}  // namespace
}  // namespace qexp::cli
