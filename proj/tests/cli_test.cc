// Copyright 2026 The fedistill Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fedistill/cli.h"

#include <cstdlib>
#include <sstream>

#include "fedistill/metrics.h"
#include "gtest/gtest.h"
#include "testing.h"

namespace fedistill {
namespace {

namespace fs = std::filesystem;
using ::fedistill::testing::ReadText;
using ::fedistill::testing::TempDir;
using ::fedistill::testing::WriteText;

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult Cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = RunCli(args, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    config_ = (dir_ / "config.json").string();
    WriteText(config_, R"({
      "seed": 3,
      "corpus": {"synthetic": {"num_domains": 3, "num_classes": 3, "examples_per_domain": 200,
                               "pool_size": 60, "signal": 0.3, "doc_length": 12}},
      "partition": {"num_clients": 3},
      "features": {"max_features": 500},
      "experiments": [{"method": "adafd_enwc", "rounds": 2, "local_epochs": 1}],
      "betas": [1, 20],
      "round_counts": [1, 2]
    })");
  }

  std::string Out(std::string_view name) const { return (dir_ / name).string(); }

  TempDir dir_;
  std::string config_;
};

void ExpectNoTemporaries(const fs::path& root) {
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    EXPECT_EQ(entry.path().filename().string().find(".tmp"), std::string::npos)
        << entry.path();
  }
}

TEST_F(CliTest, PartitionIsIdempotent) {
  auto first = Cli({"partition", "--config", config_, "--out", Out("p")});
  ASSERT_EQ(first.code, kExitOk) << first.err;
  const std::string manifest = ReadText(Out("p/manifest.json"));
  auto second = Cli({"partition", "--config", config_, "--out", Out("p")});
  ASSERT_EQ(second.code, kExitOk) << second.err;
  EXPECT_EQ(ReadText(Out("p/manifest.json")), manifest);
  EXPECT_TRUE(fs::exists(Out("p/distribution_report.json")));
  EXPECT_TRUE(fs::exists(Out("p/config.json")));
  auto reseeded = Cli({"partition", "--config", config_, "--out", Out("q"), "--seed", "4"});
  ASSERT_EQ(reseeded.code, kExitOk);
  EXPECT_NE(ReadText(Out("q/manifest.json")), manifest);
  ExpectNoTemporaries(dir_.path());
}

TEST_F(CliTest, TwoMethodsGiveTwoReportSets) {
  auto r = Cli({"run", "--config", config_, "--out", Out("r"), "--method", "adafd_enwc",
                "--method", "fedavg"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  for (const char* m : {"adafd_enwc", "fedavg"}) {
    for (const char* f : {"traces.jsonl", "weights.csv", "report.csv", "model.json",
                          "report.json"}) {
      EXPECT_TRUE(fs::exists(dir_ / "r" / m / f)) << m << "/" << f;
    }
  }
  const std::string jsonl = ReadText(Out("r/reports.jsonl"));
  EXPECT_EQ(std::count(jsonl.begin(), jsonl.end(), '\n'), 2);
  ExpectNoTemporaries(dir_.path());

  auto cmp = Cli({"compare", Out("r/adafd_enwc/report.json"), Out("r/fedavg/report.json")});
  ASSERT_EQ(cmp.code, kExitOk) << cmp.err;
  std::istringstream lines(cmp.out);
  std::string header, row1, row2;
  std::getline(lines, header);
  std::getline(lines, row1);
  std::getline(lines, row2);
  EXPECT_EQ(header.rfind("method,global,client_specific,", 0), 0u);
  EXPECT_EQ(row1.rfind("adafd_enwc,", 0), 0u);
  EXPECT_EQ(row2.rfind("fedavg,", 0), 0u);
  auto from_jsonl = Cli({"compare", Out("r/reports.jsonl"), "--out", Out("cmp.csv")});
  ASSERT_EQ(from_jsonl.code, kExitOk);
  EXPECT_EQ(ReadText(Out("cmp.csv")), cmp.out);
}

TEST_F(CliTest, RunIsReproducibleFromEmittedConfigAndManifest) {
  ASSERT_EQ(Cli({"run", "--config", config_, "--out", Out("a")}).code, kExitOk);
  auto again = Cli({"run", "--config", Out("a/config.json"), "--manifest", Out("a/manifest.json"),
                    "--out", Out("b")});
  ASSERT_EQ(again.code, kExitOk) << again.err;
  EXPECT_EQ(ReadText(Out("a/adafd_enwc/report.json")), ReadText(Out("b/adafd_enwc/report.json")));
  EXPECT_EQ(ReadText(Out("a/adafd_enwc/traces.jsonl")),
            ReadText(Out("b/adafd_enwc/traces.jsonl")));
  EXPECT_EQ(ReadText(Out("a/adafd_enwc/model.json")), ReadText(Out("b/adafd_enwc/model.json")));
}

TEST_F(CliTest, SweepsWriteTheirTables) {
  auto beta = Cli({"sweep-beta", "--config", config_, "--out", Out("s")});
  ASSERT_EQ(beta.code, kExitOk) << beta.err;
  EXPECT_EQ(ReadText(Out("s/beta_weights.csv")).rfind("beta,round,client,weight\n", 0), 0u);
  auto rounds = Cli({"sweep-rounds", "--config", config_, "--out", Out("s"), "--method",
                     "fedavg", "--method", "fedkd"});
  ASSERT_EQ(rounds.code, kExitOk) << rounds.err;
  EXPECT_NE(rounds.out.find("fedkd: skipped"), std::string::npos);
  const std::string csv = ReadText(Out("s/rounds_sweep.csv"));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

TEST_F(CliTest, ConfigProblemsExitWithTwo) {
  EXPECT_EQ(Cli({}).code, kExitConfigError);
  EXPECT_EQ(Cli({"run"}).code, kExitConfigError);
  EXPECT_EQ(Cli({"run", "--config", Out("missing.json")}).code, kExitConfigError);
  EXPECT_EQ(Cli({"run", "--config", config_, "--method", "fedprox"}).code, kExitConfigError);
  WriteText(Out("secret.json"), R"({"corpus": {"synthetic": {}}, "experiments": [{}],
                                    "llm": {"api_key": "x"}})");
  EXPECT_EQ(Cli({"run", "--config", Out("secret.json")}).code, kExitConfigError);
  ::unsetenv("FEDISTILL_TEST_ENDPOINT");
  auto r = Cli({"run", "--config", config_, "--out", Out("l"), "--method", "adafd_llmwc",
                "--llm-endpoint-env", "FEDISTILL_TEST_ENDPOINT"});
  EXPECT_EQ(r.code, kExitConfigError);
  EXPECT_NE(r.err.find("FEDISTILL_TEST_ENDPOINT"), std::string::npos);
}

TEST_F(CliTest, CompareRejectsMismatchedReports) {
  EvalReport a;
  a.method = "a";
  a.domain_f1 = {{"x", 0.5}};
  EvalReport b = a;
  b.method = "b";
  b.domain_f1 = {{"y", 0.5}};
  WriteText(Out("a.json"), a.ToJson().dump());
  WriteText(Out("b.json"), b.ToJson().dump());
  auto r = Cli({"compare", Out("a.json"), Out("b.json")});
  EXPECT_EQ(r.code, kExitRunError);
  EXPECT_NE(r.err.find("different test sets"), std::string::npos);
  EXPECT_EQ(Cli({"compare", Out("a.json")}).code, kExitRunError);
  EXPECT_EQ(Cli({"compare", Out("nope.json")}).code, kExitConfigError);
}

TEST(CompareReportsTest, MarksTheColumnMaximum) {
  EvalReport a;
  a.method = "a";
  a.global_f1 = 0.8;
  a.client_specific_f1 = 0.6;
  a.domain_f1 = {{"baby", 0.7}};
  EvalReport b = a;
  b.method = "b";
  b.global_f1 = 0.9;
  b.domain_f1 = {{"baby", 0.1}};
  const EvalReport reports[] = {a, b};
  EXPECT_EQ(CompareReports(reports),
            "method,global,client_specific,baby\n"
            "a,0.8000,0.6000*,0.7000*\n"
            "b,0.9000*,0.6000*,0.1000\n");
}

TEST(WriteFileAtomicTest, ReplacesContentWithoutLeftovers) {
  TempDir dir;
  WriteFileAtomic(dir / "sub" / "f.txt", "one");
  WriteFileAtomic(dir / "sub" / "f.txt", "two");
  EXPECT_EQ(ReadText(dir / "sub" / "f.txt"), "two");
  ExpectNoTemporaries(dir.path());
}

}  // namespace
}  // namespace fedistill
