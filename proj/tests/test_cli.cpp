// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>
#include <json.hpp>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace {

namespace fs = std::filesystem;

struct RunResult {
  int code = -1;
  std::string out;  // stdout and stderr merged
};

RunResult run(const std::string& args) {
  const std::string cmd = std::string(MMWAVE_SCS_BIN) + " " + args + " 2>&1";
  RunResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe) != nullptr) r.out += buf.data();
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(::testing::TempDir()) / ("mmwave_scs_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int count_lines(const std::string& s) {
  std::istringstream in(s);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) n += !line.empty();
  return n;
}

TEST(Cli, LinkBudget) {
  const auto dir = scratch("lb");
  const auto r = run("--out-dir " + dir.string() +
                     " linkbudget --fc-mhz 30000 --alpha 2.2 --d-km 0.1 --atmos 0.1 --rain 5");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("100.55 dB"), std::string::npos) << r.out;
}

TEST(Cli, TheoryCheck) {
  const auto dir = scratch("theory");
  const auto r = run("--out-dir " + dir.string() + " theory-check --trials 100");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("100/100"), std::string::npos) << r.out;
}

TEST(Cli, SweepWritesCsvAndManifest) {
  const auto dir = scratch("sweep");
  const auto r = run("--seed 5 --out-dir " + dir.string() + " sweep-mse --var G --values 8 --trials 1");
  ASSERT_EQ(r.code, 0) << r.out;

  std::ifstream csv(dir / "sweep-mse.csv");
  std::stringstream body;
  body << csv.rdbuf();
  EXPECT_EQ(count_lines(body.str()), 4);
  EXPECT_EQ(body.str().rfind("sweep_var,value,estimator,nmse_db,support_rate,trials,stderr", 0), 0U);

  std::ifstream mf(dir / "sweep-mse.manifest.json");
  ASSERT_TRUE(mf.good());
  const auto manifest = nlohmann::json::parse(mf);
  EXPECT_EQ(manifest.at("seed").get<int>(), 5);
  EXPECT_EQ(manifest.at("subcommand").get<std::string>(), "sweep-mse");
  EXPECT_TRUE(manifest.contains("config"));
  EXPECT_TRUE(fs::exists(dir / "sweep-mse.json"));
}

TEST(Cli, EstimateJsonOutput) {
  const auto dir = scratch("estimate");
  const auto r = run("--format json --out-dir " + dir.string() + " estimate");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("ssamp"), std::string::npos);
}

TEST(Cli, ConfigErrorsExitTwo) {
  const auto dir = scratch("badconfig");
  {
    std::ofstream out(dir / "bad.conf");
    out << "n_ant_user = 32\nn_chain_user = 64\n";
  }
  const auto r = run("--config " + (dir / "bad.conf").string() + " --out-dir " + dir.string() +
                     " estimate");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("n_chain_user"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("n_ant_user"), std::string::npos) << r.out;

  EXPECT_EQ(run("--no-such-flag estimate").code, 2);
  EXPECT_EQ(run("--out-dir " + dir.string() + " sweep-ber --symbols 10").code, 2);
}

TEST(Cli, RuntimeErrorsExitThree) {
  const auto dir = scratch("runtime");
  const fs::path blocker = dir / "file";
  std::ofstream(blocker) << "x";
  EXPECT_EQ(run("--out-dir " + (blocker / "sub").string() + " theory-check --trials 1").code, 3);
}

}  // namespace
