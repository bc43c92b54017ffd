// Copyright 2026 The realclock Authors
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

#include <sys/wait.h>

#include <cstdlib>
#include <string>

#include <gtest/gtest.h>

#include "scratch.hpp"

using realclock::testing::read_text;
using realclock::testing::ScratchDir;
using realclock::testing::write_text;

namespace {

struct Outcome {
    int status = -1;
    std::string output;
};

Outcome cli(const ScratchDir& dir, const std::string& args) {
    const auto log = dir / "cli-output.txt";
    const std::string cmd = std::string("\"") + REALCLOCK_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
    const int raw = std::system(cmd.c_str());
    Outcome o;
    o.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    o.output = read_text(log);
    return o;
}

std::string quoted(const std::filesystem::path& p) { return "\"" + p.string() + "\""; }

const char* kDephasing = R"({
  "experiment": "dephasing_compare",
  "clock": {"theta": 0.1, "kappa": 0.005},
  "system": {"energies": [0, 1]},
  "numeric": {"dt": 0.005, "horizon": 2, "n_paths": 700, "seed": 11, "record_every": 20},
  "output_dir": "results"
})";

} // namespace

TEST(Cli, ValidateEchoesDerivedQuantities) {
    ScratchDir dir;
    write_text(dir / "c.json", kDephasing);
    const auto o = cli(dir, "validate " + quoted(dir / "c.json"));
    EXPECT_EQ(o.status, 0) << o.output;
    EXPECT_NE(o.output.find("D = 0.00025\n"), std::string::npos) << o.output;
    EXPECT_NE(o.output.find("period_of_applicability = 4000\n"), std::string::npos);
    EXPECT_EQ(o.output.find("warning"), std::string::npos);
    EXPECT_FALSE(std::filesystem::exists(dir / "results"));
}

TEST(Cli, ValidateWarnings) {
    ScratchDir dir;
    write_text(dir / "noisy.json", R"({"experiment": "bath_spectrum", "clock": {"theta": 1, "kappa": 0.5}})");
    auto o = cli(dir, "validate " + quoted(dir / "noisy.json"));
    EXPECT_EQ(o.status, 0);
    EXPECT_NE(o.output.find("warning: outside good-clock regime"), std::string::npos) << o.output;

    write_text(dir / "slow.json", R"({"experiment": "master_trajectory", "clock": {"theta": 5, "kappa": 0.1},
                                      "system": {"energies": [0, 1]}})");
    o = cli(dir, "validate " + quoted(dir / "slow.json"));
    EXPECT_EQ(o.status, 0);
    EXPECT_NE(o.output.find("warning: Markov approximation questionable"), std::string::npos) << o.output;
}

TEST(Cli, ParseFailuresExitWithTwo) {
    ScratchDir dir;
    write_text(dir / "missing-h.json", R"({"experiment": "master_trajectory", "clock": {"theta": 1, "kappa": 0.1},
                                           "system": {"file": "nowhere.txt"}})");
    auto o = cli(dir, "run " + quoted(dir / "missing-h.json"));
    EXPECT_EQ(o.status, 2) << o.output;
    EXPECT_NE(o.output.find("nowhere.txt"), std::string::npos);

    write_text(dir / "broken.json", "{\n  \"experiment\": \"clock_stats\"\n  \"clock\": {}\n}\n");
    o = cli(dir, "validate " + quoted(dir / "broken.json"));
    EXPECT_EQ(o.status, 2);
    EXPECT_NE(o.output.find("line 3, column 9"), std::string::npos) << o.output;

    o = cli(dir, "run " + quoted(dir / "does-not-exist.json"));
    EXPECT_EQ(o.status, 2);
    o = cli(dir, "");
    EXPECT_EQ(o.status, 2);
}

TEST(Cli, NumericBoundViolationExitsWithThree) {
    ScratchDir dir;
    write_text(dir / "c.json", R"({"experiment": "dephasing_compare", "clock": {"theta": 0.1, "kappa": 0.005},
                                   "system": {"energies": [0, 1]}, "numeric": {"dt": 0.05}})");
    EXPECT_EQ(cli(dir, "run " + quoted(dir / "c.json")).status, 3);
    EXPECT_EQ(cli(dir, "validate " + quoted(dir / "c.json")).status, 3);
}

TEST(Cli, RunIdealClockStats) {
    ScratchDir dir;
    write_text(dir / "c.json", R"({"experiment": "clock_stats", "clock": {"theta": 1, "kappa": 0},
                                   "numeric": {"n_paths": 10, "horizon": 5}})");
    const auto o = cli(dir, "run " + quoted(dir / "c.json"));
    EXPECT_EQ(o.status, 0) << o.output;
    EXPECT_NE(read_text(dir / "out/summary.txt").find("status = pass"), std::string::npos);
}

TEST(Cli, CheckFailureExitsWithOneAndWritesSummary) {
    ScratchDir dir;
    write_text(dir / "c.json", R"({"experiment": "master_trajectory", "clock": {"theta": 1, "kappa": 0.1},
                                   "system": {"energies": [0, 1]}, "numeric": {"horizon": 10, "tolerance": 1e-30}})");
    const auto o = cli(dir, "run " + quoted(dir / "c.json"));
    EXPECT_EQ(o.status, 1) << o.output;
    EXPECT_NE(read_text(dir / "out/summary.txt").find("status = fail"), std::string::npos);
}

TEST(Cli, RunIsReproducibleAcrossThreadCounts) {
    ScratchDir dir;
    write_text(dir / "c.json", kDephasing);
    auto o = cli(dir, "run " + quoted(dir / "c.json") + " --threads 1 --out " + quoted(dir / "a"));
    EXPECT_EQ(o.status, 0) << o.output;
    o = cli(dir, "run " + quoted(dir / "c.json") + " --threads 4 --out " + quoted(dir / "b"));
    EXPECT_EQ(o.status, 0) << o.output;
    EXPECT_EQ(read_text(dir / "a/comparison.csv"), read_text(dir / "b/comparison.csv"));
    EXPECT_EQ(read_text(dir / "a/summary.txt"), read_text(dir / "b/summary.txt"));

    o = cli(dir, "run " + quoted(dir / "c.json") + " --seed 12");
    EXPECT_EQ(o.status, 0) << o.output;
    EXPECT_NE(read_text(dir / "results/summary.txt").find("seed = 12\n"), std::string::npos);
    EXPECT_NE(read_text(dir / "a/comparison.csv"), read_text(dir / "results/comparison.csv"));
}

TEST(Cli, ShippedConfigsValidate) {
    ScratchDir dir;
    for (const char* name : {"qubit-dephasing", "classical-release", "classical-von-mises", "clock-stats",
                             "master-trajectory", "bath-spectrum"}) {
        const auto path = std::filesystem::path(REALCLOCK_SOURCE_DIR) / "configs" / (std::string(name) + ".json");
        const auto o = cli(dir, "validate " + quoted(path));
        EXPECT_EQ(o.status, 0) << name << ": " << o.output;
    }
}
