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

#include <iostream>

#include "CLI11.hpp"

#include "realclock/experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"realclock: quantum and classical dynamics under real clocks"};
    app.require_subcommand(1);

    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    unsigned threads = 0;

    auto* run = app.add_subcommand("run", "Run an experiment and write CSVs plus summary.txt");
    run->add_option("config", config, "Experiment configuration (JSON)")->required();
    run->add_option("--seed", seed, "Override numeric.seed");
    run->add_option("--out", out_dir, "Override output_dir");
    run->add_option("--threads", threads, "Worker threads (results do not depend on it)");

    auto* validate = app.add_subcommand("validate", "Check a configuration and print derived quantities");
    validate->add_option("config", config, "Experiment configuration (JSON)")->required();
    validate->add_option("--seed", seed, "Override numeric.seed");
    validate->add_option("--out", out_dir, "Override output_dir");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    realclock::Overrides overrides;
    overrides.seed = seed;
    if (out_dir) {
        overrides.output_dir = *out_dir;
    }
    if (*run) {
        return realclock::run_command(config, overrides, threads, std::cout, std::cerr);
    }
    return realclock::validate_command(config, overrides, std::cout, std::cerr);
}
