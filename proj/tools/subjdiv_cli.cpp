/* Copyright 2026 the subjdiv authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "subjdiv/cli.hpp"
#include "subjdiv/errors.hpp"

namespace {

constexpr int kExitConfigError = 2;
constexpr int kExitRuntimeError = 3;

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw subjdiv::ConfigError({"config: cannot open file '" + path + "'"});
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Subjective divergence profiler for approximate inference programs"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed_override;
    std::string out_dir;
    int threads = 1;

    auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
    run->add_option("--config", config_path, "JSON config file")->required();
    run->add_option("--seed", seed_override, "Override the master seed");
    run->add_option("--out", out_dir, "Directory for output files (overrides config paths)");
    run->add_option("--threads", threads, "Worker threads (0 = hardware concurrency)");

    auto* validate = app.add_subcommand("validate", "Parse and validate a config file");
    validate->add_option("--config", config_path, "JSON config file")->required();

    app.add_subcommand("list-presets", "List available model/inference/reference presets");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand("list-presets")) {
            for (const auto& line : subjdiv::list_presets()) std::cout << line << '\n';
            return 0;
        }

        auto config = subjdiv::validate_config(read_file(config_path));
        if (app.got_subcommand("validate")) {
            std::cout << subjdiv::serialize_config(config) << '\n';
            return 0;
        }

        if (seed_override) config.seed = *seed_override;
        if (threads == 0) {
            threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
        }
        if (threads < 1) throw subjdiv::ConfigError({"threads: must be >= 0"});

        auto profile = subjdiv::run_experiment(config, threads);

        std::string out_path = config.output;
        if (!out_dir.empty()) {
            std::filesystem::create_directories(out_dir);
            std::filesystem::path base =
                out_path.empty() || out_path == "-" ? "profile.csv"
                                                    : std::filesystem::path(out_path).filename();
            out_path = (std::filesystem::path(out_dir) / base).string();
        }
        if (out_path.empty() || out_path == "-") {
            subjdiv::write_profile_csv(profile, std::cout);
        } else {
            std::ofstream out(out_path);
            if (!out) throw subjdiv::Error("cannot open output file '" + out_path + "'");
            subjdiv::write_profile_csv(profile, out);
            std::cerr << "wrote " << out_path << '\n';
            if (config.raw_weights) {
                std::string side = out_path + ".ndjson";
                std::ofstream raw(side);
                if (!raw) throw subjdiv::Error("cannot open output file '" + side + "'");
                subjdiv::write_raw_weights(profile, raw);
                std::cerr << "wrote " << side << '\n';
            }
        }
        return 0;
    } catch (const subjdiv::ConfigError& e) {
        std::cerr << e.what() << '\n';
        return kExitConfigError;
    } catch (const subjdiv::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntimeError;
    }
}
