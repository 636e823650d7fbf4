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

// Config-driven experiment runner: assembles a (model, inference,
// meta-inference, reference) quadruple from a JSON document, sweeps an effort
// knob (particle count or kernel repetitions), and emits a CSV divergence
// profile plus an optional newline-delimited raw log-weight sidecar.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "subjdiv/core.hpp"

namespace subjdiv {

struct ExperimentConfig {
    std::string model_preset;          // toy_bernoulli | hmm | linreg | noisyor
    nlohmann::json model_params;       // preset-specific knobs
    std::string inference_kind;        // sir | smc | seqdb | assessable
    nlohmann::json inference_params;
    std::string reference_kind;        // oracle | lw_sir | self
    nlohmann::json reference_params;   // e.g. {"particles": 64} for lw_sir
    std::vector<int> sweep;            // effort knob values
    int n_ref = 0;                     // reference replicates (N)
    int n_inf = 0;                     // inference replicates (M)
    std::uint64_t seed = 0;            // master seed
    std::string output;                // CSV path ("" or "-" = stdout)
    bool raw_weights = false;          // also write <output>.ndjson
};

/// Parses and validates a JSON config document. Throws ConfigError carrying
/// one message per offending field path.
ExperimentConfig validate_config(const std::string& text);

/// Canonical JSON form; serialize(validate_config(x)) is a fixed point.
std::string serialize_config(const ExperimentConfig& config);

struct ProfilePoint {
    int knob = 0;
    std::uint64_t row_seed = 0;  // reproduces this row in isolation
    DivergenceEstimate estimate;
};

/// Runs the sweep. Deterministic in everything but the timing columns for a
/// given (config, seed), independent of the thread count.
std::vector<ProfilePoint> run_experiment(const ExperimentConfig& config, int threads = 1);

void write_profile_csv(const std::vector<ProfilePoint>& profile, std::ostream& out);
void write_raw_weights(const std::vector<ProfilePoint>& profile, std::ostream& out);

/// Human-readable description of the available presets and parameters.
std::vector<std::string> list_presets();

}  // namespace subjdiv
