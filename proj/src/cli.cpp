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

#include "subjdiv/cli.hpp"

#include <cstdio>
#include <functional>
#include <ostream>
#include <utility>

#include "subjdiv/enumerate.hpp"
#include "subjdiv/errors.hpp"
#include "subjdiv/exact.hpp"
#include "subjdiv/kernels.hpp"
#include "subjdiv/models.hpp"
#include "subjdiv/seqdb.hpp"
#include "subjdiv/smc.hpp"

namespace subjdiv {

namespace {

using nlohmann::json;

const std::vector<std::string> kModelPresets = {"toy_bernoulli", "hmm", "linreg", "noisyor"};
const std::vector<std::string> kInferenceKinds = {"sir", "smc", "seqdb", "assessable"};
const std::vector<std::string> kReferenceKinds = {"oracle", "lw_sir", "self"};

// Model/inference pairings the runner can assemble.
bool compatible(const std::string& model, const std::string& inference) {
    if (inference == "sir") {
        return model == "toy_bernoulli" || model == "linreg" || model == "noisyor";
    }
    if (inference == "smc") return model == "hmm";
    if (inference == "seqdb") return model == "toy_bernoulli" || model == "noisyor";
    if (inference == "assessable") return model == "linreg";
    return false;
}

bool known(const std::vector<std::string>& options, const std::string& value) {
    for (const auto& o : options) {
        if (o == value) return true;
    }
    return false;
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_ms(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

/// Runs one sweep where each knob value yields an EstimationSetup.
template <class Y, class Z>
std::vector<ProfilePoint> sweep_points(
    const ExperimentConfig& config, int threads,
    const std::function<EstimationSetup<Y, Z>(int)>& make_setup) {
    std::vector<ProfilePoint> profile;
    profile.reserve(config.sweep.size());
    for (std::size_t i = 0; i < config.sweep.size(); ++i) {
        int knob = config.sweep[i];
        ProfilePoint point;
        point.knob = knob;
        point.row_seed = derive_stream_seed(config.seed, stream_tag::kKnob, i);
        try {
            auto setup = make_setup(knob);
            point.estimate =
                estimate_divergence(setup, config.n_ref, config.n_inf, point.row_seed, threads);
        } catch (const ConfigError&) {
            throw;
        } catch (const Error& e) {
            throw Error("knob " + std::to_string(knob) + ": " + e.what());
        }
        profile.push_back(std::move(point));
    }
    return profile;
}

/// Reference sampler shared by the PF-flavoured assemblies.
template <class Z>
std::function<Z(Rng&)> make_model_reference(const ExperimentConfig& config,
                                            const ModelProgram<Z>& model, const Dataset& data,
                                            std::function<Z(Rng&)> oracle,
                                            std::function<Z(Rng&)> self) {
    if (config.reference_kind == "oracle") return oracle;
    if (config.reference_kind == "self") return self;
    int particles = config.reference_params.value("particles", 64);
    return [model, data, particles](Rng& rng) {
        return run_sir(model, data, std::size_t(particles), rng).second;
    };
}

/// SIR with the prior proposal; knob = particle count.
template <class Z>
std::vector<ProfilePoint> run_sir_experiment(const ExperimentConfig& config, int threads,
                                             const ModelProgram<Z>& model, const Dataset& data,
                                             std::function<Z(Rng&)> oracle) {
    auto self = [model, data](Rng& rng) { return run_sir(model, data, 1, rng).second; };
    std::function<EstimationSetup<ParticleFilterHistory<Z>, Z>(int)> make_setup =
        [config, model, data, oracle, self, threads](int knob) {
            if (knob < 1) throw Error("particle count must be >= 1");
            const auto K = std::size_t(knob);
            auto self_k = [model, data, K](Rng& rng) { return run_sir(model, data, K, rng).second; };
            auto ssm = sir_state_space_model(model, data);
            EstimationSetup<ParticleFilterHistory<Z>, Z> setup;
            setup.sample_reference =
                make_model_reference<Z>(config, model, data, oracle, self_k);
            setup.run_inference = [model, data, K](Rng& rng) {
                auto [h, z] = run_sir(model, data, K, rng);
                return std::pair<ParticleFilterHistory<Z>, Z>{std::move(h), std::move(z)};
            };
            setup.run_meta = [model, data, K](const Z& z, Rng& rng) {
                return run_sir_metainference(model, data, K, z, rng);
            };
            setup.log_weight = [ssm](const ParticleFilterHistory<Z>& y, const Z& z) {
                return pf_log_weight_estimate(y, std::vector<Z>{z}, ssm);
            };
            return setup;
        };
    return sweep_points<ParticleFilterHistory<Z>, Z>(config, threads, make_setup);
}

std::vector<ProfilePoint> run_smc_experiment(const ExperimentConfig& config, int threads) {
    auto hmm = std::make_shared<Hmm>(
        hmm_fixture(config.model_params.value("n_states", 2), config.model_params.value("n_obs", 3),
                    config.model_params.value("T", 40), config.model_params.value("seed", 1)));
    std::string proposal_name = config.inference_params.value("proposal", "prior");
    if (proposal_name != "prior" && proposal_name != "conditional") {
        throw ConfigError({"inference.params.proposal: must be 'prior' or 'conditional'"});
    }
    auto proposals = proposal_name == "prior" ? make_prior_proposals(hmm->ssm)
                                              : make_conditional_proposals(hmm->ssm);

    std::function<EstimationSetup<ParticleFilterHistory<int>, std::vector<int>>(int)> make_setup =
        [config, hmm, proposals](int knob) {
            if (knob < 1) throw Error("particle count must be >= 1");
            const auto K = std::size_t(knob);
            EstimationSetup<ParticleFilterHistory<int>, std::vector<int>> setup;
            if (config.reference_kind == "oracle") {
                setup.sample_reference = [hmm](Rng& rng) { return ffbs_sample(hmm->ssm, rng); };
            } else if (config.reference_kind == "self") {
                setup.sample_reference = [hmm, proposals, K](Rng& rng) {
                    return run_particle_filter(hmm->ssm, proposals, K, rng).second;
                };
            } else {
                // lw_sir on a state space model: prior-proposal filter.
                int particles = config.reference_params.value("particles", 64);
                auto prior_prop = make_prior_proposals(hmm->ssm);
                setup.sample_reference = [hmm, prior_prop, particles](Rng& rng) {
                    return run_particle_filter(hmm->ssm, prior_prop, std::size_t(particles), rng)
                        .second;
                };
            }
            setup.run_inference = [hmm, proposals, K](Rng& rng) {
                return run_particle_filter(hmm->ssm, proposals, K, rng);
            };
            setup.run_meta = [hmm, proposals, K](const std::vector<int>& z, Rng& rng) {
                return run_csmc_metainference(hmm->ssm, proposals, K, z, rng);
            };
            setup.log_weight = [hmm](const ParticleFilterHistory<int>& y,
                                     const std::vector<int>& z) {
                return pf_log_weight_estimate(y, z, hmm->ssm);
            };
            return setup;
        };
    return sweep_points<ParticleFilterHistory<int>, std::vector<int>>(config, threads, make_setup);
}

/// Sequential chain; knob = repetitions of each per-target kernel.
std::vector<ProfilePoint> run_seqdb_experiment(const ExperimentConfig& config, int threads,
                                               const ModelProgram<std::vector<int>>& model,
                                               const Dataset& data,
                                               const TargetSequence<std::vector<int>>& targets,
                                               std::function<std::vector<int>(Rng&)> oracle) {
    using Z = std::vector<int>;
    using Y = std::vector<Z>;  // intermediate states u_0 .. u_{T-1}

    std::function<EstimationSetup<Y, Z>(int)> make_setup = [config, model, data, targets,
                                                            oracle](int knob) {
        if (knob < 1) throw Error("kernel repetitions must be >= 1");
        std::vector<TransitionKernel<Z>> kernels;
        for (std::size_t t = 0; t < targets.num_steps(); ++t) {
            auto log_target = targets.log_targets[t + 1];
            auto base = make_mh_resimulation<Z>(targets.target_ids[t], log_target,
                                                model.sample_prior, model.log_prior);
            kernels.push_back(repeat(base, knob));
        }
        auto run_inf = [targets, kernels](Rng& rng) {
            auto history = run_seqdb_inference(targets, kernels, rng);
            return std::pair<Y, Z>{std::move(history.states), std::move(history.output)};
        };
        EstimationSetup<Y, Z> setup;
        if (config.reference_kind == "oracle") {
            setup.sample_reference = oracle;
        } else if (config.reference_kind == "self") {
            setup.sample_reference = [run_inf](Rng& rng) { return run_inf(rng).second; };
        } else {
            int particles = config.reference_params.value("particles", 64);
            setup.sample_reference = [model, data, particles](Rng& rng) {
                return run_sir(model, data, std::size_t(particles), rng).second;
            };
        }
        setup.run_inference = run_inf;
        setup.run_meta = [targets, kernels](const Z& z, Rng& rng) {
            return run_seqdb_metainference(targets, kernels, z, rng);
        };
        setup.log_weight = [targets](const Y& y, const Z& z) {
            return ais_log_weight(targets, SeqDbHistory<Z>{y, z});
        };
        return setup;
    };
    return sweep_points<Y, Z>(config, threads, make_setup);
}

/// Regression problem with covariates evenly spaced in [-1, 1] and data
/// simulated from the model under the preset seed.
struct LinRegSetup {
    LinRegModel lm;
    ModelProgram<std::vector<double>> model;
    Dataset data;
    LinRegPosterior posterior;
};

LinRegSetup make_linreg_setup(const ExperimentConfig& config) {
    LinRegSetup s;
    s.lm.noise_var = config.model_params.value("noise_var", 1.0);
    int n_points = config.model_params.value("n_points", 11);
    for (int i = 0; i < n_points; ++i) {
        s.lm.covariates.push_back(n_points == 1 ? 0.0
                                                : -1.0 + 2.0 * double(i) / double(n_points - 1));
    }
    s.model = linreg_model_program(s.lm);
    Rng data_rng = make_stream(config.model_params.value("seed", 1), stream_tag::kModel, 1);
    auto beta = s.model.sample_prior(data_rng);
    std::vector<double> obs(std::size_t(n_points), 0.0);
    std::normal_distribution<double> noise(0.0, std::sqrt(s.lm.noise_var));
    for (int i = 0; i < n_points; ++i) {
        obs[std::size_t(i)] = beta[0] + beta[1] * s.lm.covariates[std::size_t(i)] + noise(data_rng);
    }
    s.data = Dataset(obs);
    s.posterior = linreg_conjugate_posterior(s.lm, s.data);
    return s;
}

std::vector<ProfilePoint> run_assessable_experiment(const ExperimentConfig& config, int threads) {
    LinRegSetup setup_data = make_linreg_setup(config);
    const auto& model = setup_data.model;
    const auto& data = setup_data.data;
    const auto& posterior = setup_data.posterior;

    GaussianMeanField family;
    family.means = config.inference_params.value("means", std::vector<double>{0.0, 0.0});
    family.variances = config.inference_params.value("variances", std::vector<double>{1.0, 1.0});
    if (family.means.size() != 2 || family.variances.size() != 2) {
        throw ConfigError({"inference.params.means/variances: expected 2 entries each"});
    }
    auto q = gaussian_mean_field_inference(family);

    // The mean-field family has no effort knob; every sweep entry reruns the
    // same estimation under its own row seed.
    std::function<EstimationSetup<std::monostate, std::vector<double>>(int)> make_setup =
        [config, model, data, posterior, family, q](int) {
            EstimationSetup<std::monostate, std::vector<double>> setup;
            if (config.reference_kind == "oracle") {
                setup.sample_reference = [posterior](Rng& rng) {
                    return posterior.posterior.sample(rng);
                };
            } else if (config.reference_kind == "self") {
                setup.sample_reference = [family](Rng& rng) {
                    return gaussian_mean_field_sample(family, rng);
                };
            } else {
                int particles = config.reference_params.value("particles", 64);
                setup.sample_reference = [model, data, particles](Rng& rng) {
                    return run_sir(model, data, std::size_t(particles), rng).second;
                };
            }
            setup.run_meta = [](const std::vector<double>&, Rng&) { return std::monostate{}; };
            setup.run_inference = [q, data](Rng& rng) {
                return std::pair<std::monostate, std::vector<double>>{{}, q.sample(data, rng)};
            };
            setup.log_weight = [model, data, q](const std::monostate&,
                                                const std::vector<double>& z) {
                return model.log_joint(z, data) - q.log_density(z, data);
            };
            return setup;
        };
    return sweep_points<std::monostate, std::vector<double>>(config, threads, make_setup);
}

}  // namespace

ExperimentConfig validate_config(const std::string& text) {
    std::vector<std::string> errors;
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError({std::string("config: not valid JSON (") + e.what() + ")"});
    }
    if (!doc.is_object()) throw ConfigError({"config: top level must be an object"});

    ExperimentConfig config;
    auto section = [&](const char* name) -> json {
        if (!doc.contains(name)) {
            errors.push_back(std::string(name) + ": missing");
            return json::object();
        }
        if (!doc[name].is_object()) {
            errors.push_back(std::string(name) + ": must be an object");
            return json::object();
        }
        return doc[name];
    };

    json model = section("model");
    if (!model.contains("preset") || !model["preset"].is_string()) {
        errors.push_back("model.preset: missing or not a string");
    } else {
        config.model_preset = model["preset"].get<std::string>();
        if (!known(kModelPresets, config.model_preset)) {
            errors.push_back("model.preset: unknown preset '" + config.model_preset + "'");
        }
    }
    config.model_params = model.value("params", json::object());

    json inference = section("inference");
    if (!inference.contains("kind") || !inference["kind"].is_string()) {
        errors.push_back("inference.kind: missing or not a string");
    } else {
        config.inference_kind = inference["kind"].get<std::string>();
        if (!known(kInferenceKinds, config.inference_kind)) {
            errors.push_back("inference.kind: unknown kind '" + config.inference_kind + "'");
        }
    }
    config.inference_params = inference.value("params", json::object());

    json reference = section("reference");
    if (!reference.contains("kind") || !reference["kind"].is_string()) {
        errors.push_back("reference.kind: missing or not a string");
    } else {
        config.reference_kind = reference["kind"].get<std::string>();
        if (!known(kReferenceKinds, config.reference_kind)) {
            errors.push_back("reference.kind: unknown kind '" + config.reference_kind + "'");
        }
    }
    config.reference_params = reference.value("params", json::object());

    if (!config.model_preset.empty() && !config.inference_kind.empty() &&
        known(kModelPresets, config.model_preset) &&
        known(kInferenceKinds, config.inference_kind) &&
        !compatible(config.model_preset, config.inference_kind)) {
        errors.push_back("inference.kind: '" + config.inference_kind +
                         "' cannot run on model preset '" + config.model_preset + "'");
    }

    if (!doc.contains("sweep") || !doc["sweep"].is_array() || doc["sweep"].empty()) {
        errors.push_back("sweep: missing or empty; expected a non-empty array of integers");
    } else {
        for (const auto& v : doc["sweep"]) {
            if (!v.is_number_integer() || v.get<int>() < 1) {
                errors.push_back("sweep: entries must be integers >= 1");
                break;
            }
        }
        if (errors.empty() || errors.back().rfind("sweep:", 0) != 0) {
            config.sweep = doc["sweep"].get<std::vector<int>>();
        }
    }

    auto integer_field = [&](const char* name, int& target) {
        if (!doc.contains(name) || !doc[name].is_number_integer()) {
            errors.push_back(std::string(name) + ": missing or not an integer");
        } else {
            target = doc[name].get<int>();
            if (target < 2) {
                errors.push_back(std::string(name) + ": must be >= 2, got " +
                                 std::to_string(target));
            }
        }
    };
    integer_field("n_ref", config.n_ref);
    integer_field("n_inf", config.n_inf);

    if (doc.contains("seed")) {
        if (!doc["seed"].is_number_unsigned()) {
            errors.push_back("seed: must be a non-negative integer");
        } else {
            config.seed = doc["seed"].get<std::uint64_t>();
        }
    }
    if (doc.contains("output")) {
        if (!doc["output"].is_string()) {
            errors.push_back("output: must be a string path");
        } else {
            config.output = doc["output"].get<std::string>();
        }
    }
    if (doc.contains("raw_weights")) {
        if (!doc["raw_weights"].is_boolean()) {
            errors.push_back("raw_weights: must be a boolean");
        } else {
            config.raw_weights = doc["raw_weights"].get<bool>();
        }
    }

    if (!errors.empty()) throw ConfigError(std::move(errors));
    return config;
}

std::string serialize_config(const ExperimentConfig& config) {
    nlohmann::ordered_json doc;
    doc["model"] = {{"preset", config.model_preset}, {"params", config.model_params}};
    doc["inference"] = {{"kind", config.inference_kind}, {"params", config.inference_params}};
    doc["reference"] = {{"kind", config.reference_kind}, {"params", config.reference_params}};
    doc["sweep"] = config.sweep;
    doc["n_ref"] = config.n_ref;
    doc["n_inf"] = config.n_inf;
    doc["seed"] = config.seed;
    doc["output"] = config.output;
    doc["raw_weights"] = config.raw_weights;
    return doc.dump(2);
}

std::vector<ProfilePoint> run_experiment(const ExperimentConfig& config, int threads) {
    if (config.inference_kind == "smc") return run_smc_experiment(config, threads);
    if (config.inference_kind == "assessable") return run_assessable_experiment(config, threads);

    if (config.model_preset == "toy_bernoulli") {
        auto fixture = std::make_shared<ToyBernoulli>(toy_bernoulli_fixture());
        auto oracle_int = [fixture](Rng& rng) { return fixture->posterior.sample(rng); };
        if (config.inference_kind == "sir") {
            return run_sir_experiment<int>(config, threads, fixture->model, fixture->data,
                                           oracle_int);
        }
        // seqdb view: one-site lattice latent so chain states are vectors.
        ModelProgram<std::vector<int>> model;
        model.sample_prior = [fixture](Rng& rng) {
            return std::vector<int>{fixture->model.sample_prior(rng)};
        };
        model.log_joint = [fixture](const std::vector<int>& z, const Dataset& data) {
            return z.size() == 1 ? fixture->model.log_joint(z[0], data) : kNegInf;
        };
        model.log_prior = [fixture](const std::vector<int>& z) {
            return z.size() == 1 ? fixture->model.log_prior(z[0]) : kNegInf;
        };
        model.latent_support = {{0}, {1}};
        auto targets = sequential_observation_targets(model, fixture->data);
        auto oracle = [fixture](Rng& rng) {
            return std::vector<int>{fixture->posterior.sample(rng)};
        };
        return run_seqdb_experiment(config, threads, model, fixture->data, targets, oracle);
    }

    if (config.model_preset == "linreg") {
        // SIR on the regression model (the assessable path is handled above).
        LinRegSetup s = make_linreg_setup(config);
        auto posterior = s.posterior;
        auto oracle = [posterior](Rng& rng) { return posterior.posterior.sample(rng); };
        return run_sir_experiment<std::vector<double>>(config, threads, s.model, s.data, oracle);
    }

    if (config.model_preset == "noisyor") {
        auto net = std::make_shared<NoisyOrNetwork>(noisyor_random_network(
            config.model_params.value("n_causes", 6), config.model_params.value("n_findings", 8),
            config.model_params.value("seed", 1), config.model_params.value("cause_prior", 0.05),
            config.model_params.value("transmission", 0.9),
            config.model_params.value("leak", 0.001)));
        auto model = noisyor_model_program(*net);
        Dataset data(std::vector<double>(net->findings.begin(), net->findings.end()));
        auto posterior =
            std::make_shared<FiniteDistribution<std::vector<int>>>(exact_posterior(model, data));
        auto oracle = [posterior](Rng& rng) { return posterior->sample(rng); };
        if (config.inference_kind == "sir") {
            return run_sir_experiment<std::vector<int>>(config, threads, model, data, oracle);
        }
        auto targets =
            noisyor_annealing_schedule(*net, config.inference_params.value("anneal_steps", 10));
        return run_seqdb_experiment(config, threads, model, data, targets, oracle);
    }

    throw ConfigError({"inference.kind: unsupported combination '" + config.model_preset + "' + '" +
                       config.inference_kind + "'"});
}

void write_profile_csv(const std::vector<ProfilePoint>& profile, std::ostream& out) {
    out << "knob,estimate_nats,stderr_nats,n_ref,n_inf,seed,"
           "t_ref_ms,t_meta_ms,t_inf_ms,t_weight_ms\n";
    for (const auto& p : profile) {
        out << p.knob << ',' << fmt_double(p.estimate.estimate) << ','
            << fmt_double(p.estimate.std_error) << ',' << p.estimate.n_reference << ','
            << p.estimate.n_inference << ',' << p.row_seed << ','
            << fmt_ms(p.estimate.timings.reference_ms) << ',' << fmt_ms(p.estimate.timings.meta_ms)
            << ',' << fmt_ms(p.estimate.timings.inference_ms) << ','
            << fmt_ms(p.estimate.timings.weight_ms) << '\n';
    }
}

void write_raw_weights(const std::vector<ProfilePoint>& profile, std::ostream& out) {
    for (const auto& p : profile) {
        for (std::size_t i = 0; i < p.estimate.ref_log_weights.size(); ++i) {
            nlohmann::ordered_json row = {{"knob", p.knob},
                                          {"seed", p.row_seed},
                                          {"branch", "reference"},
                                          {"index", i},
                                          {"log_weight", p.estimate.ref_log_weights[i]}};
            out << row.dump() << '\n';
        }
        for (std::size_t i = 0; i < p.estimate.inf_log_weights.size(); ++i) {
            nlohmann::ordered_json row = {{"knob", p.knob},
                                          {"seed", p.row_seed},
                                          {"branch", "inference"},
                                          {"index", i},
                                          {"log_weight", p.estimate.inf_log_weights[i]}};
            out << row.dump() << '\n';
        }
    }
}

std::vector<std::string> list_presets() {
    return {
        "models:",
        "  toy_bernoulli             two-point latent, one binary observation",
        "  hmm                       params: n_states=2 n_obs=3 T=40 seed=1",
        "  linreg                    params: n_points=11 noise_var=1.0 seed=1",
        "  noisyor                   params: n_causes=6 n_findings=8 cause_prior=0.05 seed=1",
        "inference kinds:",
        "  sir                       knob = particles; models: toy_bernoulli linreg noisyor",
        "  smc                       knob = particles; params: proposal=prior|conditional; model: hmm",
        "  seqdb                     knob = kernel repetitions; models: toy_bernoulli noisyor",
        "  assessable                Gaussian mean-field; params: means variances; model: linreg",
        "reference kinds:",
        "  oracle                    exact posterior sampler for the chosen model",
        "  lw_sir                    params: particles=64",
        "  self                      the inference program's own output distribution",
    };
}

}  // namespace subjdiv
