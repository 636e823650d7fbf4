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

// Particle filtering with independent categorical resampling, conditional-SMC
// meta-inference with uniform ancestry, the weight-estimate = Z_hat identity
// (fast path returns the accumulated marginal likelihood estimate; a slow path
// evaluates log p + log m - log q directly for testing), the T=1
// sampling-importance-resampling special case, and forward-filtering
// backward-sampling for finite state spaces.
//
// Resampled particle values are copied by index; the delta factors they would
// contribute to the history densities cancel between inference and
// meta-inference and are never evaluated.

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "subjdiv/core.hpp"
#include "subjdiv/errors.hpp"
#include "subjdiv/numeric.hpp"
#include "subjdiv/rng.hpp"

namespace subjdiv {

/// State space model p(z_1) prod_t p(z_t | z_{t-1}) prod_t p(x_t | z_t) with
/// the observed x_1..x_T baked into observation_log_density. `states`
/// non-empty marks a finite state space (enables FFBS and enumeration).
template <class S>
struct StateSpaceModel {
    std::size_t T = 0;
    std::function<double(const S&)> initial_log_density;
    std::function<double(const S&, const S&)> transition_log_density;  // (next, prev)
    std::function<double(std::size_t, const S&)> observation_log_density;  // (t, state), t 0-based
    std::vector<S> states;
};

/// Proposal densities M_1(u_1) and M_t(u_t; u_{t-1}); positive wherever the
/// model transition is.
template <class S>
struct ProposalFamily {
    std::function<S(Rng&)> sample_initial;
    std::function<double(const S&)> initial_log_density;
    std::function<S(std::size_t, const S&, Rng&)> sample_transition;  // (t, prev, rng)
    std::function<double(std::size_t, const S&, const S&)> transition_log_density;  // (t, next, prev)
};

/// Full record of one particle filter (or CSMC) run.
template <class S>
struct ParticleFilterHistory {
    std::vector<std::vector<S>> particles;             // [T][K]
    std::vector<std::vector<std::size_t>> ancestors;   // [T-1][K]
    std::size_t final_index = 0;                       // k
    std::vector<std::size_t> ancestry;                 // I_1..I_T; I_T = k
    std::vector<std::vector<double>> log_weights;      // [T][K], unnormalized
    double log_Z_hat = 0.0;

    std::size_t num_steps() const { return particles.size(); }
    std::size_t num_particles() const { return particles.empty() ? 0 : particles[0].size(); }
};

template <class S>
double ssm_log_joint(const StateSpaceModel<S>& ssm, const std::vector<S>& z) {
    if (z.size() != ssm.T) throw Error("path length does not match model horizon");
    double acc = ssm.initial_log_density(z[0]) + ssm.observation_log_density(0, z[0]);
    for (std::size_t t = 1; t < ssm.T; ++t) {
        acc += ssm.transition_log_density(z[t], z[t - 1]) + ssm.observation_log_density(t, z[t]);
    }
    return acc;
}

namespace detail {

template <class S>
double pf_step_log_weight(const StateSpaceModel<S>& ssm, const ProposalFamily<S>& proposals,
                          std::size_t t, const S& u, const S* prev) {
    if (t == 0) {
        return ssm.initial_log_density(u) + ssm.observation_log_density(0, u) -
               proposals.initial_log_density(u);
    }
    return ssm.transition_log_density(u, *prev) + ssm.observation_log_density(t, u) -
           proposals.transition_log_density(t, u, *prev);
}

/// Recomputes the per-step unnormalized log weights of a history from the
/// model and proposals (equal to history.log_weights for generated runs).
template <class S>
std::vector<std::vector<double>> recompute_log_weights(const StateSpaceModel<S>& ssm,
                                                       const ProposalFamily<S>& proposals,
                                                       const ParticleFilterHistory<S>& h) {
    const std::size_t T = h.num_steps();
    const std::size_t K = h.num_particles();
    std::vector<std::vector<double>> lw(T, std::vector<double>(K));
    for (std::size_t i = 0; i < K; ++i) {
        lw[0][i] = pf_step_log_weight<S>(ssm, proposals, 0, h.particles[0][i], nullptr);
    }
    for (std::size_t t = 1; t < T; ++t) {
        for (std::size_t i = 0; i < K; ++i) {
            const S& prev = h.particles[t - 1][h.ancestors[t - 1][i]];
            lw[t][i] = pf_step_log_weight(ssm, proposals, t, h.particles[t][i], &prev);
        }
    }
    return lw;
}

inline double step_total_or_throw(const std::vector<double>& lw, std::size_t t) {
    double total = logsumexp(lw);
    if (total == kNegInf) {
        throw AllWeightsZero("all particle weights vanished at step " + std::to_string(t));
    }
    return total;
}

}  // namespace detail

/// Particle filter with K particles and independent categorical resampling.
/// Returns the full history and the output path read along its ancestry.
template <class S>
std::pair<ParticleFilterHistory<S>, std::vector<S>> run_particle_filter(
    const StateSpaceModel<S>& ssm, const ProposalFamily<S>& proposals, std::size_t K, Rng& rng) {
    if (K < 1 || ssm.T < 1) throw Error("particle filter needs K >= 1 and T >= 1");
    ParticleFilterHistory<S> h;
    h.particles.assign(ssm.T, std::vector<S>(K));
    h.ancestors.assign(ssm.T - 1, std::vector<std::size_t>(K));
    h.log_weights.assign(ssm.T, std::vector<double>(K));
    h.log_Z_hat = 0.0;

    for (std::size_t i = 0; i < K; ++i) {
        h.particles[0][i] = proposals.sample_initial(rng);
        h.log_weights[0][i] =
            detail::pf_step_log_weight<S>(ssm, proposals, 0, h.particles[0][i], nullptr);
    }
    h.log_Z_hat += detail::step_total_or_throw(h.log_weights[0], 0) - std::log(double(K));

    for (std::size_t t = 1; t < ssm.T; ++t) {
        for (std::size_t i = 0; i < K; ++i) {
            std::size_t a = sample_categorical_log(h.log_weights[t - 1], rng);
            h.ancestors[t - 1][i] = a;
            const S& prev = h.particles[t - 1][a];
            h.particles[t][i] = proposals.sample_transition(t, prev, rng);
            h.log_weights[t][i] =
                detail::pf_step_log_weight<S>(ssm, proposals, t, h.particles[t][i], &prev);
        }
        h.log_Z_hat += detail::step_total_or_throw(h.log_weights[t], t) - std::log(double(K));
    }

    h.final_index = sample_categorical_log(h.log_weights[ssm.T - 1], rng);
    h.ancestry.assign(ssm.T, 0);
    h.ancestry[ssm.T - 1] = h.final_index;
    for (std::size_t t = ssm.T - 1; t-- > 0;) {
        h.ancestry[t] = h.ancestors[t][h.ancestry[t + 1]];
    }

    std::vector<S> z(ssm.T);
    for (std::size_t t = 0; t < ssm.T; ++t) z[t] = h.particles[t][h.ancestry[t]];
    return {std::move(h), std::move(z)};
}

template <class S>
std::pair<ParticleFilterHistory<S>, std::vector<S>> run_particle_filter(
    const StateSpaceModel<S>& ssm, const ProposalFamily<S>& proposals, std::size_t K,
    std::uint64_t seed) {
    Rng rng = make_stream(seed, stream_tag::kModel, 0);
    return run_particle_filter(ssm, proposals, K, rng);
}

/// Conditional SMC: clamps the retained path z along a uniformly drawn
/// ancestry (probability K^{-T}) and regenerates the other K-1 particles per
/// step exactly as the particle filter would.
template <class S>
ParticleFilterHistory<S> run_csmc_metainference(const StateSpaceModel<S>& ssm,
                                                const ProposalFamily<S>& proposals, std::size_t K,
                                                const std::vector<S>& z, Rng& rng) {
    if (K < 1 || ssm.T < 1) throw Error("CSMC needs K >= 1 and T >= 1");
    if (z.size() != ssm.T) throw Error("retained path length does not match model horizon");
    ParticleFilterHistory<S> h;
    h.particles.assign(ssm.T, std::vector<S>(K));
    h.ancestors.assign(ssm.T - 1, std::vector<std::size_t>(K));
    h.log_weights.assign(ssm.T, std::vector<double>(K));
    h.ancestry.assign(ssm.T, 0);
    h.log_Z_hat = 0.0;

    std::uniform_int_distribution<std::size_t> slot(0, K - 1);
    for (std::size_t t = 0; t < ssm.T; ++t) h.ancestry[t] = slot(rng);
    h.final_index = h.ancestry[ssm.T - 1];

    for (std::size_t i = 0; i < K; ++i) {
        h.particles[0][i] = (i == h.ancestry[0]) ? z[0] : proposals.sample_initial(rng);
        h.log_weights[0][i] =
            detail::pf_step_log_weight<S>(ssm, proposals, 0, h.particles[0][i], nullptr);
    }
    h.log_Z_hat += detail::step_total_or_throw(h.log_weights[0], 0) - std::log(double(K));

    for (std::size_t t = 1; t < ssm.T; ++t) {
        for (std::size_t i = 0; i < K; ++i) {
            if (i == h.ancestry[t]) {
                h.ancestors[t - 1][i] = h.ancestry[t - 1];
                h.particles[t][i] = z[t];
            } else {
                std::size_t a = sample_categorical_log(h.log_weights[t - 1], rng);
                h.ancestors[t - 1][i] = a;
                h.particles[t][i] = proposals.sample_transition(t, h.particles[t - 1][a], rng);
            }
            const S& prev = h.particles[t - 1][h.ancestors[t - 1][i]];
            h.log_weights[t][i] =
                detail::pf_step_log_weight<S>(ssm, proposals, t, h.particles[t][i], &prev);
        }
        h.log_Z_hat += detail::step_total_or_throw(h.log_weights[t], t) - std::log(double(K));
    }
    return h;
}

template <class S>
ParticleFilterHistory<S> run_csmc_metainference(const StateSpaceModel<S>& ssm,
                                                const ProposalFamily<S>& proposals, std::size_t K,
                                                const std::vector<S>& z, std::uint64_t seed) {
    Rng rng = make_stream(seed, stream_tag::kMeta, 0);
    return run_csmc_metainference(ssm, proposals, K, z, rng);
}

/// log q(y, z; x*) of a particle filter run, excluding the delta factors for
/// resampled copies and for the output path (those cancel against
/// meta-inference). Per-step weights are recomputed from the model.
template <class S>
double pf_log_density(const StateSpaceModel<S>& ssm, const ProposalFamily<S>& proposals,
                      const ParticleFilterHistory<S>& h) {
    const std::size_t T = h.num_steps();
    const std::size_t K = h.num_particles();
    auto lw = detail::recompute_log_weights(ssm, proposals, h);
    double acc = 0.0;
    for (std::size_t i = 0; i < K; ++i) {
        acc += proposals.initial_log_density(h.particles[0][i]);
    }
    for (std::size_t t = 1; t < T; ++t) {
        double total = detail::step_total_or_throw(lw[t - 1], t - 1);
        for (std::size_t i = 0; i < K; ++i) {
            std::size_t a = h.ancestors[t - 1][i];
            acc += lw[t - 1][a] - total +
                   proposals.transition_log_density(t, h.particles[t][i], h.particles[t - 1][a]);
        }
    }
    double total = detail::step_total_or_throw(lw[T - 1], T - 1);
    acc += lw[T - 1][h.final_index] - total;
    return acc;
}

/// log m(y; z, x*) of the CSMC update: K^{-T} for the ancestry times the
/// proposal and resampling probabilities of the K-1 free particles per step.
template <class S>
double csmc_log_density(const StateSpaceModel<S>& ssm, const ProposalFamily<S>& proposals,
                        const ParticleFilterHistory<S>& h) {
    const std::size_t T = h.num_steps();
    const std::size_t K = h.num_particles();
    auto lw = detail::recompute_log_weights(ssm, proposals, h);
    double acc = -double(T) * std::log(double(K));
    for (std::size_t i = 0; i < K; ++i) {
        if (i == h.ancestry[0]) continue;
        acc += proposals.initial_log_density(h.particles[0][i]);
    }
    for (std::size_t t = 1; t < T; ++t) {
        double total = detail::step_total_or_throw(lw[t - 1], t - 1);
        for (std::size_t i = 0; i < K; ++i) {
            if (i == h.ancestry[t]) continue;
            std::size_t a = h.ancestors[t - 1][i];
            acc += lw[t - 1][a] - total +
                   proposals.transition_log_density(t, h.particles[t][i], h.particles[t - 1][a]);
        }
    }
    return acc;
}

namespace detail {

template <class S>
void check_history_consistency(const ParticleFilterHistory<S>& h, const std::vector<S>& z) {
    const std::size_t T = h.num_steps();
    const std::size_t K = h.num_particles();
    if (T == 0 || K == 0 || h.ancestry.size() != T || h.ancestors.size() + 1 != T ||
        h.log_weights.size() != T || z.size() != T) {
        throw InconsistentHistory("history shape is malformed");
    }
    if (h.ancestry[T - 1] != h.final_index) {
        throw InconsistentHistory("ancestry does not terminate at the final index");
    }
    for (std::size_t t = 0; t + 1 < T; ++t) {
        if (h.ancestry[t + 1] >= K || h.ancestry[t] != h.ancestors[t][h.ancestry[t + 1]]) {
            throw InconsistentHistory("ancestry does not follow the ancestor indices at step " +
                                      std::to_string(t));
        }
    }
    for (std::size_t t = 0; t < T; ++t) {
        if (!(h.particles[t][h.ancestry[t]] == z[t])) {
            throw InconsistentHistory("output path disagrees with the retained particles at step " +
                                      std::to_string(t));
        }
    }
}

}  // namespace detail

/// Fast-path weight estimate: log w_hat equals the marginal likelihood
/// estimate accumulated during the run. Validates the history first.
template <class S>
double pf_log_weight_estimate(const ParticleFilterHistory<S>& h, const std::vector<S>& z,
                              const StateSpaceModel<S>& ssm) {
    if (h.num_steps() != ssm.T) throw InconsistentHistory("history horizon mismatch");
    detail::check_history_consistency(h, z);
    double recomputed = 0.0;
    for (std::size_t t = 0; t < ssm.T; ++t) {
        recomputed += logsumexp(h.log_weights[t]) - std::log(double(h.num_particles()));
    }
    if (std::abs(recomputed - h.log_Z_hat) > 1e-9) {
        throw InconsistentHistory("stored log Z_hat disagrees with stored weights");
    }
    return h.log_Z_hat;
}

/// Slow-path weight estimate log p(z, x*) + log m(y; z) - log q(y, z),
/// provided for verifying the identity with the fast path.
template <class S>
double pf_slow_log_weight(const StateSpaceModel<S>& ssm, const ProposalFamily<S>& proposals,
                          const ParticleFilterHistory<S>& h, const std::vector<S>& z) {
    detail::check_history_consistency(h, z);
    return ssm_log_joint(ssm, z) + csmc_log_density(ssm, proposals, h) -
           pf_log_density(ssm, proposals, h);
}

/// Proposal equal to the model prior (likelihood weighting).
template <class S>
ProposalFamily<S> make_prior_proposals(const StateSpaceModel<S>& ssm) {
    if (ssm.states.empty()) throw Error("prior proposals need a finite state space");
    ProposalFamily<S> prop;
    std::vector<S> states = ssm.states;
    auto init = ssm.initial_log_density;
    auto trans = ssm.transition_log_density;
    prop.initial_log_density = init;
    prop.sample_initial = [states, init](Rng& rng) {
        std::vector<double> lw(states.size());
        for (std::size_t i = 0; i < states.size(); ++i) lw[i] = init(states[i]);
        return states[sample_categorical_log(lw, rng)];
    };
    prop.transition_log_density = [trans](std::size_t, const S& next, const S& prev) {
        return trans(next, prev);
    };
    prop.sample_transition = [states, trans](std::size_t, const S& prev, Rng& rng) {
        std::vector<double> lw(states.size());
        for (std::size_t i = 0; i < states.size(); ++i) lw[i] = trans(states[i], prev);
        return states[sample_categorical_log(lw, rng)];
    };
    return prop;
}

/// One-step-lookahead conditional proposal for finite state spaces:
/// M_t(u; prev) proportional to p(u | prev) p(x_t | u).
template <class S>
ProposalFamily<S> make_conditional_proposals(const StateSpaceModel<S>& ssm) {
    if (ssm.states.empty()) throw Error("conditional proposals need a finite state space");
    ProposalFamily<S> prop;
    std::vector<S> states = ssm.states;
    auto init = ssm.initial_log_density;
    auto trans = ssm.transition_log_density;
    auto obs = ssm.observation_log_density;
    auto initial_scores = [states, init, obs]() {
        std::vector<double> lw(states.size());
        for (std::size_t i = 0; i < states.size(); ++i) lw[i] = init(states[i]) + obs(0, states[i]);
        return lw;
    };
    prop.initial_log_density = [states, initial_scores](const S& u) {
        auto lw = initial_scores();
        double total = logsumexp(lw);
        for (std::size_t i = 0; i < states.size(); ++i) {
            if (states[i] == u) return lw[i] - total;
        }
        return kNegInf;
    };
    prop.sample_initial = [states, initial_scores](Rng& rng) {
        return states[sample_categorical_log(initial_scores(), rng)];
    };
    auto step_scores = [states, trans, obs](std::size_t t, const S& prev) {
        std::vector<double> lw(states.size());
        for (std::size_t i = 0; i < states.size(); ++i) {
            lw[i] = trans(states[i], prev) + obs(t, states[i]);
        }
        return lw;
    };
    prop.transition_log_density = [states, step_scores](std::size_t t, const S& next,
                                                        const S& prev) {
        auto lw = step_scores(t, prev);
        double total = logsumexp(lw);
        for (std::size_t i = 0; i < states.size(); ++i) {
            if (states[i] == next) return lw[i] - total;
        }
        return kNegInf;
    };
    prop.sample_transition = [states, step_scores](std::size_t t, const S& prev, Rng& rng) {
        return states[sample_categorical_log(step_scores(t, prev), rng)];
    };
    return prop;
}

/// Views a generic model as a T=1 state space model: the single "observation"
/// factor carries the full likelihood p(x* | z) = p(z, x*) / p(z).
template <class Z>
StateSpaceModel<Z> sir_state_space_model(const ModelProgram<Z>& model, const Dataset& data) {
    if (!model.log_prior) throw Error("SIR needs an evaluable prior density");
    StateSpaceModel<Z> ssm;
    ssm.T = 1;
    ssm.initial_log_density = model.log_prior;
    ssm.transition_log_density = [](const Z&, const Z&) { return kNegInf; };
    ssm.observation_log_density = [&model, data](std::size_t, const Z& z) {
        return model.log_joint(z, data) - model.log_prior(z);
    };
    ssm.states = model.latent_support;
    return ssm;
}

/// Likelihood-weighting proposal (the prior) for the T=1 view of a model.
template <class Z>
ProposalFamily<Z> sir_prior_proposals(const ModelProgram<Z>& model) {
    if (!model.log_prior) throw Error("SIR needs an evaluable prior density");
    ProposalFamily<Z> prop;
    prop.sample_initial = model.sample_prior;
    prop.initial_log_density = model.log_prior;
    prop.sample_transition = [](std::size_t, const Z&, Rng&) -> Z {
        throw Error("T=1 proposal has no transition");
    };
    prop.transition_log_density = [](std::size_t, const Z&, const Z&) { return kNegInf; };
    return prop;
}

/// Likelihood-weighting sampling importance resampling: T=1 particle filter
/// with K particles drawn from the prior.
template <class Z>
std::pair<ParticleFilterHistory<Z>, Z> run_sir(const ModelProgram<Z>& model, const Dataset& data,
                                               std::size_t K, Rng& rng) {
    auto ssm = sir_state_space_model(model, data);
    auto prop = sir_prior_proposals(model);
    auto [history, path] = run_particle_filter(ssm, prop, K, rng);
    return {std::move(history), path[0]};
}

template <class Z>
std::pair<ParticleFilterHistory<Z>, Z> run_sir(const ModelProgram<Z>& model, const Dataset& data,
                                               std::size_t K, std::uint64_t seed) {
    Rng rng = make_stream(seed, stream_tag::kModel, 0);
    return run_sir(model, data, K, rng);
}

/// SIR meta-inference: places z into a uniformly chosen slot and fills the
/// other K-1 slots from the prior.
template <class Z>
ParticleFilterHistory<Z> run_sir_metainference(const ModelProgram<Z>& model, const Dataset& data,
                                               std::size_t K, const Z& z, Rng& rng) {
    auto ssm = sir_state_space_model(model, data);
    auto prop = sir_prior_proposals(model);
    return run_csmc_metainference(ssm, prop, K, std::vector<Z>{z}, rng);
}

/// Adapters into the generic estimator interface. The state space model
/// already closes over its data, so the Dataset argument is ignored.
template <class S>
InferenceProgram<ParticleFilterHistory<S>, std::vector<S>> make_pf_inference(
    const StateSpaceModel<S>& ssm, const ProposalFamily<S>& proposals, std::size_t K) {
    return {
        [ssm, proposals, K](const Dataset&, Rng& rng) {
            return run_particle_filter(ssm, proposals, K, rng);
        },
        [ssm, proposals](const ParticleFilterHistory<S>& y, const std::vector<S>& z,
                         const Dataset&) {
            detail::check_history_consistency(y, z);
            return pf_log_density(ssm, proposals, y);
        },
    };
}

template <class S>
MetaInferenceProgram<ParticleFilterHistory<S>, std::vector<S>> make_pf_metainference(
    const StateSpaceModel<S>& ssm, const ProposalFamily<S>& proposals, std::size_t K) {
    return {
        [ssm, proposals, K](const std::vector<S>& z, const Dataset&, Rng& rng) {
            return run_csmc_metainference(ssm, proposals, K, z, rng);
        },
        [ssm, proposals](const ParticleFilterHistory<S>& y, const std::vector<S>& z,
                         const Dataset&) {
            detail::check_history_consistency(y, z);
            return csmc_log_density(ssm, proposals, y);
        },
    };
}

/// Forward pass in log space; returns the filtering scores alpha[t][i] =
/// log p(z_t = states[i], x_1..x_t).
template <class S>
std::vector<std::vector<double>> hmm_forward_pass(const StateSpaceModel<S>& ssm) {
    if (ssm.states.empty()) throw Error("forward pass needs a finite state space");
    const std::size_t n = ssm.states.size();
    std::vector<std::vector<double>> alpha(ssm.T, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        alpha[0][i] =
            ssm.initial_log_density(ssm.states[i]) + ssm.observation_log_density(0, ssm.states[i]);
    }
    std::vector<double> scratch(n);
    for (std::size_t t = 1; t < ssm.T; ++t) {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                scratch[j] =
                    alpha[t - 1][j] + ssm.transition_log_density(ssm.states[i], ssm.states[j]);
            }
            alpha[t][i] = logsumexp(scratch) + ssm.observation_log_density(t, ssm.states[i]);
        }
    }
    return alpha;
}

/// Exact log p(x_1..x_T). Throws ZeroEvidence when the data is impossible.
template <class S>
double hmm_log_evidence(const StateSpaceModel<S>& ssm) {
    auto alpha = hmm_forward_pass(ssm);
    double evidence = logsumexp(alpha[ssm.T - 1]);
    if (evidence == kNegInf) throw ZeroEvidence("observed data has zero probability");
    return evidence;
}

/// Forward-filtering backward-sampling: exact posterior path sample.
template <class S>
std::vector<S> ffbs_sample(const StateSpaceModel<S>& ssm, Rng& rng) {
    auto alpha = hmm_forward_pass(ssm);
    if (logsumexp(alpha[ssm.T - 1]) == kNegInf) {
        throw ZeroEvidence("observed data has zero probability");
    }
    const std::size_t n = ssm.states.size();
    std::vector<std::size_t> idx(ssm.T);
    idx[ssm.T - 1] = sample_categorical_log(alpha[ssm.T - 1], rng);
    std::vector<double> scratch(n);
    for (std::size_t t = ssm.T - 1; t-- > 0;) {
        for (std::size_t j = 0; j < n; ++j) {
            scratch[j] = alpha[t][j] +
                         ssm.transition_log_density(ssm.states[idx[t + 1]], ssm.states[j]);
        }
        idx[t] = sample_categorical_log(scratch, rng);
    }
    std::vector<S> z(ssm.T);
    for (std::size_t t = 0; t < ssm.T; ++t) z[t] = ssm.states[idx[t]];
    return z;
}

template <class S>
std::vector<S> ffbs_sample(const StateSpaceModel<S>& ssm, std::uint64_t seed) {
    Rng rng = make_stream(seed, stream_tag::kReference, 0);
    return ffbs_sample(ssm, rng);
}

}  // namespace subjdiv
