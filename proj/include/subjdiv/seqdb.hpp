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

// Sequential detailed-balance inference: run a chain of transition operators
// through a bridge of target distributions; meta-inference runs the same
// operators in reverse. The weight estimate telescopes into an annealed
// importance sampling product over successive unnormalized targets.
//
// Histories are coarse-grained: accept/reject indicators and proposal draws
// inside kernels are not recorded, so kernels need evaluable transition
// densities only in enumerable test fixtures.

#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "subjdiv/core.hpp"
#include "subjdiv/errors.hpp"
#include "subjdiv/exact.hpp"
#include "subjdiv/kernels.hpp"
#include "subjdiv/numeric.hpp"

namespace subjdiv {

/// Unnormalized log densities p~_0 .. p~_T bridging an initial distribution
/// (p~_0, which must be normalized and sampleable) to the model joint
/// p(z, x*) (p~_T).
template <class S>
struct TargetSequence {
    std::vector<std::function<double(const S&)>> log_targets;  // size T + 1
    std::vector<std::string> target_ids;                       // ids of p_1 .. p_T
    std::function<S(Rng&)> sample_initial;                     // draws from p_0

    std::size_t num_steps() const {
        if (log_targets.size() < 2) throw Error("TargetSequence needs at least 2 targets");
        return log_targets.size() - 1;
    }
};

/// Coarse-grained execution history: intermediate states u_0 .. u_{T-1} plus
/// the output z.
template <class S>
struct SeqDbHistory {
    std::vector<S> states;
    S output;
};

namespace detail {

template <class S>
void require_kernel_targets(const TargetSequence<S>& targets,
                            const std::vector<TransitionKernel<S>>& kernels) {
    const std::size_t steps = targets.num_steps();
    if (kernels.size() != steps) {
        throw TargetMismatch("expected " + std::to_string(steps) + " kernels, got " +
                             std::to_string(kernels.size()));
    }
    if (targets.target_ids.size() != steps) {
        throw TargetMismatch("target sequence declares " +
                             std::to_string(targets.target_ids.size()) + " ids for " +
                             std::to_string(steps) + " steps");
    }
    for (std::size_t t = 0; t < steps; ++t) {
        if (kernels[t].target_id != targets.target_ids[t]) {
            throw TargetMismatch("kernel " + std::to_string(t + 1) + " targets '" +
                                 kernels[t].target_id + "' but the sequence expects '" +
                                 targets.target_ids[t] + "'");
        }
    }
}

}  // namespace detail

/// Inference: u_0 ~ p_0, u_t ~ k_t(.; u_{t-1}) for t = 1..T-1, z ~ k_T(.; u_{T-1}).
template <class S>
SeqDbHistory<S> run_seqdb_inference(const TargetSequence<S>& targets,
                                    const std::vector<TransitionKernel<S>>& kernels, Rng& rng) {
    detail::require_kernel_targets(targets, kernels);
    const std::size_t steps = targets.num_steps();
    SeqDbHistory<S> history;
    history.states.reserve(steps);
    history.states.push_back(targets.sample_initial(rng));
    for (std::size_t t = 0; t + 1 < steps; ++t) {
        history.states.push_back(kernels[t].step(history.states.back(), rng));
    }
    history.output = kernels[steps - 1].step(history.states.back(), rng);
    return history;
}

/// Meta-inference: u_{T-1} ~ k_T(.; z*), then downward u_t ~ k_{t+1}(.; u_{t+1}).
/// Cycle kernels apply their components in reverse order here.
template <class S>
std::vector<S> run_seqdb_metainference(const TargetSequence<S>& targets,
                                       const std::vector<TransitionKernel<S>>& kernels,
                                       const S& output, Rng& rng) {
    detail::require_kernel_targets(targets, kernels);
    const std::size_t steps = targets.num_steps();
    std::vector<S> states(steps);
    states[steps - 1] = kernels[steps - 1].reverse_step(output, rng);
    for (std::size_t t = steps - 1; t-- > 0;) {
        states[t] = kernels[t].reverse_step(states[t + 1], rng);
    }
    return states;
}

/// log w_hat = sum_{t=0}^{T-1} [log p~_{t+1}(u_t) - log p~_t(u_t)].
template <class S>
double ais_log_weight(const TargetSequence<S>& targets, const SeqDbHistory<S>& history) {
    const std::size_t steps = targets.num_steps();
    if (history.states.size() != steps) {
        throw Error("history length does not match target sequence");
    }
    double acc = 0.0;
    for (std::size_t t = 0; t < steps; ++t) {
        double num = targets.log_targets[t + 1](history.states[t]);
        double den = targets.log_targets[t](history.states[t]);
        if (num == kNegInf || den == kNegInf) {
            throw SupportViolation("zero target mass at annealing step " + std::to_string(t));
        }
        acc += num - den;
    }
    return acc;
}

/// State-extension variant. The state grows by concatenation: step t extends
/// u_{t-1} with fresh components v_t before the transition operator runs, so
/// targets here live on vectors of increasing length.
template <class V>
struct ExtensionSchedule {
    // sample[t]: v_{t+1} given u_t (sample[0] draws v_1 unconditionally).
    std::vector<std::function<std::vector<V>(const std::vector<V>&, Rng&)>> sample;
    // log_density[t]: log q(v_{t+1} | u_t; x*).
    std::vector<std::function<double(const std::vector<V>&, const std::vector<V>&)>> log_density;
};

template <class V>
struct ExtensionHistory {
    std::vector<std::vector<V>> extensions;  // v_1 .. v_T
    std::vector<std::vector<V>> states;      // u_1 .. u_{T-1}
    std::vector<V> output;                   // z = u_T
};

/// log w_hat = log(p~_1(v_1) / q(v_1)) +
///   sum_{t=1}^{T-1} log( p~_{t+1}(u_t ++ v_{t+1}) / (p~_t(u_t) q(v_{t+1} | u_t)) ).
/// With empty extensions for t >= 2 this reduces exactly to ais_log_weight.
template <class V>
double extension_log_weight(const TargetSequence<std::vector<V>>& targets,
                            const ExtensionSchedule<V>& schedule,
                            const ExtensionHistory<V>& history) {
    const std::size_t steps = targets.num_steps();
    if (history.extensions.size() != steps || history.states.size() != steps - 1) {
        throw Error("extension history shape does not match target sequence");
    }
    auto checked = [](double value, const char* what) {
        if (value == kNegInf) throw SupportViolation(std::string(what) + " has zero mass");
        return value;
    };
    const std::vector<V>& v1 = history.extensions[0];
    double acc = checked(targets.log_targets[1](v1), "p~_1(v_1)") -
                 checked(schedule.log_density[0](v1, {}), "q(v_1)");
    for (std::size_t t = 1; t < steps; ++t) {
        const std::vector<V>& u_t = history.states[t - 1];
        const std::vector<V>& v_next = history.extensions[t];
        std::vector<V> extended = u_t;
        extended.insert(extended.end(), v_next.begin(), v_next.end());
        acc += checked(targets.log_targets[t + 1](extended), "p~_{t+1}(u_t, v_{t+1})") -
               checked(targets.log_targets[t](u_t), "p~_t(u_t)") -
               checked(schedule.log_density[t](v_next, u_t), "q(v_{t+1} | u_t)");
    }
    return acc;
}

/// sum_t symKL(p_t, p_{t+1}): the divergence attained in the limit of
/// perfectly mixing transition operators. Targets are normalized by exact
/// summation over the given support.
template <class S>
double asymptotic_gap(const TargetSequence<S>& targets, const std::vector<S>& support) {
    const std::size_t steps = targets.num_steps();
    auto normalize = [&](std::size_t t) {
        std::vector<double> lw;
        lw.reserve(support.size());
        for (const S& s : support) lw.push_back(targets.log_targets[t](s));
        return FiniteDistribution<S>::from_log_weights(support, std::move(lw));
    };
    double acc = 0.0;
    FiniteDistribution<S> current = normalize(0);
    for (std::size_t t = 0; t < steps; ++t) {
        FiniteDistribution<S> next = normalize(t + 1);
        acc += exact_symmetrized_kl(current, next);
        current = std::move(next);
    }
    return acc;
}

/// Partial-posterior bridge: p~_t(z) = log p(z, x*_{1:t}) following the
/// dataset's observation ordering, with p~_0 the prior. Profiles built on this
/// sequence depend on the data order.
template <class S>
TargetSequence<S> sequential_observation_targets(const ModelProgram<S>& model,
                                                 const Dataset& data) {
    if (!model.log_prior) {
        throw Error("sequential_observation_targets needs an evaluable prior density");
    }
    TargetSequence<S> targets;
    const std::size_t n = data.active;
    targets.log_targets.push_back([&model](const S& z) { return model.log_prior(z); });
    for (std::size_t t = 1; t <= n; ++t) {
        Dataset partial = data.prefix(t);
        targets.log_targets.push_back(
            [&model, partial](const S& z) { return model.log_joint(z, partial); });
        targets.target_ids.push_back("partial_posterior_" + std::to_string(t));
    }
    targets.sample_initial = [&model](Rng& rng) { return model.sample_prior(rng); };
    return targets;
}

/// Geometric bridge: p~_t(z) = prior(z)^(1-b_t) p(z, x*)^(b_t) with b_t
/// linearly spaced from 0 to 1 across the given number of steps.
template <class S>
TargetSequence<S> geometric_bridge_targets(const ModelProgram<S>& model, const Dataset& data,
                                           int steps) {
    if (steps < 1) throw Error("geometric bridge needs at least one step");
    if (!model.log_prior) throw Error("geometric_bridge_targets needs an evaluable prior density");
    TargetSequence<S> targets;
    targets.log_targets.push_back([&model](const S& z) { return model.log_prior(z); });
    for (int t = 1; t <= steps; ++t) {
        double beta = double(t) / double(steps);
        targets.log_targets.push_back([&model, data, beta](const S& z) {
            double lp = model.log_prior(z);
            if (lp == kNegInf) return kNegInf;
            return (1.0 - beta) * lp + beta * model.log_joint(z, data);
        });
        targets.target_ids.push_back("geometric_bridge_" + std::to_string(t));
    }
    targets.sample_initial = [&model](Rng& rng) { return model.sample_prior(rng); };
    return targets;
}

}  // namespace subjdiv
