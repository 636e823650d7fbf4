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

// Exact enumeration of small inference programs over their full history
// spaces. Histories are flattened into integer index tuples so they can live
// in a canonically ordered FiniteDistribution support. Zero-mass histories are
// dropped from supports.

#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <utility>
#include <vector>

#include "subjdiv/core.hpp"
#include "subjdiv/errors.hpp"
#include "subjdiv/exact.hpp"
#include "subjdiv/kernels.hpp"
#include "subjdiv/numeric.hpp"
#include "subjdiv/seqdb.hpp"
#include "subjdiv/smc.hpp"

namespace subjdiv {

/// An inference program enumerated together with its meta-inference.
/// `meta_log_totals` holds logsumexp of the raw (pre-renormalization)
/// meta-inference weights per output; each should be 0 when the meta density
/// formula is itself normalized.
template <class Y, class Z>
struct ProgramEnumeration {
    EnumerableInference<Y, Z> inference;
    EnumerableMeta<Y, Z> meta;
    std::map<Z, double> meta_log_totals;
};

namespace detail {

template <class Y, class Z>
EnumerableMeta<Y, Z> meta_from_tables(
    std::shared_ptr<std::map<Z, std::pair<std::vector<Y>, std::vector<double>>>> tables) {
    auto cache = std::make_shared<std::map<Z, FiniteDistribution<Y>>>();
    return [tables, cache](const Z& z) {
        auto hit = cache->find(z);
        if (hit != cache->end()) return hit->second;
        auto it = tables->find(z);
        if (it == tables->end()) {
            throw SupportMismatch("output has no enumerated meta-inference histories");
        }
        auto dist = FiniteDistribution<Y>::from_log_weights(it->second.first, it->second.second);
        cache->emplace(z, dist);
        return dist;
    };
}

}  // namespace detail

/// Enumerates likelihood-weighting SIR with K particles over a finite-support
/// model. A history is (index of u_1, ..., index of u_K, chosen slot k).
template <class Z>
ProgramEnumeration<std::vector<int>, Z> enumerate_sir(const ModelProgram<Z>& model,
                                                      const Dataset& data, std::size_t K) {
    if (model.latent_support.empty()) throw Error("enumerate_sir needs a finite latent support");
    if (!model.log_prior) throw Error("enumerate_sir needs an evaluable prior density");
    const auto& sup = model.latent_support;
    const int n = static_cast<int>(sup.size());

    std::vector<std::pair<std::vector<int>, Z>> joint_support;
    std::vector<double> joint_log_weights;
    auto meta_tables = std::make_shared<
        std::map<Z, std::pair<std::vector<std::vector<int>>, std::vector<double>>>>();

    std::vector<int> digits(K + 1, 0);
    std::vector<int> radix(K + 1, n);
    radix[K] = static_cast<int>(K);
    do {
        std::vector<double> log_prior(K), log_w(K);
        bool dead = false;
        for (std::size_t i = 0; i < K && !dead; ++i) {
            const Z& u = sup[static_cast<std::size_t>(digits[i])];
            log_prior[i] = model.log_prior(u);
            log_w[i] = model.log_joint(u, data) - log_prior[i];
            if (log_prior[i] == kNegInf) dead = true;
        }
        if (dead) continue;
        const std::size_t k = static_cast<std::size_t>(digits[K]);
        double total = logsumexp(log_w);
        if (total == kNegInf || log_w[k] == kNegInf) continue;

        double lq = log_w[k] - total;
        double lm = -std::log(double(K));
        for (std::size_t i = 0; i < K; ++i) {
            lq += log_prior[i];
            if (i != k) lm += log_prior[i];
        }
        const Z& z = sup[static_cast<std::size_t>(digits[k])];
        joint_support.emplace_back(digits, z);
        joint_log_weights.push_back(lq);
        auto& table = (*meta_tables)[z];
        table.first.push_back(digits);
        table.second.push_back(lm);
    } while (next_tuple(digits, radix));

    ProgramEnumeration<std::vector<int>, Z> out;
    out.inference.joint = FiniteDistribution<std::pair<std::vector<int>, Z>>::from_log_weights(
        std::move(joint_support), std::move(joint_log_weights));
    for (const auto& [z, table] : *meta_tables) {
        out.meta_log_totals[z] = logsumexp(table.second);
    }
    out.meta = detail::meta_from_tables<std::vector<int>, Z>(meta_tables);
    return out;
}

/// Enumerates a K-particle filter over a finite state space model. A history
/// is the flat tuple (u indices [T x K], ancestor indices [(T-1) x K], k);
/// the output is the path read along the ancestry.
template <class S>
ProgramEnumeration<std::vector<int>, std::vector<S>> enumerate_pf(
    const StateSpaceModel<S>& ssm, const ProposalFamily<S>& proposals, std::size_t K) {
    if (ssm.states.empty()) throw Error("enumerate_pf needs a finite state space");
    const auto& states = ssm.states;
    const int n = static_cast<int>(states.size());
    const std::size_t T = ssm.T;
    const std::size_t n_u = T * K;
    const std::size_t n_a = (T - 1) * K;

    std::vector<std::pair<std::vector<int>, std::vector<S>>> joint_support;
    std::vector<double> joint_log_weights;
    auto meta_tables = std::make_shared<
        std::map<std::vector<S>, std::pair<std::vector<std::vector<int>>, std::vector<double>>>>();

    std::vector<int> digits(n_u + n_a + 1, 0);
    std::vector<int> radix(n_u + n_a + 1, n);
    for (std::size_t i = n_u; i < digits.size(); ++i) radix[i] = static_cast<int>(K);

    auto particle = [&](const std::vector<int>& d, std::size_t t, std::size_t i) -> const S& {
        return states[static_cast<std::size_t>(d[t * K + i])];
    };
    auto ancestor = [&](const std::vector<int>& d, std::size_t t, std::size_t i) {
        return static_cast<std::size_t>(d[n_u + t * K + i]);  // a^i_{t+1}, 0-based step t
    };

    do {
        std::vector<std::vector<double>> lw(T, std::vector<double>(K));
        std::vector<double> totals(T);
        double lq = 0.0;
        bool dead = false;
        for (std::size_t i = 0; i < K; ++i) {
            const S& u = particle(digits, 0, i);
            lw[0][i] = detail::pf_step_log_weight<S>(ssm, proposals, 0, u, nullptr);
            lq += proposals.initial_log_density(u);
        }
        totals[0] = logsumexp(lw[0]);
        if (lq == kNegInf || totals[0] == kNegInf) continue;
        for (std::size_t t = 1; t < T && !dead; ++t) {
            for (std::size_t i = 0; i < K; ++i) {
                std::size_t a = ancestor(digits, t - 1, i);
                const S& prev = particle(digits, t - 1, a);
                const S& u = particle(digits, t, i);
                lw[t][i] = detail::pf_step_log_weight<S>(ssm, proposals, t, u, &prev);
                lq += lw[t - 1][a] - totals[t - 1] +
                      proposals.transition_log_density(t, u, prev);
            }
            totals[t] = logsumexp(lw[t]);
            if (lq == kNegInf || totals[t] == kNegInf) dead = true;
        }
        if (dead) continue;
        const std::size_t k = static_cast<std::size_t>(digits[n_u + n_a]);
        lq += lw[T - 1][k] - totals[T - 1];
        if (lq == kNegInf) continue;

        std::vector<std::size_t> ancestry(T);
        ancestry[T - 1] = k;
        for (std::size_t t = T - 1; t-- > 0;) ancestry[t] = ancestor(digits, t, ancestry[t + 1]);
        std::vector<S> z(T);
        for (std::size_t t = 0; t < T; ++t) z[t] = particle(digits, t, ancestry[t]);

        double lm = -double(T) * std::log(double(K));
        for (std::size_t i = 0; i < K; ++i) {
            if (i == ancestry[0]) continue;
            lm += proposals.initial_log_density(particle(digits, 0, i));
        }
        for (std::size_t t = 1; t < T; ++t) {
            for (std::size_t i = 0; i < K; ++i) {
                if (i == ancestry[t]) continue;
                std::size_t a = ancestor(digits, t - 1, i);
                lm += lw[t - 1][a] - totals[t - 1] +
                      proposals.transition_log_density(t, particle(digits, t, i),
                                                       particle(digits, t - 1, a));
            }
        }
        joint_support.emplace_back(digits, z);
        joint_log_weights.push_back(lq);
        if (lm != kNegInf) {
            auto& table = (*meta_tables)[z];
            table.first.push_back(digits);
            table.second.push_back(lm);
        }
    } while (next_tuple(digits, radix));

    ProgramEnumeration<std::vector<int>, std::vector<S>> out;
    out.inference.joint =
        FiniteDistribution<std::pair<std::vector<int>, std::vector<S>>>::from_log_weights(
            std::move(joint_support), std::move(joint_log_weights));
    for (const auto& [z, table] : *meta_tables) {
        out.meta_log_totals[z] = logsumexp(table.second);
    }
    out.meta = detail::meta_from_tables<std::vector<int>, std::vector<S>>(meta_tables);
    return out;
}

/// Enumerates a sequential detailed-balance chain whose kernels are all
/// enumerable over a shared support. A history is the tuple of support
/// indices of u_0 .. u_{T-1}.
template <class S>
ProgramEnumeration<std::vector<int>, S> enumerate_seqdb(
    const TargetSequence<S>& targets, const std::vector<TransitionKernel<S>>& kernels) {
    const std::size_t T = targets.num_steps();
    detail::require_kernel_targets(targets, kernels);
    for (const auto& k : kernels) {
        if (!k.enumerable() || !k.reverse_log_transition) {
            throw Error("enumerate_seqdb needs enumerable kernels with reversals");
        }
    }
    const auto& sup = kernels.front().support;
    const int n = static_cast<int>(sup.size());

    std::vector<double> log_p0(sup.size());
    for (std::size_t i = 0; i < sup.size(); ++i) log_p0[i] = targets.log_targets[0](sup[i]);
    {
        double total = logsumexp(log_p0);
        if (total == kNegInf) throw SupportViolation("initial target has no mass on the support");
        for (double& lp : log_p0) lp -= total;
    }

    std::vector<std::pair<std::vector<int>, S>> joint_support;
    std::vector<double> joint_log_weights;
    auto meta_tables = std::make_shared<
        std::map<S, std::pair<std::vector<std::vector<int>>, std::vector<double>>>>();

    std::vector<int> digits(T + 1, 0);  // u_0 .. u_{T-1}, z
    std::vector<int> radix(T + 1, n);
    do {
        auto at = [&](std::size_t i) -> const S& {
            return sup[static_cast<std::size_t>(digits[i])];
        };
        double lq = log_p0[static_cast<std::size_t>(digits[0])];
        for (std::size_t t = 1; t < T && lq != kNegInf; ++t) {
            lq += kernels[t - 1].log_transition(at(t - 1), at(t));
        }
        if (lq != kNegInf) lq += kernels[T - 1].log_transition(at(T - 1), at(T));
        if (lq == kNegInf) continue;

        const S& z = at(T);
        double lm = kernels[T - 1].reverse_log_transition(z, at(T - 1));
        for (std::size_t t = T - 1; t-- > 0 && lm != kNegInf;) {
            lm += kernels[t].reverse_log_transition(at(t + 1), at(t));
        }

        std::vector<int> y(digits.begin(), digits.begin() + static_cast<long>(T));
        joint_support.emplace_back(y, z);
        joint_log_weights.push_back(lq);
        if (lm != kNegInf) {
            auto& table = (*meta_tables)[z];
            table.first.push_back(std::move(y));
            table.second.push_back(lm);
        }
    } while (next_tuple(digits, radix));

    ProgramEnumeration<std::vector<int>, S> out;
    out.inference.joint = FiniteDistribution<std::pair<std::vector<int>, S>>::from_log_weights(
        std::move(joint_support), std::move(joint_log_weights));
    for (const auto& [z, table] : *meta_tables) {
        out.meta_log_totals[z] = logsumexp(table.second);
    }
    out.meta = detail::meta_from_tables<std::vector<int>, S>(meta_tables);
    return out;
}

/// All length-T paths of a finite state space model.
template <class S>
std::vector<std::vector<S>> all_paths(const StateSpaceModel<S>& ssm) {
    if (ssm.states.empty()) throw Error("all_paths needs a finite state space");
    std::vector<std::vector<S>> paths;
    std::vector<int> digits(ssm.T, 0);
    std::vector<int> radix(ssm.T, static_cast<int>(ssm.states.size()));
    do {
        std::vector<S> path(ssm.T);
        for (std::size_t t = 0; t < ssm.T; ++t) {
            path[t] = ssm.states[static_cast<std::size_t>(digits[t])];
        }
        paths.push_back(std::move(path));
    } while (next_tuple(digits, radix));
    return paths;
}

/// Wraps a finite state space model as a latent-path model whose data is
/// already folded into the observation densities.
template <class S>
ModelProgram<std::vector<S>> ssm_model_program(const StateSpaceModel<S>& ssm) {
    if (ssm.states.empty()) throw Error("ssm_model_program needs a finite state space");
    ModelProgram<std::vector<S>> model;
    StateSpaceModel<S> m = ssm;
    model.latent_support = all_paths(ssm);
    model.log_joint = [m](const std::vector<S>& z, const Dataset&) { return ssm_log_joint(m, z); };
    model.log_prior = [m](const std::vector<S>& z) {
        if (z.size() != m.T) return kNegInf;
        double acc = m.initial_log_density(z[0]);
        for (std::size_t t = 1; t < m.T; ++t) acc += m.transition_log_density(z[t], z[t - 1]);
        return acc;
    };
    model.sample_prior = [m](Rng& rng) {
        std::vector<S> z(m.T);
        std::vector<double> lw(m.states.size());
        for (std::size_t i = 0; i < m.states.size(); ++i) {
            lw[i] = m.initial_log_density(m.states[i]);
        }
        z[0] = m.states[sample_categorical_log(lw, rng)];
        for (std::size_t t = 1; t < m.T; ++t) {
            for (std::size_t i = 0; i < m.states.size(); ++i) {
                lw[i] = m.transition_log_density(m.states[i], z[t - 1]);
            }
            z[t] = m.states[sample_categorical_log(lw, rng)];
        }
        return z;
    };
    return model;
}

/// Exact posterior over paths of a finite state space model.
template <class S>
FiniteDistribution<std::vector<S>> ssm_exact_posterior(const StateSpaceModel<S>& ssm) {
    auto paths = all_paths(ssm);
    std::vector<double> lw;
    lw.reserve(paths.size());
    for (const auto& path : paths) lw.push_back(ssm_log_joint(ssm, path));
    return FiniteDistribution<std::vector<S>>::from_log_weights(std::move(paths), std::move(lw));
}

}  // namespace subjdiv
