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

// Transition operators satisfying detailed balance, their composition, and an
// enumerable detailed-balance checker. Kernels carry their target by value at
// construction so the checker cannot be fooled by target drift; which sites a
// kernel touches is an explicit declaration.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "subjdiv/errors.hpp"
#include "subjdiv/exact.hpp"
#include "subjdiv/numeric.hpp"
#include "subjdiv/rng.hpp"

namespace subjdiv {

template <class S>
struct TransitionKernel {
    std::string target_id;
    std::function<double(const S&)> log_target;  // unnormalized
    std::function<S(const S&, Rng&)> step;
    // Reversal used by reversed-chain meta-inference. For a primitive
    // detailed-balance kernel this equals `step`; for a cycle the component
    // order is reversed.
    std::function<S(const S&, Rng&)> reverse_step;
    // Present for enumerable kernels only; (from, to) -> log probability.
    std::function<double(const S&, const S&)> log_transition;
    std::function<double(const S&, const S&)> reverse_log_transition;
    std::vector<S> support;                   // enumerable state space, else empty
    std::vector<std::size_t> touched_sites;   // sites the kernel may modify; empty = all

    bool enumerable() const { return static_cast<bool>(log_transition) && !support.empty(); }
};

namespace detail {

template <class S>
struct IndexedSupport {
    std::vector<S> values;
    std::map<S, std::size_t> index;
    explicit IndexedSupport(std::vector<S> v) : values(std::move(v)) {
        for (std::size_t i = 0; i < values.size(); ++i) index[values[i]] = i;
    }
};

// Dense linear-space transition matrix of an enumerable kernel.
template <class S>
std::vector<std::vector<double>> transition_matrix(
    const std::function<double(const S&, const S&)>& log_k, const std::vector<S>& support) {
    const std::size_t n = support.size();
    std::vector<std::vector<double>> m(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            m[i][j] = std::exp(log_k(support[i], support[j]));
        }
    }
    return m;
}

inline std::vector<std::vector<double>> matmul(const std::vector<std::vector<double>>& a,
                                               const std::vector<std::vector<double>>& b) {
    const std::size_t n = a.size();
    std::vector<std::vector<double>> c(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < n; ++k) {
            if (a[i][k] == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) c[i][j] += a[i][k] * b[k][j];
        }
    }
    return c;
}

// Wraps a dense matrix back into a (from, to) -> log prob function.
template <class S>
std::function<double(const S&, const S&)> matrix_log_transition(
    std::vector<std::vector<double>> m, std::vector<S> support) {
    auto indexed = std::make_shared<IndexedSupport<S>>(std::move(support));
    auto mat = std::make_shared<std::vector<std::vector<double>>>(std::move(m));
    return [indexed, mat](const S& from, const S& to) {
        auto fi = indexed->index.find(from);
        auto ti = indexed->index.find(to);
        if (fi == indexed->index.end() || ti == indexed->index.end()) return kNegInf;
        double p = (*mat)[fi->second][ti->second];
        return p > 0.0 ? std::log(p) : kNegInf;
    };
}

}  // namespace detail

/// Metropolis-Hastings with an independence (resimulation) proposal.
template <class S>
TransitionKernel<S> make_mh_resimulation(std::string target_id,
                                         std::function<double(const S&)> log_target,
                                         std::function<S(Rng&)> proposal_sample,
                                         std::function<double(const S&)> proposal_log_density,
                                         std::vector<S> support = {}) {
    TransitionKernel<S> k;
    k.target_id = std::move(target_id);
    k.log_target = log_target;
    k.support = std::move(support);
    k.step = [log_target, proposal_sample, proposal_log_density](const S& state, Rng& rng) {
        double lt_cur = log_target(state);
        if (lt_cur == kNegInf) {
            throw SupportViolation("MH entered a zero-mass state");
        }
        S proposed = proposal_sample(rng);
        double log_alpha = (log_target(proposed) + proposal_log_density(state)) -
                           (lt_cur + proposal_log_density(proposed));
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        if (std::log(unif(rng)) < std::min(0.0, log_alpha)) return proposed;
        return state;
    };
    k.reverse_step = k.step;
    if (!k.support.empty()) {
        // Off-diagonal: propose then accept. Diagonal: everything else.
        auto sup = std::make_shared<std::vector<S>>(k.support);
        k.log_transition = [log_target, proposal_log_density, sup](const S& from, const S& to) {
            auto accept_prob = [&](const S& a, const S& b) {
                double la = (log_target(b) + proposal_log_density(a)) -
                            (log_target(a) + proposal_log_density(b));
                return std::min(1.0, std::exp(la));
            };
            if (!(from == to)) {
                double p = std::exp(proposal_log_density(to)) * accept_prob(from, to);
                return p > 0.0 ? std::log(p) : kNegInf;
            }
            double move_away = 0.0;
            for (const S& other : *sup) {
                if (other == from) continue;
                move_away += std::exp(proposal_log_density(other)) * accept_prob(from, other);
            }
            // Mass proposing `from` itself counts as staying.
            double stay = 1.0 - move_away;
            return stay > 0.0 ? std::log(stay) : kNegInf;
        };
        k.reverse_log_transition = k.log_transition;
    }
    return k;
}

/// Random-walk MH over continuous states: every coordinate is perturbed by an
/// independent uniform draw of the given half-width.
inline TransitionKernel<std::vector<double>> make_mh_random_walk(
    std::string target_id, std::function<double(const std::vector<double>&)> log_target,
    std::vector<double> step_scale) {
    TransitionKernel<std::vector<double>> k;
    k.target_id = std::move(target_id);
    k.log_target = log_target;
    k.step = [log_target, step_scale](const std::vector<double>& state, Rng& rng) {
        double lt_cur = log_target(state);
        if (lt_cur == kNegInf) throw SupportViolation("MH entered a zero-mass state");
        std::vector<double> proposed = state;
        std::uniform_real_distribution<double> unif(-1.0, 1.0);
        for (std::size_t i = 0; i < proposed.size(); ++i) {
            proposed[i] += step_scale[i % step_scale.size()] * unif(rng);
        }
        double log_alpha = log_target(proposed) - lt_cur;  // symmetric proposal
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        if (std::log(u01(rng)) < std::min(0.0, log_alpha)) return proposed;
        return state;
    };
    k.reverse_step = k.step;
    return k;
}

/// Discrete-lattice random-walk MH: pick a coordinate uniformly, propose +1 or
/// -1 with equal probability. Off-support proposals have zero target mass and
/// are rejected, which keeps the proposal symmetric.
inline TransitionKernel<std::vector<int>> make_mh_random_walk_lattice(
    std::string target_id, std::function<double(const std::vector<int>&)> log_target,
    std::vector<std::vector<int>> support = {}) {
    TransitionKernel<std::vector<int>> k;
    k.target_id = std::move(target_id);
    k.log_target = log_target;
    k.support = std::move(support);
    k.step = [log_target](const std::vector<int>& state, Rng& rng) {
        double lt_cur = log_target(state);
        if (lt_cur == kNegInf) throw SupportViolation("MH entered a zero-mass state");
        std::vector<int> proposed = state;
        std::uniform_int_distribution<std::size_t> coord(0, state.size() - 1);
        std::uniform_int_distribution<int> dir(0, 1);
        proposed[coord(rng)] += dir(rng) == 0 ? -1 : 1;
        double log_alpha = log_target(proposed) - lt_cur;
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        if (std::log(u01(rng)) < std::min(0.0, log_alpha)) return proposed;
        return state;
    };
    k.reverse_step = k.step;
    if (!k.support.empty()) {
        k.log_transition = [log_target](const std::vector<int>& from, const std::vector<int>& to) {
            const double d = static_cast<double>(from.size());
            if (from == to) {
                double stay = 0.0;
                std::vector<int> nbr = from;
                for (std::size_t i = 0; i < from.size(); ++i) {
                    for (int delta : {-1, 1}) {
                        nbr[i] = from[i] + delta;
                        double accept =
                            std::min(1.0, std::exp(log_target(nbr) - log_target(from)));
                        stay += (1.0 / (2.0 * d)) * (1.0 - accept);
                        nbr[i] = from[i];
                    }
                }
                return stay > 0.0 ? std::log(stay) : kNegInf;
            }
            std::size_t diff_count = 0;
            std::size_t diff_at = 0;
            for (std::size_t i = 0; i < from.size(); ++i) {
                if (from[i] != to[i]) {
                    ++diff_count;
                    diff_at = i;
                }
            }
            if (diff_count != 1 || std::abs(from[diff_at] - to[diff_at]) != 1) return kNegInf;
            double accept = std::min(1.0, std::exp(log_target(to) - log_target(from)));
            double p = (1.0 / (2.0 * d)) * accept;
            return p > 0.0 ? std::log(p) : kNegInf;
        };
        k.reverse_log_transition = k.log_transition;
    }
    return k;
}

/// Single-site Gibbs: resamples one site from its exact conditional.
inline TransitionKernel<std::vector<int>> make_gibbs_single_site(
    std::string target_id, std::function<double(const std::vector<int>&)> log_target,
    std::size_t site, std::vector<int> site_domain, std::vector<std::vector<int>> support = {}) {
    TransitionKernel<std::vector<int>> k;
    k.target_id = std::move(target_id);
    k.log_target = log_target;
    k.support = std::move(support);
    k.touched_sites = {site};
    auto conditional = [log_target, site, site_domain](const std::vector<int>& state) {
        std::vector<double> lw(site_domain.size());
        std::vector<int> probe = state;
        for (std::size_t v = 0; v < site_domain.size(); ++v) {
            probe[site] = site_domain[v];
            lw[v] = log_target(probe);
        }
        if (logsumexp(lw) == kNegInf) {
            throw EmptyConditional("all site values have zero mass at site " +
                                   std::to_string(site));
        }
        return lw;
    };
    k.step = [conditional, site, site_domain](const std::vector<int>& state, Rng& rng) {
        std::vector<double> lw = conditional(state);
        std::vector<int> next = state;
        next[site] = site_domain[sample_categorical_log(lw, rng)];
        return next;
    };
    k.reverse_step = k.step;
    if (!k.support.empty()) {
        k.log_transition = [conditional, site,
                            site_domain](const std::vector<int>& from, const std::vector<int>& to) {
            for (std::size_t i = 0; i < from.size(); ++i) {
                if (i != site && from[i] != to[i]) return kNegInf;
            }
            std::vector<double> lw = conditional(from);
            double total = logsumexp(lw);
            for (std::size_t v = 0; v < site_domain.size(); ++v) {
                if (site_domain[v] == to[site]) return lw[v] - total;
            }
            return kNegInf;
        };
        k.reverse_log_transition = k.log_transition;
    }
    return k;
}

/// A kernel that resamples its target exactly, ignoring the current state.
/// Models a perfectly mixing transition operator; k(u'; u) = p(u').
template <class S>
TransitionKernel<S> make_exact_resampler(std::string target_id,
                                         std::function<double(const S&)> log_target,
                                         std::vector<S> support) {
    std::vector<double> lw;
    lw.reserve(support.size());
    for (const S& s : support) lw.push_back(log_target(s));
    auto dist = std::make_shared<FiniteDistribution<S>>(
        FiniteDistribution<S>::from_log_weights(support, std::move(lw)));

    TransitionKernel<S> k;
    k.target_id = std::move(target_id);
    k.log_target = std::move(log_target);
    k.support = std::move(support);
    k.step = [dist](const S&, Rng& rng) { return dist->sample(rng); };
    k.reverse_step = k.step;
    k.log_transition = [dist](const S&, const S& to) { return dist->log_prob_or(to, kNegInf); };
    k.reverse_log_transition = k.log_transition;
    return k;
}

/// n consecutive applications of the same kernel. Detailed balance w.r.t. the
/// shared target is preserved.
template <class S>
TransitionKernel<S> repeat(const TransitionKernel<S>& kernel, int n) {
    if (n < 1) throw Error("repeat requires n >= 1");
    if (n == 1) return kernel;
    TransitionKernel<S> k;
    k.target_id = kernel.target_id;
    k.log_target = kernel.log_target;
    k.support = kernel.support;
    k.touched_sites = kernel.touched_sites;
    k.step = [inner = kernel.step, n](const S& state, Rng& rng) {
        S s = state;
        for (int i = 0; i < n; ++i) s = inner(s, rng);
        return s;
    };
    k.reverse_step = [inner = kernel.reverse_step, n](const S& state, Rng& rng) {
        S s = state;
        for (int i = 0; i < n; ++i) s = inner(s, rng);
        return s;
    };
    if (kernel.enumerable()) {
        auto base = detail::transition_matrix<S>(kernel.log_transition, kernel.support);
        auto acc = base;
        for (int i = 1; i < n; ++i) acc = detail::matmul(acc, base);
        k.log_transition = detail::matrix_log_transition<S>(acc, kernel.support);
        auto rbase = detail::transition_matrix<S>(kernel.reverse_log_transition, kernel.support);
        auto racc = rbase;
        for (int i = 1; i < n; ++i) racc = detail::matmul(racc, rbase);
        k.reverse_log_transition = detail::matrix_log_transition<S>(racc, kernel.support);
    }
    return k;
}

/// Applies the given kernels in order. Stationarity w.r.t. the shared target
/// is preserved; detailed balance of the composition is not guaranteed, so
/// the reversal applies the components in reverse order.
template <class S>
TransitionKernel<S> cycle(const std::vector<TransitionKernel<S>>& kernels) {
    if (kernels.empty()) throw Error("cycle requires at least one kernel");
    for (const auto& kk : kernels) {
        if (kk.target_id != kernels.front().target_id) {
            throw MixedTargets("cycle over kernels with targets '" + kernels.front().target_id +
                               "' and '" + kk.target_id + "'");
        }
    }
    TransitionKernel<S> k;
    k.target_id = kernels.front().target_id;
    k.log_target = kernels.front().log_target;
    k.support = kernels.front().support;
    for (const auto& kk : kernels) {
        for (std::size_t site : kk.touched_sites) {
            if (std::find(k.touched_sites.begin(), k.touched_sites.end(), site) ==
                k.touched_sites.end()) {
                k.touched_sites.push_back(site);
            }
        }
    }
    std::sort(k.touched_sites.begin(), k.touched_sites.end());

    auto steps = std::make_shared<std::vector<std::function<S(const S&, Rng&)>>>();
    auto rsteps = std::make_shared<std::vector<std::function<S(const S&, Rng&)>>>();
    for (const auto& kk : kernels) steps->push_back(kk.step);
    for (auto it = kernels.rbegin(); it != kernels.rend(); ++it) {
        rsteps->push_back(it->reverse_step);
    }
    k.step = [steps](const S& state, Rng& rng) {
        S s = state;
        for (const auto& f : *steps) s = f(s, rng);
        return s;
    };
    k.reverse_step = [rsteps](const S& state, Rng& rng) {
        S s = state;
        for (const auto& f : *rsteps) s = f(s, rng);
        return s;
    };

    bool all_enumerable = true;
    for (const auto& kk : kernels) all_enumerable = all_enumerable && kk.enumerable();
    if (all_enumerable) {
        auto acc = detail::transition_matrix<S>(kernels.front().log_transition, k.support);
        for (std::size_t i = 1; i < kernels.size(); ++i) {
            acc = detail::matmul(acc, detail::transition_matrix<S>(kernels[i].log_transition,
                                                                   k.support));
        }
        k.log_transition = detail::matrix_log_transition<S>(acc, k.support);
        auto racc = detail::transition_matrix<S>(kernels.back().reverse_log_transition, k.support);
        for (std::size_t i = kernels.size() - 1; i-- > 0;) {
            racc = detail::matmul(
                racc, detail::transition_matrix<S>(kernels[i].reverse_log_transition, k.support));
        }
        k.reverse_log_transition = detail::matrix_log_transition<S>(racc, k.support);
    }
    return k;
}

/// Max over state pairs of |p(u) k(u'; u) - p(u') k(u; u')|.
template <class S>
double check_detailed_balance(const TransitionKernel<S>& kernel,
                              const FiniteDistribution<S>& target) {
    if (!kernel.log_transition) throw Error("check_detailed_balance needs an enumerable kernel");
    double worst = 0.0;
    const auto& sup = target.support();
    for (std::size_t i = 0; i < sup.size(); ++i) {
        for (std::size_t j = i + 1; j < sup.size(); ++j) {
            double forward = std::exp(target.log_probs()[i]) *
                             std::exp(kernel.log_transition(sup[i], sup[j]));
            double backward = std::exp(target.log_probs()[j]) *
                              std::exp(kernel.log_transition(sup[j], sup[i]));
            worst = std::max(worst, std::abs(forward - backward));
        }
    }
    return worst;
}

/// Max over states of |sum_u' k(u'; u) - 1|.
template <class S>
double check_rows_normalized(const TransitionKernel<S>& kernel) {
    if (!kernel.enumerable()) throw Error("check_rows_normalized needs an enumerable kernel");
    double worst = 0.0;
    for (const S& from : kernel.support) {
        double row = 0.0;
        for (const S& to : kernel.support) row += std::exp(kernel.log_transition(from, to));
        worst = std::max(worst, std::abs(row - 1.0));
    }
    return worst;
}

}  // namespace subjdiv
