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

// Brute-force enumeration oracles over finite latent/history spaces. All
// summation is exact log-space arithmetic; no sampling happens here.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <utility>
#include <vector>

#include "subjdiv/core.hpp"
#include "subjdiv/errors.hpp"
#include "subjdiv/numeric.hpp"

namespace subjdiv {

/// A probability distribution over a finite, canonically ordered support.
template <class V>
class FiniteDistribution {
public:
    FiniteDistribution() = default;

    /// Atoms are sorted by value; log probabilities must sum to one
    /// (logsumexp within 1e-12).
    FiniteDistribution(std::vector<V> support, std::vector<double> log_probs) {
        init(std::move(support), std::move(log_probs));
        double total = logsumexp(log_probs_);
        if (std::abs(total) > 1e-12) {
            throw Error("FiniteDistribution not normalized, logsumexp = " + std::to_string(total));
        }
    }

    /// Builds a distribution from unnormalized log weights by exact
    /// renormalization.
    static FiniteDistribution from_log_weights(std::vector<V> support,
                                               std::vector<double> log_weights) {
        FiniteDistribution d;
        d.init(std::move(support), std::move(log_weights));
        double total = logsumexp(d.log_probs_);
        if (total == kNegInf) throw SupportViolation("all atoms carry zero mass");
        for (double& lp : d.log_probs_) lp -= total;
        return d;
    }

    std::size_t size() const { return support_.size(); }
    const std::vector<V>& support() const { return support_; }
    const std::vector<double>& log_probs() const { return log_probs_; }

    bool contains(const V& v) const {
        auto it = std::lower_bound(support_.begin(), support_.end(), v);
        return it != support_.end() && *it == v;
    }

    double log_prob(const V& v) const {
        auto it = std::lower_bound(support_.begin(), support_.end(), v);
        if (it == support_.end() || !(*it == v)) {
            throw SupportMismatch("value not in distribution support");
        }
        return log_probs_[static_cast<std::size_t>(it - support_.begin())];
    }

    double log_prob_or(const V& v, double fallback) const {
        auto it = std::lower_bound(support_.begin(), support_.end(), v);
        if (it == support_.end() || !(*it == v)) return fallback;
        return log_probs_[static_cast<std::size_t>(it - support_.begin())];
    }

    V sample(Rng& rng) const {
        return support_[sample_categorical_log(log_probs_, rng)];
    }

private:
    void init(std::vector<V> support, std::vector<double> log_probs) {
        if (support.size() != log_probs.size()) {
            throw Error("support/log_probs length mismatch");
        }
        if (support.empty()) throw Error("empty support");
        std::vector<std::size_t> order(support.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return support[a] < support[b]; });
        support_.reserve(support.size());
        log_probs_.reserve(log_probs.size());
        for (std::size_t i : order) {
            if (!support_.empty() && support_.back() == support[i]) {
                throw Error("duplicate support value");
            }
            support_.push_back(std::move(support[i]));
            log_probs_.push_back(log_probs[i]);
        }
    }

    std::vector<V> support_;
    std::vector<double> log_probs_;
};

namespace detail {

template <class V>
void require_equal_supports(const FiniteDistribution<V>& p, const FiniteDistribution<V>& q) {
    if (p.support() != q.support()) {
        throw SupportMismatch("distributions have different supports");
    }
}

}  // namespace detail

/// KL(p || q) = sum_v p(v) (log p(v) - log q(v)). Atoms where p has positive
/// mass but q has none make the divergence infinite; that is reported as a
/// SupportMismatch to keep Gibbs-inequality properties clean.
template <class V>
double exact_kl(const FiniteDistribution<V>& p, const FiniteDistribution<V>& q) {
    detail::require_equal_supports(p, q);
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        double lp = p.log_probs()[i];
        if (lp == kNegInf) continue;
        double lq = q.log_probs()[i];
        if (lq == kNegInf) throw SupportMismatch("q has zero mass where p is positive");
        acc += std::exp(lp) * (lp - lq);
    }
    return acc;
}

template <class V>
double exact_symmetrized_kl(const FiniteDistribution<V>& p, const FiniteDistribution<V>& q) {
    return exact_kl(p, q) + exact_kl(q, p);
}

/// Pearson chi-square divergence: sum_v p(v) ((q(v)/p(v))^2 - 1).
template <class V>
double chi_square_divergence(const FiniteDistribution<V>& p, const FiniteDistribution<V>& q) {
    detail::require_equal_supports(p, q);
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        double lp = p.log_probs()[i];
        double lq = q.log_probs()[i];
        if (lp == kNegInf) {
            if (lq != kNegInf) throw SupportMismatch("q has mass where p is zero");
            continue;
        }
        double ratio = std::exp(lq - lp);
        acc += std::exp(lp) * (ratio * ratio - 1.0);
    }
    return acc;
}

/// An inference program whose joint distribution over (history, output) pairs
/// has been fully enumerated.
template <class Y, class Z>
struct EnumerableInference {
    FiniteDistribution<std::pair<Y, Z>> joint;
};

/// Enumerated meta-inference: z -> the distribution m(. ; z) over histories.
template <class Y, class Z>
using EnumerableMeta = std::function<FiniteDistribution<Y>(const Z&)>;

/// Exact output marginal q(z; x*) of an enumerated inference program.
template <class Y, class Z>
FiniteDistribution<Z> exact_marginal_output(const EnumerableInference<Y, Z>& inf) {
    std::map<Z, std::vector<double>> by_output;
    for (std::size_t i = 0; i < inf.joint.size(); ++i) {
        by_output[inf.joint.support()[i].second].push_back(inf.joint.log_probs()[i]);
    }
    std::vector<Z> support;
    std::vector<double> log_probs;
    for (auto& [z, terms] : by_output) {
        support.push_back(z);
        log_probs.push_back(logsumexp(terms));
    }
    return FiniteDistribution<Z>(std::move(support), std::move(log_probs));
}

/// Exact conditional q(y | z; x*) for a fixed output z.
template <class Y, class Z>
FiniteDistribution<Y> exact_conditional_histories(const EnumerableInference<Y, Z>& inf,
                                                  const Z& z) {
    std::vector<Y> support;
    std::vector<double> log_weights;
    for (std::size_t i = 0; i < inf.joint.size(); ++i) {
        const auto& pair = inf.joint.support()[i];
        if (pair.second == z) {
            support.push_back(pair.first);
            log_weights.push_back(inf.joint.log_probs()[i]);
        }
    }
    if (support.empty()) throw SupportMismatch("output has zero mass under q(z; x*)");
    return FiniteDistribution<Y>::from_log_weights(std::move(support), std::move(log_weights));
}

/// Exact expectation of the subjective divergence estimator:
/// E_{z~ref} E_{y~m(.;z)}[log w_hat] - E_{(y,z)~q}[log w_hat].
template <class Y, class Z>
double exact_subjective_divergence_expectation(const ModelProgram<Z>& model, const Dataset& data,
                                               const EnumerableInference<Y, Z>& inf,
                                               const EnumerableMeta<Y, Z>& meta,
                                               const FiniteDistribution<Z>& reference) {
    auto log_weight = [&](const FiniteDistribution<Y>& m, const Y& y, const Z& z) {
        double lq = inf.joint.log_prob_or({y, z}, kNegInf);
        double lm = m.log_prob_or(y, kNegInf);
        double lp = model.log_joint(z, data);
        if (lq == kNegInf || lm == kNegInf || lp == kNegInf) {
            throw SupportViolation("zero density inside exact divergence expectation");
        }
        return lp + lm - lq;
    };

    // Reference branch: z ~ reference, y ~ m(.; z).
    double term_ref = 0.0;
    std::map<Z, FiniteDistribution<Y>> meta_cache;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        const Z& z = reference.support()[i];
        double lz = reference.log_probs()[i];
        if (lz == kNegInf) continue;
        auto [it, inserted] = meta_cache.try_emplace(z, FiniteDistribution<Y>());
        if (inserted) it->second = meta(z);
        const auto& m = it->second;
        double inner = 0.0;
        for (std::size_t k = 0; k < m.size(); ++k) {
            double lmy = m.log_probs()[k];
            if (lmy == kNegInf) continue;
            inner += std::exp(lmy) * log_weight(m, m.support()[k], z);
        }
        term_ref += std::exp(lz) * inner;
    }

    // Inference branch: (y, z) ~ q jointly.
    double term_inf = 0.0;
    for (std::size_t i = 0; i < inf.joint.size(); ++i) {
        double lyz = inf.joint.log_probs()[i];
        if (lyz == kNegInf) continue;
        const auto& [y, z] = inf.joint.support()[i];
        auto [it, inserted] = meta_cache.try_emplace(z, FiniteDistribution<Y>());
        if (inserted) it->second = meta(z);
        term_inf += std::exp(lyz) * log_weight(it->second, y, z);
    }

    return term_ref - term_inf;
}

namespace detail {

// KL(a || b) where b is only available via lookup; atoms of a outside b's
// support are a SupportViolation.
template <class Y>
double kl_against(const FiniteDistribution<Y>& a,
                  const std::function<double(const Y&)>& log_b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double la = a.log_probs()[i];
        if (la == kNegInf) continue;
        double lb = log_b(a.support()[i]);
        if (lb == kNegInf) throw SupportViolation("zero density where mass exists");
        acc += std::exp(la) * (la - lb);
    }
    return acc;
}

}  // namespace detail

/// Symmetrized conditional relative entropy between the meta-inference
/// distribution and the true conditional on histories given output:
/// E_{z~q}[KL(q(y|z) || m(y;z))] + E_{z~posterior}[KL(m(y;z) || q(y|z))].
template <class Y, class Z>
double exact_metainference_gap(const EnumerableInference<Y, Z>& inf,
                               const EnumerableMeta<Y, Z>& meta,
                               const FiniteDistribution<Z>& posterior) {
    FiniteDistribution<Z> q_marginal = exact_marginal_output(inf);

    double forward = 0.0;  // E_{z~q} KL(q(y|z) || m)
    for (std::size_t i = 0; i < q_marginal.size(); ++i) {
        double lz = q_marginal.log_probs()[i];
        if (lz == kNegInf) continue;
        const Z& z = q_marginal.support()[i];
        auto cond = exact_conditional_histories(inf, z);
        auto m = meta(z);
        forward += std::exp(lz) * detail::kl_against<Y>(cond, [&](const Y& y) {
            return m.log_prob_or(y, kNegInf);
        });
    }

    double backward = 0.0;  // E_{z~posterior} KL(m || q(y|z))
    for (std::size_t i = 0; i < posterior.size(); ++i) {
        double lz = posterior.log_probs()[i];
        if (lz == kNegInf) continue;
        const Z& z = posterior.support()[i];
        auto m = meta(z);
        auto cond = exact_conditional_histories(inf, z);
        backward += std::exp(lz) * detail::kl_against<Y>(m, [&](const Y& y) {
            return cond.log_prob_or(y, kNegInf);
        });
    }

    return forward + backward;
}

/// Exact log p(x*) for a model with a finite latent support.
template <class Z>
double exact_log_marginal_likelihood(const ModelProgram<Z>& model, const Dataset& data) {
    if (model.latent_support.empty()) {
        throw Error("exact_log_marginal_likelihood needs a finite latent support");
    }
    std::vector<double> terms;
    terms.reserve(model.latent_support.size());
    for (const Z& z : model.latent_support) {
        terms.push_back(model.log_joint(z, data));
    }
    double out = logsumexp(terms);
    if (out == kNegInf) throw ZeroEvidence("dataset has zero probability under the model");
    return out;
}

/// Exact posterior p(z | x*) for a model with a finite latent support.
template <class Z>
FiniteDistribution<Z> exact_posterior(const ModelProgram<Z>& model, const Dataset& data) {
    if (model.latent_support.empty()) {
        throw Error("exact_posterior needs a finite latent support");
    }
    std::vector<double> log_weights;
    log_weights.reserve(model.latent_support.size());
    for (const Z& z : model.latent_support) {
        log_weights.push_back(model.log_joint(z, data));
    }
    return FiniteDistribution<Z>::from_log_weights(model.latent_support, std::move(log_weights));
}

// --- Per-output diagnostics of the single-sample marginal density
// --- estimators; these tie their biases and variances to KL and chi-square
// --- divergences on enumerable fixtures.

/// E[q_hat_IS(z)] = sum_y m(y;z) q(y,z)/m(y;z), in log space.
template <class Y, class Z>
double log_expected_qis(const EnumerableInference<Y, Z>& inf, const FiniteDistribution<Y>& m,
                        const Z& z) {
    std::vector<double> terms;
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (m.log_probs()[i] == kNegInf) continue;
        terms.push_back(inf.joint.log_prob_or({m.support()[i], z}, kNegInf));
    }
    return logsumexp(terms);
}

/// E[1/q_hat_HM(z)] = sum_y q(y|z) m(y;z)/q(y,z), in log space.
template <class Y, class Z>
double log_expected_qhm_reciprocal(const EnumerableInference<Y, Z>& inf,
                                   const FiniteDistribution<Y>& m, const Z& z) {
    auto cond = exact_conditional_histories(inf, z);
    std::vector<double> terms;
    for (std::size_t i = 0; i < cond.size(); ++i) {
        double lc = cond.log_probs()[i];
        if (lc == kNegInf) continue;
        const Y& y = cond.support()[i];
        double lm = m.log_prob_or(y, kNegInf);
        double lq = inf.joint.log_prob_or({y, z}, kNegInf);
        if (lm == kNegInf) throw SupportViolation("meta has zero mass on a produced history");
        terms.push_back(lc + lm - lq);
    }
    return logsumexp(terms);
}

/// E[log q_hat_IS(z)] = sum_y m(y;z) log(q(y,z)/m(y;z)).
template <class Y, class Z>
double expected_log_qis(const EnumerableInference<Y, Z>& inf, const FiniteDistribution<Y>& m,
                        const Z& z) {
    double acc = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        double lm = m.log_probs()[i];
        if (lm == kNegInf) continue;
        double lq = inf.joint.log_prob_or({m.support()[i], z}, kNegInf);
        if (lq == kNegInf) throw SupportViolation("q has zero mass on a meta history");
        acc += std::exp(lm) * (lq - lm);
    }
    return acc;
}

/// E[log q_hat_HM(z)] = sum_y q(y|z) log(q(y,z)/m(y;z)).
template <class Y, class Z>
double expected_log_qhm(const EnumerableInference<Y, Z>& inf, const FiniteDistribution<Y>& m,
                        const Z& z) {
    auto cond = exact_conditional_histories(inf, z);
    double acc = 0.0;
    for (std::size_t i = 0; i < cond.size(); ++i) {
        double lc = cond.log_probs()[i];
        if (lc == kNegInf) continue;
        const Y& y = cond.support()[i];
        double lm = m.log_prob_or(y, kNegInf);
        double lq = inf.joint.log_prob_or({y, z}, kNegInf);
        if (lm == kNegInf) throw SupportViolation("meta has zero mass on a produced history");
        acc += std::exp(lc) * (lq - lm);
    }
    return acc;
}

/// Var(q_hat_IS(z)/q(z)) = sum_y m(y;z) (q(y|z)/m(y;z))^2 - 1.
template <class Y, class Z>
double variance_qis_ratio(const EnumerableInference<Y, Z>& inf, const FiniteDistribution<Y>& m,
                          const Z& z) {
    auto cond = exact_conditional_histories(inf, z);
    double acc = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        double lm = m.log_probs()[i];
        if (lm == kNegInf) continue;
        double lc = cond.log_prob_or(m.support()[i], kNegInf);
        if (lc == kNegInf) continue;
        acc += std::exp(lm) * std::exp(2.0 * (lc - lm));
    }
    return acc - 1.0;
}

}  // namespace subjdiv
