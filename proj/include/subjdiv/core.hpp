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

// Subjective divergence estimation: the bound is the difference between the
// expected log estimated weight under a reference sampler and under the
// inference program itself, where the weight of an output z is estimated from
// a single inference execution history y via a meta-inference density m(y;z).

#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <future>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "subjdiv/errors.hpp"
#include "subjdiv/numeric.hpp"
#include "subjdiv/rng.hpp"

namespace subjdiv {

/// Observed data. `ordering` fixes the observation order used by
/// sequential-observation target sequences; `active` restricts the dataset to
/// the first `active` entries of that ordering (a partial posterior's data).
struct Dataset {
    std::vector<double> observations;
    std::vector<std::size_t> ordering;
    std::size_t active = 0;

    Dataset() = default;
    explicit Dataset(std::vector<double> obs) : observations(std::move(obs)) {
        ordering.resize(observations.size());
        for (std::size_t i = 0; i < ordering.size(); ++i) ordering[i] = i;
        active = observations.size();
        validate();
    }
    Dataset(std::vector<double> obs, std::vector<std::size_t> order)
        : observations(std::move(obs)), ordering(std::move(order)), active(observations.size()) {
        validate();
    }

    Dataset prefix(std::size_t n) const {
        Dataset d = *this;
        d.active = n;
        return d;
    }

    std::size_t size() const { return observations.size(); }

    void validate() const {
        if (observations.empty()) throw Error("Dataset must be non-empty");
        if (ordering.size() != observations.size()) {
            throw Error("Dataset ordering length mismatch");
        }
        std::vector<bool> seen(ordering.size(), false);
        for (std::size_t i : ordering) {
            if (i >= ordering.size() || seen[i]) {
                throw Error("Dataset ordering is not a permutation");
            }
            seen[i] = true;
        }
        if (active > observations.size()) throw Error("Dataset active count out of range");
    }
};

/// A probabilistic model: prior sampler plus evaluable log joint density
/// log p(z, x). Fixes the posterior target once a dataset is supplied.
template <class Z>
struct ModelProgram {
    std::function<Z(Rng&)> sample_prior;
    std::function<double(const Z&, const Dataset&)> log_joint;
    // Evaluable prior density; required by likelihood-weighting proposals and
    // sequential-observation target sequences.
    std::function<double(const Z&)> log_prior;
    // Present when the latent space is finite; enables exact enumeration.
    std::vector<Z> latent_support;
};

/// History-producing sampler with evaluable joint density q(y, z; x*).
template <class Y, class Z>
struct InferenceProgram {
    std::function<std::pair<Y, Z>(const Dataset&, Rng&)> run;
    std::function<double(const Y&, const Z&, const Dataset&)> log_joint_density;
};

/// History-reconstructing sampler with evaluable density m(y; z, x*).
template <class Y, class Z>
struct MetaInferenceProgram {
    std::function<Y(const Z&, const Dataset&, Rng&)> run;
    std::function<double(const Y&, const Z&, const Dataset&)> log_density;
};

/// Inference whose output density q(z; x*) is exactly evaluable; no
/// meta-inference is needed.
template <class Z>
struct AssessableInference {
    std::function<Z(const Dataset&, Rng&)> sample;
    std::function<double(const Z&, const Dataset&)> log_density;
};

/// Gold-standard sampler approximating the posterior. `oracle_flag` is a
/// subjective claim that the sample distribution equals p(z | x*).
template <class Z>
struct ReferenceProgram {
    std::function<Z(const Dataset&, Rng&)> sample;
    bool oracle_flag = false;
};

struct StageTimings {
    double reference_ms = 0.0;
    double meta_ms = 0.0;
    double inference_ms = 0.0;
    double weight_ms = 0.0;
};

struct DivergenceEstimate {
    double estimate = 0.0;   // nats
    double std_error = 0.0;  // nats
    int n_reference = 0;
    int n_inference = 0;
    std::vector<double> ref_log_weights;
    std::vector<double> inf_log_weights;
    StageTimings timings;
};

namespace detail {

inline void require_finite(double value, const char* what) {
    if (!std::isfinite(value)) {
        throw SupportViolation(std::string(what) + " is not finite (" +
                               std::to_string(value) + ")");
    }
}

inline double elapsed_ms(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
        .count();
}

}  // namespace detail

/// log w_hat_y(z) = log p(z, x*) + log m(y; z, x*) - log q(y, z; x*).
/// Throws SupportViolation if any of the three log densities is -inf.
template <class Y, class Z>
double log_weight_estimate(const ModelProgram<Z>& model, const Dataset& data, const Z& z,
                           const Y& y, const InferenceProgram<Y, Z>& inference,
                           const MetaInferenceProgram<Y, Z>& meta) {
    double lp = model.log_joint(z, data);
    detail::require_finite(lp, "log p(z, x*)");
    double lm = meta.log_density(y, z, data);
    detail::require_finite(lm, "log m(y; z, x*)");
    double lq = inference.log_joint_density(y, z, data);
    detail::require_finite(lq, "log q(y, z; x*)");
    return lp + lm - lq;
}

/// The sampling/weighting surface shared by every estimator variant. The
/// general estimator, the assessable estimator, and the fast-weight sequential
/// and particle-filter paths all reduce to this shape.
template <class Y, class Z>
struct EstimationSetup {
    std::function<Z(Rng&)> sample_reference;
    std::function<Y(const Z&, Rng&)> run_meta;
    std::function<std::pair<Y, Z>(Rng&)> run_inference;
    std::function<double(const Y&, const Z&)> log_weight;
};

/// Core estimation loop. Replicate i on either branch uses the stream derived
/// from (seed, branch tag, i), so results are identical for any thread count.
template <class Y, class Z>
DivergenceEstimate estimate_divergence(const EstimationSetup<Y, Z>& setup, int n_ref, int n_inf,
                                       std::uint64_t seed, int threads = 1) {
    if (n_ref < 2 || n_inf < 2) {
        throw InsufficientSamples("need N >= 2 and M >= 2 replicates, got N=" +
                                  std::to_string(n_ref) + " M=" + std::to_string(n_inf));
    }

    DivergenceEstimate out;
    out.n_reference = n_ref;
    out.n_inference = n_inf;
    out.ref_log_weights.resize(n_ref);
    out.inf_log_weights.resize(n_inf);

    auto ref_replicate = [&](int i, StageTimings& t) {
        Rng rng = make_stream(seed, stream_tag::kReference, static_cast<std::uint64_t>(i));
        try {
            auto t0 = std::chrono::steady_clock::now();
            Z z = setup.sample_reference(rng);
            t.reference_ms += detail::elapsed_ms(t0);
            t0 = std::chrono::steady_clock::now();
            Y y = setup.run_meta(z, rng);
            t.meta_ms += detail::elapsed_ms(t0);
            t0 = std::chrono::steady_clock::now();
            out.ref_log_weights[i] = setup.log_weight(y, z);
            t.weight_ms += detail::elapsed_ms(t0);
        } catch (const SupportViolation& e) {
            throw SupportViolation("reference replicate " + std::to_string(i) + ": " + e.what());
        }
    };
    auto inf_replicate = [&](int j, StageTimings& t) {
        Rng rng = make_stream(seed, stream_tag::kInference, static_cast<std::uint64_t>(j));
        try {
            auto t0 = std::chrono::steady_clock::now();
            auto [y, z] = setup.run_inference(rng);
            t.inference_ms += detail::elapsed_ms(t0);
            t0 = std::chrono::steady_clock::now();
            out.inf_log_weights[j] = setup.log_weight(y, z);
            t.weight_ms += detail::elapsed_ms(t0);
        } catch (const SupportViolation& e) {
            throw SupportViolation("inference replicate " + std::to_string(j) + ": " + e.what());
        }
    };

    if (threads <= 1) {
        for (int i = 0; i < n_ref; ++i) ref_replicate(i, out.timings);
        for (int j = 0; j < n_inf; ++j) inf_replicate(j, out.timings);
    } else {
        const int total = n_ref + n_inf;
        std::vector<StageTimings> per_thread(threads);
        std::vector<std::future<void>> futures;
        futures.reserve(threads);
        for (int t = 0; t < threads; ++t) {
            futures.push_back(std::async(std::launch::async, [&, t]() {
                for (int k = t; k < total; k += threads) {
                    if (k < n_ref) {
                        ref_replicate(k, per_thread[t]);
                    } else {
                        inf_replicate(k - n_ref, per_thread[t]);
                    }
                }
            }));
        }
        for (auto& f : futures) f.get();  // rethrows replicate errors
        for (const auto& t : per_thread) {
            out.timings.reference_ms += t.reference_ms;
            out.timings.meta_ms += t.meta_ms;
            out.timings.inference_ms += t.inference_ms;
            out.timings.weight_ms += t.weight_ms;
        }
    }

    auto [ref_mean, ref_se] = summarize_log_weights(out.ref_log_weights);
    auto [inf_mean, inf_se] = summarize_log_weights(out.inf_log_weights);
    out.estimate = ref_mean - inf_mean;
    out.std_error = std::sqrt(ref_se * ref_se + inf_se * inf_se);
    return out;
}

/// Subjective divergence estimation for general inference programs.
/// Reference branch: z ~ r, y ~ m(.; z) (single-sample importance-sampling
/// marginal estimate). Inference branch: (y, z) ~ q jointly (single-sample
/// harmonic-mean estimate).
template <class Y, class Z>
DivergenceEstimate estimate_subjective_divergence_general(
    const ModelProgram<Z>& model, const Dataset& data, const InferenceProgram<Y, Z>& inference,
    const MetaInferenceProgram<Y, Z>& meta, const ReferenceProgram<Z>& reference, int n_ref,
    int n_inf, std::uint64_t seed, int threads = 1) {
    EstimationSetup<Y, Z> setup{
        [&](Rng& rng) { return reference.sample(data, rng); },
        [&](const Z& z, Rng& rng) { return meta.run(z, data, rng); },
        [&](Rng& rng) { return inference.run(data, rng); },
        [&](const Y& y, const Z& z) {
            return log_weight_estimate(model, data, z, y, inference, meta);
        },
    };
    return estimate_divergence(setup, n_ref, n_inf, seed, threads);
}

/// Subjective divergence estimation for assessable inference programs: the
/// weight is p(z, x*) / q(z; x*) exactly on both branches.
template <class Z>
DivergenceEstimate estimate_subjective_divergence_assessable(
    const ModelProgram<Z>& model, const Dataset& data, const AssessableInference<Z>& q,
    const ReferenceProgram<Z>& reference, int n_ref, int n_inf, std::uint64_t seed,
    int threads = 1) {
    EstimationSetup<std::monostate, Z> setup{
        [&](Rng& rng) { return reference.sample(data, rng); },
        [](const Z&, Rng&) { return std::monostate{}; },
        [&](Rng& rng) { return std::pair<std::monostate, Z>{{}, q.sample(data, rng)}; },
        [&](const std::monostate&, const Z& z) {
            double lp = model.log_joint(z, data);
            detail::require_finite(lp, "log p(z, x*)");
            double lq = q.log_density(z, data);
            detail::require_finite(lq, "log q(z; x*)");
            return lp - lq;
        },
    };
    return estimate_divergence(setup, n_ref, n_inf, seed, threads);
}

}  // namespace subjdiv
