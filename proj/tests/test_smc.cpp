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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <vector>

#include "subjdiv/enumerate.hpp"
#include "subjdiv/exact.hpp"
#include "subjdiv/models.hpp"
#include "subjdiv/smc.hpp"

using namespace subjdiv;

namespace {

// Hand-built 2-state chain with two observed symbols.
StateSpaceModel<int> tiny_hmm(std::size_t T) {
    Hmm hmm;
    hmm.n_states = 2;
    hmm.n_obs = 2;
    hmm.initial = {0.6, 0.4};
    hmm.transition = {{0.7, 0.3}, {0.2, 0.8}};
    hmm.emission = {{0.9, 0.1}, {0.3, 0.7}};
    hmm.observations.assign(T, 0);
    for (std::size_t t = 0; t < T; ++t) hmm.observations[t] = int(t % 2);
    return hmm_state_space_model(hmm);
}

double history_log_z(const StateSpaceModel<int>& ssm, const ProposalFamily<int>& proposals,
                     const ParticleFilterHistory<int>& h) {
    auto lw = detail::recompute_log_weights(ssm, proposals, h);
    double acc = 0.0;
    for (const auto& step : lw) {
        acc += logsumexp(step) - std::log(double(step.size()));
    }
    return acc;
}

// Decodes one flat enumeration tuple into a full history (mirrors the layout
// used by the particle-filter enumeration).
ParticleFilterHistory<int> decode_history(const std::vector<int>& digits,
                                          const StateSpaceModel<int>& ssm,
                                          const ProposalFamily<int>& proposals, std::size_t K) {
    const std::size_t T = ssm.T;
    ParticleFilterHistory<int> h;
    h.particles.assign(T, std::vector<int>(K));
    h.ancestors.assign(T - 1, std::vector<std::size_t>(K));
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t i = 0; i < K; ++i) {
            h.particles[t][i] = ssm.states[std::size_t(digits[t * K + i])];
        }
    }
    for (std::size_t t = 0; t + 1 < T; ++t) {
        for (std::size_t i = 0; i < K; ++i) {
            h.ancestors[t][i] = std::size_t(digits[T * K + t * K + i]);
        }
    }
    h.final_index = std::size_t(digits[T * K + (T - 1) * K]);
    h.ancestry.assign(T, 0);
    h.ancestry[T - 1] = h.final_index;
    for (std::size_t t = T - 1; t-- > 0;) h.ancestry[t] = h.ancestors[t][h.ancestry[t + 1]];
    h.log_weights = detail::recompute_log_weights(ssm, proposals, h);
    h.log_Z_hat = history_log_z(ssm, proposals, h);
    return h;
}

std::vector<int> encode_history(const ParticleFilterHistory<int>& h,
                                const StateSpaceModel<int>& ssm) {
    const std::size_t T = h.num_steps();
    const std::size_t K = h.num_particles();
    std::vector<int> digits(T * K + (T - 1) * K + 1, 0);
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t i = 0; i < K; ++i) {
            for (std::size_t s = 0; s < ssm.states.size(); ++s) {
                if (ssm.states[s] == h.particles[t][i]) digits[t * K + i] = int(s);
            }
        }
    }
    for (std::size_t t = 0; t + 1 < T; ++t) {
        for (std::size_t i = 0; i < K; ++i) {
            digits[T * K + t * K + i] = int(h.ancestors[t][i]);
        }
    }
    digits[T * K + (T - 1) * K] = int(h.final_index);
    return digits;
}

}  // namespace

TEST_CASE("single-particle filter accumulates the path weight exactly") {
    auto ssm = tiny_hmm(4);
    auto prop = make_prior_proposals(ssm);
    Rng rng = make_stream(11, stream_tag::kInference, 0);
    auto [h, z] = run_particle_filter(ssm, prop, 1, rng);
    double manual = 0.0;
    for (std::size_t t = 0; t < 4; ++t) manual += h.log_weights[t][0];
    CHECK(h.log_Z_hat == doctest::Approx(manual).epsilon(1e-13));
    for (std::size_t t = 0; t < 4; ++t) CHECK(z[t] == h.particles[t][0]);
    CHECK(pf_log_weight_estimate(h, z, ssm) == h.log_Z_hat);
}

TEST_CASE("T=1 prior-proposal filter averages the likelihood") {
    auto fixture = toy_bernoulli_fixture();
    Rng rng = make_stream(12, stream_tag::kInference, 0);
    auto [h, z] = run_sir(fixture.model, fixture.data, 4, rng);
    double mean_lik = 0.0;
    for (int u : h.particles[0]) mean_lik += (u == 1 ? 0.8 : 0.2) / 4.0;
    CHECK(h.log_Z_hat == doctest::Approx(std::log(mean_lik)).epsilon(1e-12));
    CHECK((z == 0 || z == 1));
}

TEST_CASE("marginal likelihood estimate is exactly unbiased") {
    auto ssm = tiny_hmm(2);
    auto prop = make_prior_proposals(ssm);
    const std::size_t K = 2;
    auto prog = enumerate_pf(ssm, prop, K);
    double expected_z = 0.0;
    for (std::size_t i = 0; i < prog.inference.joint.size(); ++i) {
        double lq = prog.inference.joint.log_probs()[i];
        if (lq == kNegInf) continue;
        const auto& digits = prog.inference.joint.support()[i].first;
        auto h = decode_history(digits, ssm, prop, K);
        expected_z += std::exp(lq + h.log_Z_hat);
    }
    CHECK(expected_z == doctest::Approx(std::exp(hmm_log_evidence(ssm))).epsilon(1e-10));
}

TEST_CASE("fast and slow weight paths agree on random runs") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        auto hmm = hmm_fixture(2, 3, 4, seed);
        for (const auto& prop : {make_prior_proposals(hmm.ssm),
                                 make_conditional_proposals(hmm.ssm)}) {
            Rng rng = make_stream(seed, stream_tag::kInference, 7);
            for (int rep = 0; rep < 100; ++rep) {
                auto [h, z] = run_particle_filter(hmm.ssm, prop, 3, rng);
                double fast = pf_log_weight_estimate(h, z, hmm.ssm);
                double slow = pf_slow_log_weight(hmm.ssm, prop, h, z);
                CHECK(std::abs(fast - slow) <= 1e-9);

                auto m = run_csmc_metainference(hmm.ssm, prop, 3, z, rng);
                double mfast = pf_log_weight_estimate(m, z, hmm.ssm);
                double mslow = pf_slow_log_weight(hmm.ssm, prop, m, z);
                CHECK(std::abs(mfast - mslow) <= 1e-9);
            }
        }
    }
}

TEST_CASE("single-particle CSMC is the retained path verbatim") {
    auto ssm = tiny_hmm(3);
    auto prop = make_prior_proposals(ssm);
    std::vector<int> z{0, 1, 1};
    Rng rng = make_stream(13, stream_tag::kMeta, 0);
    auto h = run_csmc_metainference(ssm, prop, 1, z, rng);
    for (std::size_t t = 0; t < 3; ++t) {
        CHECK(h.particles[t][0] == z[t]);
        CHECK(h.ancestry[t] == 0);
    }
    CHECK(h.final_index == 0);
}

TEST_CASE("CSMC clamps the retained path into its drawn slots") {
    auto ssm = tiny_hmm(2);
    auto prop = make_prior_proposals(ssm);
    std::vector<int> z{1, 0};
    Rng rng = make_stream(14, stream_tag::kMeta, 0);
    for (int rep = 0; rep < 50; ++rep) {
        auto h = run_csmc_metainference(ssm, prop, 3, z, rng);
        CHECK(h.particles[0][h.ancestry[0]] == z[0]);
        CHECK(h.particles[1][h.ancestry[1]] == z[1]);
        CHECK(h.ancestors[0][h.ancestry[1]] == h.ancestry[0]);
        CHECK_NOTHROW(detail::check_history_consistency(h, z));
    }
}

TEST_CASE("CSMC sampler matches the enumerated meta-inference density") {
    auto ssm = tiny_hmm(2);
    auto prop = make_prior_proposals(ssm);
    const std::size_t K = 2;
    auto prog = enumerate_pf(ssm, prop, K);
    std::vector<int> z{0, 1};
    auto m = prog.meta(z);
    CHECK(prog.meta_log_totals.at(z) == doctest::Approx(0.0).epsilon(1e-10));

    Rng rng = make_stream(15, stream_tag::kMeta, 0);
    const int n = 50000;
    std::map<std::vector<int>, int> counts;
    for (int i = 0; i < n; ++i) {
        auto h = run_csmc_metainference(ssm, prop, K, z, rng);
        counts[encode_history(h, ssm)]++;
    }
    double checked_mass = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        double p = std::exp(m.log_probs()[i]);
        if (p < 0.01) continue;
        auto it = counts.find(m.support()[i]);
        double freq = it == counts.end() ? 0.0 : double(it->second) / n;
        CHECK(freq == doctest::Approx(p).epsilon(0.08));
        checked_mass += p;
    }
    CHECK(checked_mass > 0.5);
    // Every sampled history must be in the enumerated support.
    for (const auto& [digits, c] : counts) CHECK(m.contains(digits));
}

TEST_CASE("corrupted histories are rejected") {
    auto ssm = tiny_hmm(3);
    auto prop = make_prior_proposals(ssm);
    Rng rng = make_stream(16, stream_tag::kInference, 0);
    auto [h, z] = run_particle_filter(ssm, prop, 2, rng);
    CHECK_NOTHROW(pf_log_weight_estimate(h, z, ssm));

    auto broken = h;
    broken.ancestry[0] = 1 - broken.ancestry[0];
    if (broken.ancestors[0][broken.ancestry[1]] != broken.ancestry[0]) {
        CHECK_THROWS_AS(pf_log_weight_estimate(broken, z, ssm), InconsistentHistory);
    }

    auto drifted = h;
    drifted.log_Z_hat += 1.0;
    CHECK_THROWS_AS(pf_log_weight_estimate(drifted, z, ssm), InconsistentHistory);

    auto wrong_path = z;
    wrong_path[0] = 1 - wrong_path[0];
    CHECK_THROWS_AS(pf_log_weight_estimate(h, wrong_path, ssm), InconsistentHistory);
}

TEST_CASE("forward pass and evidence agree with brute-force enumeration") {
    auto ssm = tiny_hmm(4);
    auto model = ssm_model_program(ssm);
    Dataset dummy({0.0});
    CHECK(hmm_log_evidence(ssm) ==
          doctest::Approx(exact_log_marginal_likelihood(model, dummy)).epsilon(1e-12));
}

TEST_CASE("backward sampling reproduces the exact path posterior") {
    auto hmm = hmm_fixture(2, 3, 3, 21);
    const auto& ssm = hmm.ssm;
    auto alpha = hmm_forward_pass(ssm);
    auto posterior = ssm_exact_posterior(ssm);

    // The sampler draws idx_T from alpha[T-1], then idx_t from
    // alpha[t][j] + log p(z_{t+1} | j); the product of those categorical
    // probabilities must equal the path posterior.
    for (const auto& path : all_paths(ssm)) {
        std::vector<std::size_t> idx(3);
        for (std::size_t t = 0; t < 3; ++t) idx[t] = std::size_t(path[t]);
        double last_total = logsumexp(alpha[2]);
        double lp = alpha[2][idx[2]] - last_total;
        for (std::size_t t = 3 - 1; t-- > 0;) {
            std::vector<double> scores(2);
            for (std::size_t j = 0; j < 2; ++j) {
                scores[j] = alpha[t][j] +
                            ssm.transition_log_density(ssm.states[idx[t + 1]], ssm.states[j]);
            }
            lp += scores[idx[t]] - logsumexp(scores);
        }
        CHECK(lp == doctest::Approx(posterior.log_prob(path)).epsilon(1e-12));
    }

    // Smoke-check the sampler itself on the most likely path.
    Rng rng = make_stream(22, stream_tag::kReference, 0);
    std::map<std::vector<int>, int> counts;
    const int n = 20000;
    for (int i = 0; i < n; ++i) counts[ffbs_sample(ssm, rng)]++;
    for (const auto& [path, c] : counts) {
        double p = std::exp(posterior.log_prob(path));
        if (p < 0.05) continue;
        CHECK(double(c) / n == doctest::Approx(p).epsilon(0.1));
    }
}

TEST_CASE("SIR with one particle outputs the prior and scores the likelihood") {
    auto fixture = toy_bernoulli_fixture();
    Rng rng = make_stream(23, stream_tag::kInference, 0);
    for (int rep = 0; rep < 20; ++rep) {
        auto [h, z] = run_sir(fixture.model, fixture.data, 1, rng);
        double lik = fixture.model.log_joint(z, fixture.data) - fixture.model.log_prior(z);
        CHECK(h.log_Z_hat == doctest::Approx(lik).epsilon(1e-13));
    }
}

TEST_CASE("more particles shrink the exact divergence and the output gap") {
    auto fixture = toy_bernoulli_fixture();
    std::vector<double> divergences;
    std::vector<double> output_gaps;
    for (std::size_t K : {1u, 2u, 4u}) {
        auto prog = enumerate_sir(fixture.model, fixture.data, K);
        divergences.push_back(exact_subjective_divergence_expectation(
            fixture.model, fixture.data, prog.inference, prog.meta, fixture.posterior));
        auto marg = exact_marginal_output(prog.inference);
        output_gaps.push_back(exact_symmetrized_kl(marg, fixture.posterior));
    }
    CHECK(divergences[1] < divergences[0] - 1e-6);
    CHECK(divergences[2] < divergences[1] - 1e-6);
    CHECK(output_gaps[1] < output_gaps[0] - 1e-6);
    CHECK(output_gaps[2] < output_gaps[1] - 1e-6);
    for (double d : divergences) CHECK(d >= output_gaps[divergences.size() - 1] - 1e-12);
}

TEST_CASE("impossible observations raise instead of silently returning -inf") {
    auto ssm = tiny_hmm(3);
    auto obs = ssm.observation_log_density;
    ssm.observation_log_density = [obs](std::size_t t, const int& s) {
        return t == 1 ? kNegInf : obs(t, s);
    };
    auto prop = make_prior_proposals(ssm);
    Rng rng = make_stream(24, stream_tag::kInference, 0);
    CHECK_THROWS_AS(run_particle_filter(ssm, prop, 3, rng), AllWeightsZero);
}

TEST_CASE("proposal families are normalized densities") {
    auto ssm = tiny_hmm(3);
    for (const auto& prop : {make_prior_proposals(ssm), make_conditional_proposals(ssm)}) {
        double init_total = 0.0;
        for (int s : ssm.states) init_total += std::exp(prop.initial_log_density(s));
        CHECK(init_total == doctest::Approx(1.0).epsilon(1e-12));
        for (int prev : ssm.states) {
            for (std::size_t t : {1u, 2u}) {
                double total = 0.0;
                for (int s : ssm.states) {
                    total += std::exp(prop.transition_log_density(t, s, prev));
                }
                CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
            }
        }
    }
}
