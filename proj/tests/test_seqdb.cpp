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
#include <functional>
#include <utility>
#include <vector>

#include "subjdiv/enumerate.hpp"
#include "subjdiv/exact.hpp"
#include "subjdiv/kernels.hpp"
#include "subjdiv/models.hpp"
#include "subjdiv/seqdb.hpp"

using namespace subjdiv;

namespace {

// Two-target toy bridge: p~_0 = prior, p~_1 = joint.
struct ToyBridge {
    ToyBernoulli fixture = toy_bernoulli_fixture();
    TargetSequence<int> targets;
    TransitionKernel<int> kernel;

    ToyBridge() {
        auto model = fixture.model;
        auto data = fixture.data;
        targets.log_targets.push_back(model.log_prior);
        targets.log_targets.push_back(
            [model, data](const int& z) { return model.log_joint(z, data); });
        targets.target_ids = {"posterior"};
        targets.sample_initial = model.sample_prior;
        kernel = make_mh_resimulation<int>(
            "posterior", [model, data](const int& z) { return model.log_joint(z, data); },
            model.sample_prior, model.log_prior, {0, 1});
    }
};

TransitionKernel<int> identity_kernel(std::string id, std::function<double(const int&)> target) {
    TransitionKernel<int> k;
    k.target_id = std::move(id);
    k.log_target = std::move(target);
    k.support = {0, 1};
    k.step = [](const int& s, Rng&) { return s; };
    k.reverse_step = k.step;
    k.log_transition = [](const int& from, const int& to) { return from == to ? 0.0 : kNegInf; };
    k.reverse_log_transition = k.log_transition;
    return k;
}

FiniteDistribution<int> normalize_target(const std::function<double(const int&)>& log_target,
                                         const std::vector<int>& support) {
    std::vector<double> lw;
    for (int s : support) lw.push_back(log_target(s));
    return FiniteDistribution<int>::from_log_weights(support, std::move(lw));
}

// Latent coin with three heterogeneous observations; likelihoods depend on the
// observation index, so profiles depend on the data order.
ModelProgram<int> three_obs_model() {
    ModelProgram<int> model;
    model.latent_support = {0, 1};
    const double prior_one = 0.3;
    const double lik_one[3] = {0.9, 0.3, 0.6};   // p(x_i = 1 | z = 1)
    const double lik_zero[3] = {0.2, 0.7, 0.4};  // p(x_i = 1 | z = 0)
    model.log_prior = [prior_one](const int& z) {
        if (z != 0 && z != 1) return kNegInf;
        return z == 1 ? std::log(prior_one) : std::log1p(-prior_one);
    };
    model.log_joint = [model, lik_one, lik_zero](const int& z, const Dataset& data) {
        double acc = model.log_prior(z);
        for (std::size_t r = 0; r < data.active; ++r) {
            std::size_t i = data.ordering[r];
            double p = z == 1 ? lik_one[i] : lik_zero[i];
            acc += data.observations[i] != 0.0 ? std::log(p) : std::log1p(-p);
        }
        return acc;
    };
    model.sample_prior = [prior_one](Rng& rng) {
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        return unif(rng) < prior_one ? 1 : 0;
    };
    return model;
}

}  // namespace

TEST_CASE("T=1 identity kernel leaves the initial distribution untouched") {
    ToyBridge b;
    auto targets = b.targets;
    auto kernel = identity_kernel("posterior", targets.log_targets[1]);
    auto prog = enumerate_seqdb<int>(targets, {kernel});
    auto marg = exact_marginal_output(prog.inference);
    CHECK(std::exp(marg.log_prob(1)) == doctest::Approx(0.3).epsilon(1e-13));
    CHECK(std::exp(marg.log_prob(0)) == doctest::Approx(0.7).epsilon(1e-13));
}

TEST_CASE("output marginal equals the initial-distribution/kernel matrix product") {
    ToyBridge b;
    TargetSequence<int> targets = b.targets;
    // Insert an intermediate target halfway between prior and joint.
    auto mid = [&b](const int& z) {
        return 0.5 * b.fixture.model.log_prior(z) +
               0.5 * b.fixture.model.log_joint(z, b.fixture.data);
    };
    targets.log_targets = {b.fixture.model.log_prior, mid, targets.log_targets[1]};
    targets.target_ids = {"mid", "posterior"};
    auto k1 = make_mh_resimulation<int>("mid", mid, b.fixture.model.sample_prior,
                                        b.fixture.model.log_prior, {0, 1});
    auto k2 = b.kernel;

    auto prog = enumerate_seqdb<int>(targets, {k1, k2});
    auto marg = exact_marginal_output(prog.inference);

    double p0[2] = {0.7, 0.3};
    double out[2] = {0.0, 0.0};
    for (int u0 = 0; u0 < 2; ++u0) {
        for (int u1 = 0; u1 < 2; ++u1) {
            for (int z = 0; z < 2; ++z) {
                out[z] += p0[u0] * std::exp(k1.log_transition(u0, u1)) *
                          std::exp(k2.log_transition(u1, z));
            }
        }
    }
    CHECK(std::exp(marg.log_prob(0)) == doctest::Approx(out[0]).epsilon(1e-13));
    CHECK(std::exp(marg.log_prob(1)) == doctest::Approx(out[1]).epsilon(1e-13));
}

TEST_CASE("perfect kernels emit the final target") {
    ToyBridge b;
    auto resampler =
        make_exact_resampler<int>("posterior", b.targets.log_targets[1], {0, 1});
    auto prog = enumerate_seqdb<int>(b.targets, {resampler});
    auto marg = exact_marginal_output(prog.inference);
    CHECK(marg.log_prob(1) ==
          doctest::Approx(b.fixture.posterior.log_prob(1)).epsilon(1e-13));
}

TEST_CASE("annealed weight examples") {
    ToyBridge b;

    // p~_0 = exact posterior: every history yields log p(x*).
    TargetSequence<int> from_posterior = b.targets;
    auto posterior = b.fixture.posterior;
    from_posterior.log_targets[0] = [posterior](const int& z) {
        return posterior.log_prob_or(z, kNegInf);
    };
    for (int u0 : {0, 1}) {
        SeqDbHistory<int> h{{u0}, u0};
        CHECK(ais_log_weight(from_posterior, h) ==
              doctest::Approx(b.fixture.log_evidence).epsilon(1e-13));
    }

    // p~_0 = prior, u_0 = 1: log(0.24 / 0.3) = log 0.8.
    SeqDbHistory<int> h1{{1}, 1};
    CHECK(ais_log_weight(b.targets, h1) == doctest::Approx(std::log(0.8)).epsilon(1e-13));

    // Identical intermediate targets: only the boundary ratio survives.
    TargetSequence<int> flat;
    flat.log_targets = {b.targets.log_targets[0], b.targets.log_targets[0],
                        b.targets.log_targets[0], b.targets.log_targets[1]};
    flat.target_ids = {"a", "b", "c"};
    for (int u0 : {0, 1}) {
        for (int u2 : {0, 1}) {
            SeqDbHistory<int> h{{u0, 1 - u0, u2}, u2};
            double expected = b.fixture.model.log_joint(u2, b.fixture.data) -
                              b.fixture.model.log_prior(u2);
            CHECK(ais_log_weight(flat, h) == doctest::Approx(expected).epsilon(1e-13));
        }
    }

    // Zero target mass raises.
    SeqDbHistory<int> bad{{5}, 5};
    CHECK_THROWS_AS(ais_log_weight(b.targets, bad), SupportViolation);
    SeqDbHistory<int> wrong_len{{0, 1}, 1};
    CHECK_THROWS_AS(ais_log_weight(b.targets, wrong_len), Error);
}

TEST_CASE("weight from kernel densities telescopes to the annealed form") {
    ToyBridge b;
    TargetSequence<int> targets = b.targets;
    auto mid = [&b](const int& z) {
        return 0.5 * b.fixture.model.log_prior(z) +
               0.5 * b.fixture.model.log_joint(z, b.fixture.data);
    };
    targets.log_targets = {b.fixture.model.log_prior, mid, targets.log_targets[1]};
    targets.target_ids = {"mid", "posterior"};
    std::vector<TransitionKernel<int>> kernels{
        make_mh_resimulation<int>("mid", mid, b.fixture.model.sample_prior,
                                  b.fixture.model.log_prior, {0, 1}),
        b.kernel};

    // log q from the chain densities, log m from the reversed chain; the
    // difference against log p(z, x*) must equal the annealed weight.
    for (int u0 : {0, 1}) {
        for (int u1 : {0, 1}) {
            for (int z : {0, 1}) {
                double lq = b.fixture.model.log_prior(u0) + kernels[0].log_transition(u0, u1) +
                            kernels[1].log_transition(u1, z);
                double lm = kernels[1].reverse_log_transition(z, u1) +
                            kernels[0].reverse_log_transition(u1, u0);
                double lp = b.fixture.model.log_joint(z, b.fixture.data);
                SeqDbHistory<int> h{{u0, u1}, z};
                CHECK(lp + lm - lq ==
                      doctest::Approx(ais_log_weight(targets, h)).epsilon(1e-10));
            }
        }
    }
}

TEST_CASE("meta-inference runs the kernels in reverse") {
    ToyBridge b;
    auto prog = enumerate_seqdb<int>(b.targets, {b.kernel});
    // T=1: m(u_0; z) is exactly the reversed kernel row, already normalized.
    for (int z : {0, 1}) {
        CHECK(prog.meta_log_totals.at(z) == doctest::Approx(0.0).epsilon(1e-12));
        auto m = prog.meta(z);
        for (int u0 : {0, 1}) {
            CHECK(m.log_prob(std::vector<int>{u0}) ==
                  doctest::Approx(b.kernel.reverse_log_transition(z, u0)).epsilon(1e-12));
        }
    }
    // Statistical cross-check of the sampler against the density.
    Rng rng = make_stream(17, stream_tag::kMeta, 0);
    const int n = 40000;
    int ones = 0;
    for (int i = 0; i < n; ++i) {
        auto states = run_seqdb_metainference<int>(b.targets, {b.kernel}, 1, rng);
        REQUIRE(states.size() == 1);
        ones += states[0];
    }
    double expected = std::exp(b.kernel.reverse_log_transition(1, 1));
    CHECK(double(ones) / n == doctest::Approx(expected).epsilon(0.03));
}

TEST_CASE("state extensions reduce to the fixed-space weight when empty") {
    // Three targets over single-coordinate integer vectors.
    ToyBridge b;
    using V = int;
    auto lift = [](std::function<double(const int&)> f) {
        return [f](const std::vector<V>& v) { return v.size() == 1 ? f(v[0]) : kNegInf; };
    };
    auto mid = [&b](const int& z) {
        return 0.5 * b.fixture.model.log_prior(z) +
               0.5 * b.fixture.model.log_joint(z, b.fixture.data);
    };
    TargetSequence<std::vector<V>> targets;
    targets.log_targets = {lift(b.fixture.model.log_prior), lift(mid),
                           lift([&b](const int& z) {
                               return b.fixture.model.log_joint(z, b.fixture.data);
                           })};
    targets.target_ids = {"mid", "posterior"};

    ExtensionSchedule<V> schedule;
    schedule.log_density.push_back([&b](const std::vector<V>& v, const std::vector<V>&) {
        return v.size() == 1 ? b.fixture.model.log_prior(v[0]) : kNegInf;
    });
    schedule.log_density.push_back([](const std::vector<V>& v, const std::vector<V>&) {
        return v.empty() ? 0.0 : kNegInf;  // empty extension
    });

    TargetSequence<int> flat_targets;
    flat_targets.log_targets = {b.fixture.model.log_prior, mid,
                                [&b](const int& z) {
                                    return b.fixture.model.log_joint(z, b.fixture.data);
                                }};
    flat_targets.target_ids = targets.target_ids;

    for (int u0 : {0, 1}) {
        for (int u1 : {0, 1}) {
            ExtensionHistory<V> h;
            h.extensions = {{u0}, {}};
            h.states = {{u1}};
            h.output = {u1};
            SeqDbHistory<int> flat{{u0, u1}, u1};
            // The first ratio differs by q(v_1) = p~_0(v_1), which cancels.
            CHECK(extension_log_weight(targets, schedule, h) ==
                  doctest::Approx(ais_log_weight(flat_targets, flat)).epsilon(1e-12));
        }
    }
}

TEST_CASE("single-step extension weight") {
    using V = int;
    ToyBridge b;
    TargetSequence<std::vector<V>> targets;
    targets.log_targets.push_back([](const std::vector<V>&) { return 0.0; });
    targets.log_targets.push_back([&b](const std::vector<V>& v) {
        return v.size() == 1 ? b.fixture.model.log_joint(v[0], b.fixture.data) : kNegInf;
    });
    targets.target_ids = {"posterior"};
    ExtensionSchedule<V> schedule;
    schedule.log_density.push_back([&b](const std::vector<V>& v, const std::vector<V>&) {
        return v.size() == 1 ? b.fixture.model.log_prior(v[0]) : kNegInf;
    });
    ExtensionHistory<V> h;
    h.extensions = {{1}};
    h.output = {1};
    CHECK(extension_log_weight(targets, schedule, h) ==
          doctest::Approx(std::log(0.24) - std::log(0.3)).epsilon(1e-13));
}

TEST_CASE("asymptotic gap") {
    ToyBridge b;
    std::vector<int> support{0, 1};

    // Constant sequence: zero.
    TargetSequence<int> constant;
    constant.log_targets = {b.fixture.model.log_prior, b.fixture.model.log_prior,
                            b.fixture.model.log_prior};
    constant.target_ids = {"a", "b"};
    CHECK(asymptotic_gap(constant, support) == doctest::Approx(0.0).epsilon(1e-13));

    // Prior to posterior in one hop: the symmetrized KL between them.
    FiniteDistribution<int> prior({0, 1}, {std::log(0.7), std::log(0.3)});
    CHECK(asymptotic_gap(b.targets, support) ==
          doctest::Approx(exact_symmetrized_kl(prior, b.fixture.posterior)).epsilon(1e-12));
}

TEST_CASE("sequential-observation bridges depend on the data order") {
    auto model = three_obs_model();
    Dataset forward({1.0, 0.0, 1.0}, {0, 1, 2});
    Dataset reversed({1.0, 0.0, 1.0}, {2, 1, 0});
    std::vector<int> support{0, 1};

    auto t_fwd = sequential_observation_targets(model, forward);
    auto t_rev = sequential_observation_targets(model, reversed);
    REQUIRE(t_fwd.num_steps() == 3);

    // Shared endpoints: prior at t=0, full joint at t=T.
    for (int z : {0, 1}) {
        CHECK(t_fwd.log_targets[0](z) == model.log_prior(z));
        CHECK(t_fwd.log_targets[3](z) == doctest::Approx(model.log_joint(z, forward)));
        CHECK(t_rev.log_targets[3](z) == doctest::Approx(model.log_joint(z, forward)));
    }

    double gap_fwd = asymptotic_gap(t_fwd, support);
    double gap_rev = asymptotic_gap(t_rev, support);
    CHECK(gap_fwd > 0.0);
    CHECK(std::abs(gap_fwd - gap_rev) > 1e-6);
}

TEST_CASE("geometric bridge endpoints and refinement") {
    ToyBridge b;
    std::vector<int> support{0, 1};
    auto bridge = geometric_bridge_targets(b.fixture.model, b.fixture.data, 4);
    REQUIRE(bridge.num_steps() == 4);
    for (int z : {0, 1}) {
        CHECK(bridge.log_targets[0](z) == b.fixture.model.log_prior(z));
        CHECK(bridge.log_targets[4](z) ==
              doctest::Approx(b.fixture.model.log_joint(z, b.fixture.data)).epsilon(1e-13));
    }

    // Refinement: each adjacent divergence on the finer path stays below the
    // single-hop divergence of the coarse path.
    auto coarse = geometric_bridge_targets(b.fixture.model, b.fixture.data, 1);
    double single_hop = asymptotic_gap(coarse, support);
    auto norm = [&](const std::function<double(const int&)>& f) {
        return normalize_target(f, support);
    };
    for (std::size_t t = 0; t < 4; ++t) {
        double adjacent = exact_symmetrized_kl(norm(bridge.log_targets[t]),
                                               norm(bridge.log_targets[t + 1]));
        CHECK(adjacent <= single_hop + 1e-12);
    }
    CHECK(asymptotic_gap(bridge, support) <= single_hop + 1e-12);
}

TEST_CASE("degenerate single-target chains earn no credit for extra work") {
    ToyBridge b;
    auto resampler = make_exact_resampler<int>("posterior", b.targets.log_targets[1], {0, 1});
    FiniteDistribution<int> prior({0, 1}, {std::log(0.7), std::log(0.3)});
    double sym = exact_symmetrized_kl(prior, b.fixture.posterior);
    for (int reps : {1, 3}) {
        auto prog = enumerate_seqdb<int>(b.targets, {repeat(resampler, reps)});
        double d = exact_subjective_divergence_expectation(
            b.fixture.model, b.fixture.data, prog.inference, prog.meta, b.fixture.posterior);
        CHECK(d == doctest::Approx(sym).epsilon(1e-10));
    }
}

TEST_CASE("kernel/target pairing is enforced") {
    ToyBridge b;
    Rng rng = make_stream(3, stream_tag::kModel, 0);
    auto wrong = b.kernel;
    wrong.target_id = "something_else";
    CHECK_THROWS_AS(run_seqdb_inference<int>(b.targets, {wrong}, rng), TargetMismatch);
    CHECK_THROWS_AS(run_seqdb_inference<int>(b.targets, {b.kernel, b.kernel}, rng),
                    TargetMismatch);
    CHECK_NOTHROW(run_seqdb_inference<int>(b.targets, {b.kernel}, rng));
}
