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

// Model zoo with paired exact references: conjugate Bayesian linear
// regression, random seeded finite HMMs with an exact path sampler, a small
// noisy-or network with an enumeration oracle and an annealing schedule, a
// Gaussian mean-field assessable family, and the two-point toy fixture used
// throughout the tests.

#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "subjdiv/core.hpp"
#include "subjdiv/exact.hpp"
#include "subjdiv/seqdb.hpp"
#include "subjdiv/smc.hpp"

namespace subjdiv {

// --- Bayesian linear regression ---

/// y_i = b0 + b1 x_i + noise, independent normal priors on (b0, b1).
struct LinRegModel {
    std::array<double, 2> prior_mean{0.0, 0.0};
    std::array<double, 2> prior_var{1.0, 1.0};
    double noise_var = 1.0;
    std::vector<double> covariates;
};

/// Bivariate normal with hand-rolled 2x2 linear algebra.
struct Gaussian2 {
    std::array<double, 2> mean{0.0, 0.0};
    std::array<std::array<double, 2>, 2> cov{{{1.0, 0.0}, {0.0, 1.0}}};

    double log_density(const std::vector<double>& x) const;
    std::vector<double> sample(Rng& rng) const;
};

struct LinRegPosterior {
    Gaussian2 posterior;
    double log_evidence = 0.0;
};

/// log p(beta) + log p(y | beta) for the active observations.
double linreg_log_joint(const LinRegModel& model, const std::vector<double>& beta,
                        const Dataset& data);

/// Exact conjugate posterior and log evidence. Throws SingularCovariance when
/// the posterior precision matrix is not positive definite.
LinRegPosterior linreg_conjugate_posterior(const LinRegModel& model, const Dataset& data);

/// Wraps the regression model for the generic estimators (latent = {b0, b1}).
ModelProgram<std::vector<double>> linreg_model_program(const LinRegModel& model);

// --- Noisy-or network ---

/// Binary causes, binary findings; a finding fails to activate only if the
/// spontaneous (leak) channel and every active parent edge fail.
struct NoisyOrNetwork {
    std::vector<double> cause_priors;
    std::vector<std::vector<std::size_t>> parents;       // per finding
    std::vector<std::vector<double>> transmission;       // per finding, aligned with parents
    double leak = 0.001;                                 // spontaneous activation probability
    std::vector<int> findings;                           // observed 0/1 values
};

/// Seeded random network with the given shape.
NoisyOrNetwork noisyor_random_network(std::size_t n_causes, std::size_t n_findings,
                                      std::uint64_t seed, double cause_prior = 0.001,
                                      double transmission = 0.9, double leak = 0.001);

double noisyor_log_prior(const NoisyOrNetwork& net, const std::vector<int>& causes);
double noisyor_log_joint(const NoisyOrNetwork& net, const std::vector<int>& causes);

/// All 2^n cause vectors.
std::vector<std::vector<int>> noisyor_support(const NoisyOrNetwork& net);

ModelProgram<std::vector<int>> noisyor_model_program(const NoisyOrNetwork& net);

/// Bridge of joints interpolating the leak parameter linearly from 0.99 down
/// to the network's true value across `steps` equal steps. The initial target
/// is the exactly normalized leak-0.99 posterior (the network is small enough
/// to enumerate), so it is sampleable.
TargetSequence<std::vector<int>> noisyor_annealing_schedule(const NoisyOrNetwork& net, int steps);

// --- Gaussian mean-field assessable family ---

struct GaussianMeanField {
    std::vector<double> means;
    std::vector<double> variances;
};

double gaussian_mean_field_log_density(const GaussianMeanField& family,
                                       const std::vector<double>& x);
std::vector<double> gaussian_mean_field_sample(const GaussianMeanField& family, Rng& rng);

AssessableInference<std::vector<double>> gaussian_mean_field_inference(
    const GaussianMeanField& family);

// --- Toy two-point fixture ---

/// Bernoulli(0.3) latent, likelihood of the observed x* = 1 equal to 0.8 when
/// z = 1 and 0.2 when z = 0; posterior p(z=1 | x*) = 0.24/0.38.
struct ToyBernoulli {
    ModelProgram<int> model;
    Dataset data;
    FiniteDistribution<int> posterior;
    double log_evidence = 0.0;
};

ToyBernoulli toy_bernoulli_fixture();

// --- Finite HMM fixture ---

struct Hmm {
    std::size_t n_states = 0;
    std::size_t n_obs = 0;
    std::vector<double> initial;                     // [n_states]
    std::vector<std::vector<double>> transition;     // [prev][next]
    std::vector<std::vector<double>> emission;       // [state][symbol]
    std::vector<int> observations;                   // length T
    StateSpaceModel<int> ssm;                        // observations baked in
    double log_evidence = 0.0;                       // exact forward pass
};

/// Random seeded stochastic matrices; observations sampled from the model
/// itself with the same seed.
Hmm hmm_fixture(std::size_t n_states, std::size_t n_obs, std::size_t T, std::uint64_t seed);

/// Builds the state space model for explicitly given parameters/observations.
StateSpaceModel<int> hmm_state_space_model(const Hmm& hmm);

}  // namespace subjdiv
