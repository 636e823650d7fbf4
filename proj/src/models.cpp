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

#include "subjdiv/models.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "subjdiv/errors.hpp"
#include "subjdiv/numeric.hpp"

namespace subjdiv {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2 pi)

double normal_log_pdf(double x, double mean, double var) {
    double d = x - mean;
    return -0.5 * (kLog2Pi + std::log(var) + d * d / var);
}

double bernoulli_log_pmf(int value, double p_one) {
    return value != 0 ? std::log(p_one) : std::log1p(-p_one);
}

}  // namespace

// --- Bayesian linear regression ---

double Gaussian2::log_density(const std::vector<double>& x) const {
    if (x.size() != 2) throw Error("Gaussian2 expects a 2-vector");
    double det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
    if (!(det > 0.0) || !(cov[0][0] > 0.0)) {
        throw SingularCovariance("covariance is not positive definite");
    }
    double d0 = x[0] - mean[0];
    double d1 = x[1] - mean[1];
    // Quadratic form with the explicit 2x2 inverse.
    double quad = (cov[1][1] * d0 * d0 - 2.0 * cov[0][1] * d0 * d1 + cov[0][0] * d1 * d1) / det;
    return -0.5 * (2.0 * kLog2Pi + std::log(det) + quad);
}

std::vector<double> Gaussian2::sample(Rng& rng) const {
    double det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
    if (!(det > 0.0) || !(cov[0][0] > 0.0)) {
        throw SingularCovariance("covariance is not positive definite");
    }
    double l11 = std::sqrt(cov[0][0]);
    double l21 = cov[1][0] / l11;
    double l22 = std::sqrt(cov[1][1] - l21 * l21);
    std::normal_distribution<double> normal(0.0, 1.0);
    double e0 = normal(rng);
    double e1 = normal(rng);
    return {mean[0] + l11 * e0, mean[1] + l21 * e0 + l22 * e1};
}

double linreg_log_joint(const LinRegModel& model, const std::vector<double>& beta,
                        const Dataset& data) {
    if (beta.size() != 2) throw Error("linear regression latent must be {intercept, slope}");
    double acc = normal_log_pdf(beta[0], model.prior_mean[0], model.prior_var[0]) +
                 normal_log_pdf(beta[1], model.prior_mean[1], model.prior_var[1]);
    for (std::size_t r = 0; r < data.active; ++r) {
        std::size_t i = data.ordering[r];
        double pred = beta[0] + beta[1] * model.covariates[i];
        acc += normal_log_pdf(data.observations[i], pred, model.noise_var);
    }
    return acc;
}

LinRegPosterior linreg_conjugate_posterior(const LinRegModel& model, const Dataset& data) {
    // Posterior precision A = V0^{-1} + X^T X / s2; mean = A^{-1} b with
    // b = V0^{-1} mu0 + X^T y / s2, where row i of X is (1, x_i).
    double a00 = 1.0 / model.prior_var[0];
    double a11 = 1.0 / model.prior_var[1];
    double a01 = 0.0;
    double b0 = model.prior_mean[0] / model.prior_var[0];
    double b1 = model.prior_mean[1] / model.prior_var[1];
    for (std::size_t r = 0; r < data.active; ++r) {
        std::size_t i = data.ordering[r];
        double x = model.covariates[i];
        double y = data.observations[i];
        a00 += 1.0 / model.noise_var;
        a01 += x / model.noise_var;
        a11 += x * x / model.noise_var;
        b0 += y / model.noise_var;
        b1 += x * y / model.noise_var;
    }
    double det = a00 * a11 - a01 * a01;
    if (!(det > 0.0) || !(a00 > 0.0)) {
        throw SingularCovariance("posterior precision is not positive definite");
    }
    LinRegPosterior out;
    out.posterior.cov = {{{a11 / det, -a01 / det}, {-a01 / det, a00 / det}}};
    out.posterior.mean = {(a11 * b0 - a01 * b1) / det, (a00 * b1 - a01 * b0) / det};
    std::vector<double> at_mean{out.posterior.mean[0], out.posterior.mean[1]};
    out.log_evidence =
        linreg_log_joint(model, at_mean, data) - out.posterior.log_density(at_mean);
    return out;
}

ModelProgram<std::vector<double>> linreg_model_program(const LinRegModel& model) {
    ModelProgram<std::vector<double>> program;
    program.sample_prior = [model](Rng& rng) {
        std::normal_distribution<double> normal(0.0, 1.0);
        return std::vector<double>{
            model.prior_mean[0] + std::sqrt(model.prior_var[0]) * normal(rng),
            model.prior_mean[1] + std::sqrt(model.prior_var[1]) * normal(rng)};
    };
    program.log_joint = [model](const std::vector<double>& beta, const Dataset& data) {
        return linreg_log_joint(model, beta, data);
    };
    program.log_prior = [model](const std::vector<double>& beta) {
        return normal_log_pdf(beta[0], model.prior_mean[0], model.prior_var[0]) +
               normal_log_pdf(beta[1], model.prior_mean[1], model.prior_var[1]);
    };
    return program;
}

// --- Noisy-or network ---

NoisyOrNetwork noisyor_random_network(std::size_t n_causes, std::size_t n_findings,
                                      std::uint64_t seed, double cause_prior, double transmission,
                                      double leak) {
    Rng rng = make_stream(seed, stream_tag::kModel, 0);
    NoisyOrNetwork net;
    net.cause_priors.assign(n_causes, cause_prior);
    net.leak = leak;
    std::uniform_int_distribution<std::size_t> pick(0, n_causes - 1);
    std::uniform_int_distribution<std::size_t> fanin(1, std::min<std::size_t>(3, n_causes));
    net.parents.resize(n_findings);
    net.transmission.resize(n_findings);
    for (std::size_t f = 0; f < n_findings; ++f) {
        std::size_t n_edges = fanin(rng);
        while (net.parents[f].size() < n_edges) {
            std::size_t cause = pick(rng);
            bool dup = false;
            for (std::size_t existing : net.parents[f]) dup = dup || existing == cause;
            if (!dup) {
                net.parents[f].push_back(cause);
                net.transmission[f].push_back(transmission);
            }
        }
    }
    // Observations: simulate causes and findings once from the network.
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<int> causes(n_causes);
    for (std::size_t c = 0; c < n_causes; ++c) causes[c] = unif(rng) < cause_prior ? 1 : 0;
    net.findings.resize(n_findings);
    for (std::size_t f = 0; f < n_findings; ++f) {
        double off = 1.0 - leak;
        for (std::size_t e = 0; e < net.parents[f].size(); ++e) {
            if (causes[net.parents[f][e]] != 0) off *= 1.0 - net.transmission[f][e];
        }
        net.findings[f] = unif(rng) < 1.0 - off ? 1 : 0;
    }
    return net;
}

namespace {

double noisyor_log_likelihood(const NoisyOrNetwork& net, const std::vector<int>& causes,
                              double leak) {
    double acc = 0.0;
    for (std::size_t f = 0; f < net.findings.size(); ++f) {
        double off = 1.0 - leak;
        for (std::size_t e = 0; e < net.parents[f].size(); ++e) {
            if (causes[net.parents[f][e]] != 0) off *= 1.0 - net.transmission[f][e];
        }
        acc += net.findings[f] != 0 ? std::log1p(-off) : std::log(off);
    }
    return acc;
}

}  // namespace

double noisyor_log_prior(const NoisyOrNetwork& net, const std::vector<int>& causes) {
    if (causes.size() != net.cause_priors.size()) return kNegInf;
    double acc = 0.0;
    for (std::size_t c = 0; c < causes.size(); ++c) {
        acc += bernoulli_log_pmf(causes[c], net.cause_priors[c]);
    }
    return acc;
}

double noisyor_log_joint(const NoisyOrNetwork& net, const std::vector<int>& causes) {
    return noisyor_log_prior(net, causes) + noisyor_log_likelihood(net, causes, net.leak);
}

std::vector<std::vector<int>> noisyor_support(const NoisyOrNetwork& net) {
    std::vector<std::vector<int>> support;
    std::vector<int> digits(net.cause_priors.size(), 0);
    std::vector<int> radix(net.cause_priors.size(), 2);
    do {
        support.push_back(digits);
    } while (next_tuple(digits, radix));
    return support;
}

ModelProgram<std::vector<int>> noisyor_model_program(const NoisyOrNetwork& net) {
    ModelProgram<std::vector<int>> program;
    program.sample_prior = [net](Rng& rng) {
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        std::vector<int> causes(net.cause_priors.size());
        for (std::size_t c = 0; c < causes.size(); ++c) {
            causes[c] = unif(rng) < net.cause_priors[c] ? 1 : 0;
        }
        return causes;
    };
    program.log_joint = [net](const std::vector<int>& causes, const Dataset&) {
        return noisyor_log_joint(net, causes);
    };
    program.log_prior = [net](const std::vector<int>& causes) {
        return noisyor_log_prior(net, causes);
    };
    program.latent_support = noisyor_support(net);
    return program;
}

TargetSequence<std::vector<int>> noisyor_annealing_schedule(const NoisyOrNetwork& net, int steps) {
    if (steps < 1) throw Error("annealing schedule needs at least 1 step");
    const double start_leak = 0.99;
    std::vector<double> leaks(static_cast<std::size_t>(steps) + 1);
    for (int t = 0; t <= steps; ++t) {
        double frac = double(t) / double(steps);
        leaks[static_cast<std::size_t>(t)] = start_leak + frac * (net.leak - start_leak);
    }
    leaks.back() = net.leak;

    // Normalize the relaxed initial target by enumeration so that it is a
    // sampleable distribution.
    auto support = noisyor_support(net);
    std::vector<double> initial_lw(support.size());
    for (std::size_t i = 0; i < support.size(); ++i) {
        initial_lw[i] =
            noisyor_log_prior(net, support[i]) + noisyor_log_likelihood(net, support[i], leaks[0]);
    }
    auto initial = std::make_shared<FiniteDistribution<std::vector<int>>>(
        FiniteDistribution<std::vector<int>>::from_log_weights(support, initial_lw));

    TargetSequence<std::vector<int>> targets;
    targets.log_targets.push_back(
        [initial](const std::vector<int>& causes) { return initial->log_prob_or(causes, kNegInf); });
    for (int t = 1; t <= steps; ++t) {
        double leak = leaks[static_cast<std::size_t>(t)];
        targets.log_targets.push_back([net, leak](const std::vector<int>& causes) {
            return noisyor_log_prior(net, causes) + noisyor_log_likelihood(net, causes, leak);
        });
        targets.target_ids.push_back("noisyor_anneal_" + std::to_string(t));
    }
    targets.sample_initial = [initial](Rng& rng) { return initial->sample(rng); };
    return targets;
}

// --- Gaussian mean-field assessable family ---

double gaussian_mean_field_log_density(const GaussianMeanField& family,
                                       const std::vector<double>& x) {
    if (x.size() != family.means.size()) throw Error("mean-field dimension mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(family.variances[i] > 0.0)) throw Error("mean-field variance must be positive");
        acc += normal_log_pdf(x[i], family.means[i], family.variances[i]);
    }
    return acc;
}

std::vector<double> gaussian_mean_field_sample(const GaussianMeanField& family, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> x(family.means.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = family.means[i] + std::sqrt(family.variances[i]) * normal(rng);
    }
    return x;
}

AssessableInference<std::vector<double>> gaussian_mean_field_inference(
    const GaussianMeanField& family) {
    return {
        [family](const Dataset&, Rng& rng) { return gaussian_mean_field_sample(family, rng); },
        [family](const std::vector<double>& x, const Dataset&) {
            return gaussian_mean_field_log_density(family, x);
        },
    };
}

// --- Toy two-point fixture ---

ToyBernoulli toy_bernoulli_fixture() {
    const double prior_one = 0.3;
    const double lik_one = 0.8;  // p(x* = 1 | z = 1)
    const double lik_zero = 0.2;  // p(x* = 1 | z = 0)

    ToyBernoulli fixture;
    fixture.data = Dataset({1.0});
    fixture.model.sample_prior = [prior_one](Rng& rng) {
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        return unif(rng) < prior_one ? 1 : 0;
    };
    fixture.model.log_joint = [prior_one, lik_one, lik_zero](int z, const Dataset& data) {
        if (z != 0 && z != 1) return kNegInf;
        double lik = z == 1 ? lik_one : lik_zero;
        double obs_one = data.observations[0] != 0.0 ? lik : 1.0 - lik;
        return bernoulli_log_pmf(z, prior_one) + std::log(obs_one);
    };
    fixture.model.log_prior = [prior_one](int z) {
        if (z != 0 && z != 1) return kNegInf;
        return bernoulli_log_pmf(z, prior_one);
    };
    fixture.model.latent_support = {0, 1};
    double joint_one = prior_one * lik_one;                  // 0.24
    double joint_zero = (1.0 - prior_one) * lik_zero;        // 0.14
    double evidence = joint_one + joint_zero;                // 0.38
    fixture.log_evidence = std::log(evidence);
    fixture.posterior = FiniteDistribution<int>(
        {0, 1}, {std::log(joint_zero / evidence), std::log(joint_one / evidence)});
    return fixture;
}

// --- Finite HMM fixture ---

StateSpaceModel<int> hmm_state_space_model(const Hmm& hmm) {
    StateSpaceModel<int> ssm;
    ssm.T = hmm.observations.size();
    ssm.states.resize(hmm.n_states);
    for (std::size_t i = 0; i < hmm.n_states; ++i) ssm.states[static_cast<std::size_t>(i)] = int(i);
    auto initial = hmm.initial;
    auto transition = hmm.transition;
    auto emission = hmm.emission;
    auto observations = hmm.observations;
    ssm.initial_log_density = [initial](const int& s) {
        if (s < 0 || std::size_t(s) >= initial.size()) return kNegInf;
        return std::log(initial[std::size_t(s)]);
    };
    ssm.transition_log_density = [transition](const int& next, const int& prev) {
        if (prev < 0 || std::size_t(prev) >= transition.size()) return kNegInf;
        if (next < 0 || std::size_t(next) >= transition.size()) return kNegInf;
        return std::log(transition[std::size_t(prev)][std::size_t(next)]);
    };
    ssm.observation_log_density = [emission, observations](std::size_t t, const int& s) {
        if (s < 0 || std::size_t(s) >= emission.size()) return kNegInf;
        return std::log(emission[std::size_t(s)][std::size_t(observations[t])]);
    };
    return ssm;
}

Hmm hmm_fixture(std::size_t n_states, std::size_t n_obs, std::size_t T, std::uint64_t seed) {
    if (n_states < 2) throw Error("hmm_fixture needs at least 2 states");
    Rng rng = make_stream(seed, stream_tag::kModel, 0);
    auto random_simplex = [&rng](std::size_t n) {
        std::exponential_distribution<double> expo(1.0);
        std::vector<double> p(n);
        double total = 0.0;
        for (double& v : p) {
            v = expo(rng);
            total += v;
        }
        for (double& v : p) v /= total;
        return p;
    };

    Hmm hmm;
    hmm.n_states = n_states;
    hmm.n_obs = n_obs;
    hmm.initial = random_simplex(n_states);
    hmm.transition.resize(n_states);
    hmm.emission.resize(n_states);
    for (std::size_t s = 0; s < n_states; ++s) {
        hmm.transition[s] = random_simplex(n_states);
        hmm.emission[s] = random_simplex(n_obs);
    }

    // Sample a latent path and observations from the model itself.
    auto draw = [&rng](const std::vector<double>& p) {
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        double u = unif(rng);
        double cum = 0.0;
        for (std::size_t i = 0; i + 1 < p.size(); ++i) {
            cum += p[i];
            if (u < cum) return i;
        }
        return p.size() - 1;
    };
    hmm.observations.resize(T);
    std::size_t state = draw(hmm.initial);
    for (std::size_t t = 0; t < T; ++t) {
        if (t > 0) state = draw(hmm.transition[state]);
        hmm.observations[t] = int(draw(hmm.emission[state]));
    }

    hmm.ssm = hmm_state_space_model(hmm);
    hmm.log_evidence = hmm_log_evidence(hmm.ssm);
    return hmm;
}

}  // namespace subjdiv
