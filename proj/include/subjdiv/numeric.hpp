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

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "subjdiv/errors.hpp"
#include "subjdiv/rng.hpp"

namespace subjdiv {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double logsumexp(std::span<const double> xs) {
    double hi = kNegInf;
    for (double x : xs) hi = std::max(hi, x);
    if (std::isinf(hi) && hi < 0) return kNegInf;
    double acc = 0.0;
    for (double x : xs) acc += std::exp(x - hi);
    return hi + std::log(acc);
}

inline double logsumexp(const std::vector<double>& xs) {
    return logsumexp(std::span<const double>(xs));
}

inline double log_add(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    double hi = std::max(a, b);
    return hi + std::log(std::exp(a - hi) + std::exp(b - hi));
}

/// Sample mean and sqrt(unbiased sample variance / n). Requires n >= 2.
inline std::pair<double, double> summarize_log_weights(std::span<const double> samples) {
    const std::size_t n = samples.size();
    if (n < 2) {
        throw InsufficientSamples("summarize_log_weights requires at least 2 samples, got " +
                                  std::to_string(n));
    }
    double mean = 0.0;
    for (double x : samples) mean += x;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double x : samples) ss += (x - mean) * (x - mean);
    double var = ss / static_cast<double>(n - 1);
    return {mean, std::sqrt(var / static_cast<double>(n))};
}

inline std::pair<double, double> summarize_log_weights(const std::vector<double>& samples) {
    return summarize_log_weights(std::span<const double>(samples));
}

/// Samples an index proportional to exp(log_weights[i]).
/// Throws AllWeightsZero when every weight is zero.
inline std::size_t sample_categorical_log(std::span<const double> log_weights, Rng& rng) {
    double total = logsumexp(log_weights);
    if (total == kNegInf) {
        throw AllWeightsZero("categorical draw over all-zero weights");
    }
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double u = unif(rng);
    double cum = 0.0;
    for (std::size_t i = 0; i + 1 < log_weights.size(); ++i) {
        cum += std::exp(log_weights[i] - total);
        if (u < cum) return i;
    }
    return log_weights.size() - 1;
}

inline std::size_t sample_categorical_log(const std::vector<double>& lw, Rng& rng) {
    return sample_categorical_log(std::span<const double>(lw), rng);
}

/// Odometer over a mixed-radix tuple. Returns false when the tuple wraps to zero.
inline bool next_tuple(std::vector<int>& digits, const std::vector<int>& radix) {
    for (std::size_t i = 0; i < digits.size(); ++i) {
        if (++digits[i] < radix[i]) return true;
        digits[i] = 0;
    }
    return false;
}

}  // namespace subjdiv
