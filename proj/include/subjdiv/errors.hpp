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

#include <stdexcept>
#include <string>
#include <vector>

namespace subjdiv {

/// Base class for all errors thrown by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A log density was -inf (or NaN) where positive mass was required.
class SupportViolation : public Error {
public:
    explicit SupportViolation(const std::string& what) : Error(what) {}
};

/// Two finite distributions were compared over different supports.
class SupportMismatch : public Error {
public:
    explicit SupportMismatch(const std::string& what) : Error(what) {}
};

class InsufficientSamples : public Error {
public:
    explicit InsufficientSamples(const std::string& what) : Error(what) {}
};

/// Kernel/target pairing does not match the declared target sequence.
class TargetMismatch : public Error {
public:
    explicit TargetMismatch(const std::string& what) : Error(what) {}
};

/// Composed kernels declare different targets.
class MixedTargets : public Error {
public:
    explicit MixedTargets(const std::string& what) : Error(what) {}
};

/// All values of a Gibbs site conditional carry zero mass.
class EmptyConditional : public Error {
public:
    explicit EmptyConditional(const std::string& what) : Error(what) {}
};

/// Every particle weight is zero at some filter step.
class AllWeightsZero : public Error {
public:
    explicit AllWeightsZero(const std::string& what) : Error(what) {}
};

/// A particle filter history violates its structural invariants.
class InconsistentHistory : public Error {
public:
    explicit InconsistentHistory(const std::string& what) : Error(what) {}
};

/// Observed sequence has zero probability under the model.
class ZeroEvidence : public Error {
public:
    explicit ZeroEvidence(const std::string& what) : Error(what) {}
};

class SingularCovariance : public Error {
public:
    explicit SingularCovariance(const std::string& what) : Error(what) {}
};

/// Invalid experiment configuration; carries one message per offending field.
class ConfigError : public Error {
public:
    explicit ConfigError(std::vector<std::string> errors)
        : Error(join(errors)), errors_(std::move(errors)) {}
    const std::vector<std::string>& errors() const { return errors_; }

private:
    static std::string join(const std::vector<std::string>& errors) {
        std::string out = "invalid config:";
        for (const auto& e : errors) {
            out += "\n  " + e;
        }
        return out;
    }
    std::vector<std::string> errors_;
};

}  // namespace subjdiv
