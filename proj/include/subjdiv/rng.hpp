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

#include <cstdint>
#include <random>

namespace subjdiv {

using Rng = std::mt19937_64;

// splitmix64 finalizer (Steele, Lea & Flood; Vigna's fixed-increment variant).
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Branch tags for deriving independent streams from one master seed.
namespace stream_tag {
inline constexpr std::uint64_t kReference = 0x7265666572656e63ull;
inline constexpr std::uint64_t kInference = 0x696e666572656e63ull;
inline constexpr std::uint64_t kMeta = 0x6d6574612d696e66ull;
inline constexpr std::uint64_t kKnob = 0x6b6e6f622d737764ull;
inline constexpr std::uint64_t kModel = 0x6d6f64656c2d6669ull;
}  // namespace stream_tag

/// Derives a 64-bit stream seed from (master seed, branch tag, index).
/// Replicate i always sees the same stream regardless of scheduling.
inline std::uint64_t derive_stream_seed(std::uint64_t master, std::uint64_t branch,
                                        std::uint64_t index) {
    std::uint64_t s = master;
    std::uint64_t a = splitmix64(s);
    s = a ^ branch;
    std::uint64_t b = splitmix64(s);
    s = b ^ index;
    return splitmix64(s);
}

inline Rng make_stream(std::uint64_t master, std::uint64_t branch, std::uint64_t index) {
    return Rng(derive_stream_seed(master, branch, index));
}

}  // namespace subjdiv
