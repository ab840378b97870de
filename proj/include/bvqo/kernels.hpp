/*
 * Copyright (c) the bvqo authors.
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

#include <cstddef>
#include <cstdint>

// Batch kernels for the bitvector-filter hot loops. Each kernel has a scalar
// reference implementation and may have an AVX2 variant; the dispatcher picks
// one at load time based on cpuid. All variants are bit-exact equivalents.
namespace bvqo::kernels {

enum class Isa { Scalar, Avx2 };

/// ISA selected by the dispatcher (AVX2 when the CPU supports it).
Isa active_isa();

/// Force a specific ISA, e.g. to compare variants in tests. Returns the
/// previously active one. Requesting an unsupported ISA falls back to scalar.
Isa force_isa(Isa isa);

/// Single-value 64-bit finalizer (splitmix64). Kernels and hash tables share
/// it so filter membership is consistent across scalar and SIMD paths.
constexpr uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// out[i] = mix64(in[i]).
void mix64_batch(const uint64_t* in, uint64_t* out, size_t n);

/// Blocked membership probe against a Bloom bit array of 2^log2_bits bits.
/// keys are pre-mixed 64-bit hashes; probe i tests bit (h1 + i*h2) for
/// k probes per key (double hashing). hit[i] = 1 if all probed bits set.
void bloom_probe_batch(const uint64_t* words, uint32_t log2_bits, uint32_t k,
                       const uint64_t* keys, size_t n, uint8_t* hit);

/// Number of nonzero bytes in mask[0..n).
size_t count_nonzero(const uint8_t* mask, size_t n);

// Reference implementations, exposed for equivalence tests.
namespace scalar {
void mix64_batch(const uint64_t* in, uint64_t* out, size_t n);
void bloom_probe_batch(const uint64_t* words, uint32_t log2_bits, uint32_t k,
                       const uint64_t* keys, size_t n, uint8_t* hit);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
bool supported();
void mix64_batch(const uint64_t* in, uint64_t* out, size_t n);
void bloom_probe_batch(const uint64_t* words, uint32_t log2_bits, uint32_t k,
                       const uint64_t* keys, size_t n, uint8_t* hit);
}  // namespace avx2
#endif

}  // namespace bvqo::kernels
