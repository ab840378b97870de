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
#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include "bvqo/kernels.hpp"

namespace bvqo::kernels::avx2 {

bool supported() { return __builtin_cpu_supports("avx2") != 0; }

namespace {

// AVX2 has no 64-bit low multiply; compose it from 32x32 products.
inline __m256i mul64(__m256i a, __m256i b) {
  const __m256i lo = _mm256_mul_epu32(a, b);
  const __m256i ahi = _mm256_srli_epi64(a, 32);
  const __m256i bhi = _mm256_srli_epi64(b, 32);
  const __m256i cross =
      _mm256_add_epi64(_mm256_mul_epu32(ahi, b), _mm256_mul_epu32(a, bhi));
  return _mm256_add_epi64(lo, _mm256_slli_epi64(cross, 32));
}

inline __m256i mix64x4(__m256i x) {
  x = _mm256_add_epi64(x, _mm256_set1_epi64x(0x9e3779b97f4a7c15ll));
  x = mul64(_mm256_xor_si256(x, _mm256_srli_epi64(x, 30)),
            _mm256_set1_epi64x(static_cast<long long>(0xbf58476d1ce4e5b9ull)));
  x = mul64(_mm256_xor_si256(x, _mm256_srli_epi64(x, 27)),
            _mm256_set1_epi64x(static_cast<long long>(0x94d049bb133111ebull)));
  return _mm256_xor_si256(x, _mm256_srli_epi64(x, 31));
}

}  // namespace

void mix64_batch(const uint64_t* in, uint64_t* out, size_t n) {
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256i v =
        _mm256_loadu_si256(reinterpret_cast<const __m256i*>(in + i));
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(out + i), mix64x4(v));
  }
  for (; i < n; ++i) out[i] = mix64(in[i]);
}

void bloom_probe_batch(const uint64_t* words, uint32_t log2_bits, uint32_t k,
                       const uint64_t* keys, size_t n, uint8_t* hit) {
  const __m256i mask = _mm256_set1_epi64x(
      static_cast<long long>((uint64_t{1} << log2_bits) - 1));
  const __m256i one = _mm256_set1_epi64x(1);
  const auto* base = reinterpret_cast<const long long*>(words);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256i h1 =
        _mm256_loadu_si256(reinterpret_cast<const __m256i*>(keys + i));
    __m256i h2 = mix64x4(_mm256_xor_si256(
        h1, _mm256_set1_epi64x(0x5851f42d4c957f2dll)));
    h2 = _mm256_or_si256(h2, one);
    __m256i ok = one;
    __m256i h = h1;
    for (uint32_t j = 0; j < k; ++j) {
      const __m256i bit = _mm256_and_si256(h, mask);
      const __m256i word =
          _mm256_i64gather_epi64(base, _mm256_srli_epi64(bit, 6), 8);
      const __m256i shift = _mm256_and_si256(bit, _mm256_set1_epi64x(63));
      ok = _mm256_and_si256(
          ok, _mm256_and_si256(_mm256_srlv_epi64(word, shift), one));
      h = _mm256_add_epi64(h, h2);
    }
    alignas(32) uint64_t lanes[4];
    _mm256_store_si256(reinterpret_cast<__m256i*>(lanes), ok);
    hit[i + 0] = static_cast<uint8_t>(lanes[0]);
    hit[i + 1] = static_cast<uint8_t>(lanes[1]);
    hit[i + 2] = static_cast<uint8_t>(lanes[2]);
    hit[i + 3] = static_cast<uint8_t>(lanes[3]);
  }
  if (i < n) scalar::bloom_probe_batch(words, log2_bits, k, keys + i, n - i,
                                       hit + i);
}

}  // namespace bvqo::kernels::avx2

#endif  // x86_64
