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
#include "bvqo/kernels.hpp"

namespace bvqo::kernels {

namespace scalar {

void mix64_batch(const uint64_t* in, uint64_t* out, size_t n) {
  for (size_t i = 0; i < n; ++i) out[i] = mix64(in[i]);
}

void bloom_probe_batch(const uint64_t* words, uint32_t log2_bits, uint32_t k,
                       const uint64_t* keys, size_t n, uint8_t* hit) {
  const uint64_t mask = (uint64_t{1} << log2_bits) - 1;
  for (size_t i = 0; i < n; ++i) {
    const uint64_t h1 = keys[i];
    const uint64_t h2 = mix64(keys[i] ^ 0x5851f42d4c957f2dull) | 1;
    uint8_t ok = 1;
    uint64_t h = h1;
    for (uint32_t j = 0; j < k; ++j) {
      const uint64_t bit = h & mask;
      ok &= static_cast<uint8_t>((words[bit >> 6] >> (bit & 63)) & 1);
      h += h2;
    }
    hit[i] = ok;
  }
}

}  // namespace scalar

namespace {

struct Dispatch {
  Isa isa;
  void (*mix64_fn)(const uint64_t*, uint64_t*, size_t);
  void (*bloom_fn)(const uint64_t*, uint32_t, uint32_t, const uint64_t*,
                   size_t, uint8_t*);
};

Dispatch make_dispatch(Isa wanted) {
#if defined(__x86_64__) || defined(_M_X64)
  if (wanted == Isa::Avx2 && avx2::supported())
    return {Isa::Avx2, &avx2::mix64_batch, &avx2::bloom_probe_batch};
#endif
  return {Isa::Scalar, &scalar::mix64_batch, &scalar::bloom_probe_batch};
}

Dispatch& dispatch() {
  static Dispatch d = make_dispatch(Isa::Avx2);
  return d;
}

}  // namespace

Isa active_isa() { return dispatch().isa; }

Isa force_isa(Isa isa) {
  Isa prev = dispatch().isa;
  dispatch() = make_dispatch(isa);
  return prev;
}

void mix64_batch(const uint64_t* in, uint64_t* out, size_t n) {
  dispatch().mix64_fn(in, out, n);
}

void bloom_probe_batch(const uint64_t* words, uint32_t log2_bits, uint32_t k,
                       const uint64_t* keys, size_t n, uint8_t* hit) {
  dispatch().bloom_fn(words, log2_bits, k, keys, n, hit);
}

size_t count_nonzero(const uint8_t* mask, size_t n) {
  size_t c = 0;
  for (size_t i = 0; i < n; ++i) c += mask[i] != 0;
  return c;
}

}  // namespace bvqo::kernels
