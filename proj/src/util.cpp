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
#include "bvqo/util.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>

#include "bvqo/kernels.hpp"

namespace bvqo {

std::string format_number(double v) {
  char buf[64];
  if (std::abs(v) < 1e15 && v == std::floor(v)) {
    std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(v));
  } else {
    std::snprintf(buf, sizeof(buf), "%.2f", v);
  }
  return buf;
}

std::string pack_key(const int64_t* tuple, size_t arity) {
  std::string out(arity * sizeof(int64_t), '\0');
  std::memcpy(out.data(), tuple, arity * sizeof(int64_t));
  return out;
}

uint64_t hash_combine(uint64_t seed, uint64_t v) {
  return kernels::mix64(seed ^ kernels::mix64(v));
}

}  // namespace bvqo
