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

#include <cstdint>
#include <string>
#include <vector>

namespace bvqo {

/// Integral values print without decimals, everything else with two.
std::string format_number(double v);

/// Pack an integer tuple into bytes usable as a hash map key.
std::string pack_key(const int64_t* tuple, size_t arity);

/// Order-insensitive 64-bit content hash helpers.
uint64_t hash_combine(uint64_t seed, uint64_t v);

}  // namespace bvqo
