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

#include <stdexcept>
#include <string>

namespace bvqo {

/// Base class for all bvqo errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed input (JSON/CSV syntax, unknown fields, bad values).
struct ParseError : Error {
  using Error::Error;
};

/// Structurally valid input that violates a contract (unknown relation,
/// duplicate names, selectivity out of range, precondition violations).
struct ValidationError : Error {
  using Error::Error;
};

/// A guardrail tripped (enumeration cap, materialization limit).
struct LimitError : Error {
  using Error::Error;
};

}  // namespace bvqo
