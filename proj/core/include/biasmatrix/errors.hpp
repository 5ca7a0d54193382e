/* Copyright 2026 The biasmatrix Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef BIASMATRIX_ERRORS_HPP_
#define BIASMATRIX_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace biasmatrix {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent configuration, priority spec, or ideal file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Inputs that are well-formed but cannot produce a result (empty
// distribution, mismatched axes, conflicting modifiers).
class DataError : public Error {
 public:
  using Error::Error;
};

// A prompt set needs more variants than the image budget can cover.
class BudgetError : public Error {
 public:
  using Error::Error;
};

// Transport failure, timeout, or protocol violation from a backend.
class BackendError : public Error {
 public:
  using Error::Error;
};

}  // namespace biasmatrix

#endif  // BIASMATRIX_ERRORS_HPP_
