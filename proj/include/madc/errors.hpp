// Copyright 2026 The madc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MADC_ERRORS_HPP
#define MADC_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace madc {

/// Base of every error thrown by the library. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed file contents (bad header, truncated payload, wrong magic).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A value does not fit the on-disk representation.
class CapacityError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration values (impossible geometry, bad ranges).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf encountered in a forward pass, a loss or an optimizer step.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Caller broke a precondition (shape mismatch, empty dataset, ...).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// Dataset cannot satisfy a request (e.g. fewer instances than shots).
class DataError : public Error {
 public:
  using Error::Error;
};

/// No candidate source pixel for contrastive mining.
class MiningError : public Error {
 public:
  using Error::Error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ContractViolation(what);
}

}  // namespace madc

#endif  // MADC_ERRORS_HPP
