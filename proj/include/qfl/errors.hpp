//
// Copyright 2026 The qfl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef QFL_ERRORS_HPP_
#define QFL_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace qfl {

// Base class for every error raised by the library. The CLI maps
// ConfigError to exit code 2 and everything else to exit code 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A configuration value violates a documented precondition. The message
// names the offending field.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : Error(field + ": " + what), field_(field) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// Bad caller-supplied data (empty batch, feature out of range, ...).
class InputError : public Error {
 public:
  using Error::Error;
};

// Index or dimension mismatch between cooperating objects.
class StructuralError : public Error {
 public:
  using Error::Error;
};

// Malformed file on disk.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Non-finite value produced during a computation.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace qfl

#endif  // QFL_ERRORS_HPP_
