// Copyright 2026 The geowarp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace geowarp {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Grids with incompatible shapes were combined.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A value violates a domain invariant (nonpositive depth, NaN pixel, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A masked reduction has no pixels with positive weight.
class DegenerateMaskError : public Error {
 public:
  using Error::Error;
};

/// A scene or run configuration is invalid. `field()` names the offending key.
class InvalidSpecError : public Error {
 public:
  InvalidSpecError(std::string field, const std::string& reason)
      : Error(field + ": " + reason), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Malformed file contents.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Optimization loss blew up relative to the best value seen.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// A gradient handed to the optimizer contained NaN or Inf.
class NonFiniteGradientError : public Error {
 public:
  using Error::Error;
};

}  // namespace geowarp
