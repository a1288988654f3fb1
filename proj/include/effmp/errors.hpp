// Copyright 2026 The effmp Authors
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

#pragma once

#include <stdexcept>
#include <string>

namespace effmp
{

/// Base class of every error thrown by the library.
class Error : public std::runtime_error
{
public:
  explicit Error(const std::string & msg) : std::runtime_error(msg) {}
};

/// Malformed record in a text file.
class ParseError : public Error
{
public:
  explicit ParseError(const std::string & msg) : Error("parse error: " + msg) {}
};

/// A type invariant does not hold.
class ValidationError : public Error
{
public:
  explicit ValidationError(const std::string & msg) : Error("validation error: " + msg) {}
};

class IoError : public Error
{
public:
  explicit IoError(const std::string & msg) : Error("i/o error: " + msg) {}
};

/// Incompatible tensor shapes.
class ShapeError : public Error
{
public:
  explicit ShapeError(const std::string & msg) : Error("shape mismatch: " + msg) {}
};

/// Input outside the mathematical domain of an operation (e.g. log of a non-positive value).
class DomainError : public Error
{
public:
  explicit DomainError(const std::string & msg) : Error("domain error: " + msg) {}
};

/// Fewer than two valid observations in a track.
class InsufficientObservationsError : public Error
{
public:
  explicit InsufficientObservationsError(const std::string & msg)
  : Error("insufficient observations: " + msg)
  {
  }
};

/// The goal sampler found no feasible cell in the requested region.
class NoFeasibleCellsError : public Error
{
public:
  explicit NoFeasibleCellsError(const std::string & msg) : Error("no feasible cells: " + msg) {}
};

}  // namespace effmp
