// Copyright 2026 The clinbias Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace clinbias {

enum class ErrorKind {
  kParse,
  kStructural,
  kLookup,
  kValidation,
  kPrecondition,
  kTemplate,
  kIncomplete,
  kTransport,
  kCapability,
  kIo,
};

// Base of every error raised by the library. The kind drives the CLI exit
// code (see exit_code_for).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define CLINBIAS_DEFINE_ERROR(Name, Kind)                                   \
  class Name : public Error {                                               \
   public:                                                                  \
    explicit Name(const std::string& message) : Error(Kind, message) {}     \
  };

CLINBIAS_DEFINE_ERROR(ParseError, ErrorKind::kParse)
CLINBIAS_DEFINE_ERROR(StructuralError, ErrorKind::kStructural)
CLINBIAS_DEFINE_ERROR(LookupError, ErrorKind::kLookup)
CLINBIAS_DEFINE_ERROR(ValidationError, ErrorKind::kValidation)
CLINBIAS_DEFINE_ERROR(PreconditionError, ErrorKind::kPrecondition)
CLINBIAS_DEFINE_ERROR(TemplateError, ErrorKind::kTemplate)
CLINBIAS_DEFINE_ERROR(IncompleteError, ErrorKind::kIncomplete)
CLINBIAS_DEFINE_ERROR(IoError, ErrorKind::kIo)

#undef CLINBIAS_DEFINE_ERROR

// Backend/network failure. Retriable errors are worth another attempt
// (timeouts, 5xx, connection refused).
class TransportError : public Error {
 public:
  TransportError(const std::string& message, bool retriable = true)
      : Error(ErrorKind::kTransport, message), retriable_(retriable) {}
  bool retriable() const noexcept { return retriable_; }

 private:
  bool retriable_;
};

class CapabilityError : public Error {
 public:
  explicit CapabilityError(const std::string& message)
      : Error(ErrorKind::kCapability, message) {}
};

// CLI exit-code contract: 0 success, 2 validation, 3 backend, 4 incomplete.
inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kTransport:
    case ErrorKind::kCapability:
      return 3;
    case ErrorKind::kIncomplete:
      return 4;
    default:
      return 2;
  }
}

}  // namespace clinbias
