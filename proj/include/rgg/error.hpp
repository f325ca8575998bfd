/*
 * Copyright 2026 The RGG Authors
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

namespace rgg {

/// Broad failure categories. The C API and the CLI exit codes are derived
/// from these, so a script can tell bad data apart from broken infrastructure.
enum class ErrorKind {
  kValidation,  // malformed input, violated invariant, bad argument
  kNotFound,    // unknown record, case, backbone or provider
  kProvider,    // model service / transport failure
  kIo,          // filesystem
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& message)
      : Error(ErrorKind::kValidation, message) {}
};

class NotFoundError : public Error {
 public:
  explicit NotFoundError(const std::string& message)
      : Error(ErrorKind::kNotFound, message) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error(ErrorKind::kIo, message) {}
};

/// Failure reported by (or while talking to) an external model service.
/// Transport failures are retryable; contract violations are not.
class ProviderError : public Error {
 public:
  ProviderError(std::string provider_id, const std::string& message, bool retryable)
      : Error(ErrorKind::kProvider, provider_id + ": " + message),
        provider_id_(std::move(provider_id)),
        retryable_(retryable) {}

  const std::string& provider_id() const noexcept { return provider_id_; }
  bool retryable() const noexcept { return retryable_; }

 private:
  std::string provider_id_;
  bool retryable_;
};

}  // namespace rgg
