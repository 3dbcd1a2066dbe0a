//
// Copyright 2026 The dpicl Authors.
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

#ifndef DPICL_ERROR_HPP_
#define DPICL_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace dpicl {

// Bad argument to an operation (rejected before any side effect).
class InvalidParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A Renyi order outside the domain an operation supports.
class UnsupportedOrderError : public InvalidParameterError {
 public:
  using InvalidParameterError::InvalidParameterError;
};

// The requested guarantee cannot be met (e.g. delta_hat <= delta).
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Record validation failure during corpus ingestion.
class IngestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shard partitioning contract violation.
class PartitionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Experiment/config file problems.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// LLM endpoint failures (exhausted retries, hard 4xx, bad payloads).
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A mock could not parse a prompt rendered by this library; signals that
// the prompt templates and the mock parser have drifted apart.
class MockError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An internal accounting invariant would be violated; never recoverable.
class InvariantViolationError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace dpicl

#endif  // DPICL_ERROR_HPP_
