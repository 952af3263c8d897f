// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace labelcost {

enum class ErrorKind {
  kInvalidArgument,
  kParse,
  kSchema,
  kConfig,
  kIo,
  kInfeasiblePlan,
  kUnsupportedStrategy,
  kPromptTooLong,
  kTransport,
  kMalformedResponse,
  kUnmappableLabel,
  kSimulationImpossible,
  kBudgetExhausted,
  kTraining,
  kDivergence,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// Transport failures are the only ones worth retrying.
  bool retryable() const noexcept { return kind_ == ErrorKind::kTransport; }

 private:
  ErrorKind kind_;
};

class PromptTooLong : public Error {
 public:
  PromptTooLong(std::size_t tokens, std::size_t limit)
      : Error(ErrorKind::kPromptTooLong,
              "prompt has " + std::to_string(tokens) + " tokens, limit is " +
                  std::to_string(limit)),
        overflow_(tokens - limit) {}

  std::size_t overflow() const noexcept { return overflow_; }

 private:
  std::size_t overflow_;
};

class InfeasiblePlan : public Error {
 public:
  InfeasiblePlan(const std::string& message, std::int64_t shortfall_micros)
      : Error(ErrorKind::kInfeasiblePlan, message),
        shortfall_micros_(shortfall_micros) {}

  std::int64_t shortfall_micros() const noexcept { return shortfall_micros_; }

 private:
  std::int64_t shortfall_micros_;
};

}  // namespace labelcost
