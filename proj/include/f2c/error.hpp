#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace f2c {

enum class ErrorCode {
  // preprocess / io
  Io,
  Schema,
  // agent_core
  MissingTemplate,
  UnboundPlaceholder,
  EmptyResponse,
  NoCodeBlockFound,
  NoVerdict,
  // llm_backend
  Network,
  RateLimited,
  AuthFailure,
  ScriptExhausted,
  ReplayMismatch,
  BackendError,
  // sandbox
  ToolchainMissing,
  BinaryMissing,
  // refine
  BudgetExhausted,
  PreconditionViolation,
  // dataset / eval / config
  MalformedDialogue,
  WeightError,
  MissingTests,
  Config,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  // The message without the code prefix. For UnboundPlaceholder this is the
  // missing key, for ToolchainMissing the missing tool name.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace f2c
