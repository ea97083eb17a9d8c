#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace shh {

enum class ErrorCode {
  EmptyReference,
  EmptyCorpus,
  MissingGer,
  InvalidChoice,
  MissingHypothesis,
  MissingOptions,
  EmptyTarget,
  NoActionToken,
  UnknownTool,
  Unparseable,
  Ambiguous,
  Timeout,
  HttpStatus,
  MalformedResponse,
  FixtureMiss,
  BackendError,
  ConfigError,
  MaxDepthExceeded,
  ToolTimeout,
  ToolFailure,
  DuplicateTool,
  MissingGold,
  LengthMismatch,
  SchemaError,
  InvalidArgument,
  IoError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyReference: return "EmptyReference";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::MissingGer: return "MissingGer";
    case ErrorCode::InvalidChoice: return "InvalidChoice";
    case ErrorCode::MissingHypothesis: return "MissingHypothesis";
    case ErrorCode::MissingOptions: return "MissingOptions";
    case ErrorCode::EmptyTarget: return "EmptyTarget";
    case ErrorCode::NoActionToken: return "NoActionToken";
    case ErrorCode::UnknownTool: return "UnknownTool";
    case ErrorCode::Unparseable: return "Unparseable";
    case ErrorCode::Ambiguous: return "Ambiguous";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::HttpStatus: return "HttpStatus";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::FixtureMiss: return "FixtureMiss";
    case ErrorCode::BackendError: return "BackendError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::MaxDepthExceeded: return "MaxDepthExceeded";
    case ErrorCode::ToolTimeout: return "ToolTimeout";
    case ErrorCode::ToolFailure: return "ToolFailure";
    case ErrorCode::DuplicateTool: return "DuplicateTool";
    case ErrorCode::MissingGold: return "MissingGold";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-readable code so it
/// can be written to error sidecars and matched in tests.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, int http_status = 0)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        http_status_(http_status),
        message_(message) {}

  ErrorCode code() const noexcept { return code_; }
  // what() without the code prefix.
  const std::string& message() const noexcept { return message_; }
  // Only meaningful for ErrorCode::HttpStatus.
  int http_status() const noexcept { return http_status_; }

  // True for failures that a retry may cure.
  bool transient() const noexcept {
    return code_ == ErrorCode::Timeout ||
           (code_ == ErrorCode::HttpStatus && http_status_ >= 500);
  }

 private:
  ErrorCode code_;
  int http_status_;
  std::string message_;
};

}  // namespace shh
