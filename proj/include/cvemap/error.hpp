#pragma once

#include <stdexcept>
#include <string>

namespace cvemap {

/// Error categories double as process exit codes for the CLI.
enum class ErrorKind : int {
    usage = 1,
    data = 2,
    upstream = 3,
};

class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

  private:
    ErrorKind kind_;
};

/// Bad arguments, unknown options, invalid configuration.
class UsageError : public Error {
  public:
    explicit UsageError(const std::string& message) : Error(ErrorKind::usage, message) {}
};

/// Malformed or inconsistent input data.
class DataError : public Error {
  public:
    explicit DataError(const std::string& message) : Error(ErrorKind::data, message) {}
};

/// Failure talking to something outside the process (network, scorer, fetcher).
class UpstreamError : public Error {
  public:
    UpstreamError(const std::string& message, bool retryable)
        : Error(ErrorKind::upstream, message), retryable_(retryable) {}

    [[nodiscard]] bool retryable() const noexcept { return retryable_; }

  private:
    bool retryable_;
};

}  // namespace cvemap
