#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace clarion {

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data. Carries the source location when
/// the problem comes from a file.
class DataError : public Error {
  public:
    explicit DataError(std::string const &message) : Error(message) {}
    DataError(std::string const &source, std::size_t line, std::string const &message)
        : Error(source + ":" + std::to_string(line) + ": " + message), source_(source), line_(line)
    {
    }

    [[nodiscard]] std::string const &source() const noexcept { return source_; }
    [[nodiscard]] std::size_t line() const noexcept { return line_; }

  private:
    std::string source_;
    std::size_t line_ = 0;
};

class UsageError : public Error {
  public:
    using Error::Error;
};

/// Failure talking to a remote judge/summarizer endpoint.
class RemoteError : public Error {
  public:
    RemoteError(std::string endpoint, std::string const &message)
        : Error(endpoint + ": " + message), endpoint_(std::move(endpoint))
    {
    }

    [[nodiscard]] std::string const &endpoint() const noexcept { return endpoint_; }

  private:
    std::string endpoint_;
};

} // namespace clarion
