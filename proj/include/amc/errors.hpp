#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace amc {

// Exit codes used by the command-line front end.
enum class ExitCode : int {
  kSuccess = 0,
  kConfig = 2,
  kProvider = 3,
  kDataset = 4,
};

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual ExitCode exit_code() const noexcept { return ExitCode::kConfig; }
};

// A value that should satisfy a documented invariant does not.
class InvariantError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Token not present in a closed vocabulary.
class LookupError : public Error {
 public:
  LookupError(const std::string& token, std::size_t position)
      : Error("token '" + token + "' at position " + std::to_string(position) +
              " is not in the vocabulary"),
        token_(token),
        position_(position) {}

  const std::string& token() const noexcept { return token_; }
  std::size_t position() const noexcept { return position_; }
  ExitCode exit_code() const noexcept override { return ExitCode::kProvider; }

 private:
  std::string token_;
  std::size_t position_;
};

class ProviderError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kProvider; }
};

class DatasetError : public Error {
 public:
  DatasetError(const std::string& what, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

  // 1-based line number, 0 when not tied to a line.
  std::size_t line() const noexcept { return line_; }
  ExitCode exit_code() const noexcept override { return ExitCode::kDataset; }

 private:
  std::size_t line_;
};

}  // namespace amc
