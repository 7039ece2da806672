#pragma once

#include <stdexcept>
#include <string>

namespace wmlab {

/// Base of every error thrown by the library. The CLI maps it to exit code 1.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A caller violated an operation's precondition (bad argument, bad sizes).
class PreconditionError : public Error {
public:
  using Error::Error;
};

class DimensionError : public PreconditionError {
public:
  using PreconditionError::PreconditionError;
};

class ColorSpaceError : public PreconditionError {
public:
  using PreconditionError::PreconditionError;
};

class DegenerateSpectrumError : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

enum class IoErrc { missing_file, unsupported_format, corrupt_stream, unwritable };

class ImageIoError : public Error {
public:
  ImageIoError(IoErrc code, const std::string &what) : Error(what), code_(code) {}
  IoErrc code() const noexcept { return code_; }

private:
  IoErrc code_;
};

enum class TrainingErrc { empty_dataset, no_specs, diverged };

class TrainingError : public Error {
public:
  TrainingError(TrainingErrc code, const std::string &what) : Error(what), code_(code) {}
  TrainingErrc code() const noexcept { return code_; }

private:
  TrainingErrc code_;
};

enum class RefinerErrc { spawn_failed, nonzero_exit, bad_output, timeout };

class RefinerError : public Error {
public:
  RefinerError(RefinerErrc code, const std::string &what, std::string captured_stderr = {})
      : Error(what), code_(code), stderr_(std::move(captured_stderr)) {}
  RefinerErrc code() const noexcept { return code_; }
  const std::string &captured_stderr() const noexcept { return stderr_; }

private:
  RefinerErrc code_;
  std::string stderr_;
};

} // namespace wmlab
