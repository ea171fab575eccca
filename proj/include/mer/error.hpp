#pragma once

#include <stdexcept>
#include <string>

namespace mer {

// Exit-code taxonomy used by the CLI: 1 = I/O, 2 = numeric/data, 3 = usage.
enum class ErrorKind { Io = 1, Numeric = 2, Usage = 3 };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg)
        : std::runtime_error(msg), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }
    int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(ErrorKind::Io, msg) {}
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& msg) : Error(ErrorKind::Numeric, msg) {}
};

class UsageError : public Error {
public:
    explicit UsageError(const std::string& msg) : Error(ErrorKind::Usage, msg) {}
};

// Non-finite or out-of-domain value fed to a numeric operation.
class InvalidValue : public NumericError {
public:
    explicit InvalidValue(const std::string& msg) : NumericError(msg) {}
};

// WAV input whose sample rate is not the pipeline's 44100 Hz.
class RateMismatch : public IoError {
public:
    explicit RateMismatch(const std::string& msg) : IoError(msg) {}
};

// Annotation value outside [-1, 1] in strict mode.
class ScaleViolation : public NumericError {
public:
    explicit ScaleViolation(const std::string& msg) : NumericError(msg) {}
};

// Mel filterbank configuration where some filter covers no FFT bin.
class DegenerateFilter : public NumericError {
public:
    explicit DegenerateFilter(const std::string& msg) : NumericError(msg) {}
};

// Training loss became NaN/Inf; message names the epoch.
class Diverged : public NumericError {
public:
    Diverged(int epoch, const std::string& msg) : NumericError(msg), epoch_(epoch) {}
    int epoch() const noexcept { return epoch_; }

private:
    int epoch_;
};

}  // namespace mer
