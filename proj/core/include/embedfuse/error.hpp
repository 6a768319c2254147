#ifndef EMBEDFUSE_ERROR_HPP
#define EMBEDFUSE_ERROR_HPP

#include <stdexcept>
#include <string>

namespace embedfuse {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;

    /// Short machine-readable category, e.g. "dimension" or "format".
    virtual const char* kind() const noexcept { return "error"; }
};

class DimensionError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "dimension"; }
};

/// Corrupt or unrecognised file header.
class FormatError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "format"; }
};

class TruncationError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "truncation"; }
};

/// Well-formed input whose contents violate an invariant (NaN, duplicate id, zero norm).
class DataError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "data"; }
};

/// Invalid configuration. `field()` names the offending setting.
class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& message)
        : Error(field + ": " + message), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }
    const char* kind() const noexcept override { return "config"; }

private:
    std::string field_;
};

class IoError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "io"; }
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
public:
    DivergenceError(std::size_t epoch, const std::string& message)
        : Error(message), epoch_(epoch) {}

    std::size_t epoch() const noexcept { return epoch_; }
    const char* kind() const noexcept override { return "divergence"; }

private:
    std::size_t epoch_;
};

} // namespace embedfuse

#endif
