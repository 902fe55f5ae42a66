#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace plap {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Argument outside the admissible domain of an operation.
class DomainError : public Error {
public:
    explicit DomainError(const std::string& msg) : Error(msg) {}
};

/// Linear solve failed to converge, or a stability restriction was violated.
class SolverError : public Error {
public:
    explicit SolverError(const std::string& msg) : Error(msg) {}
};

/// Cylinder family cannot be built or measured on the given grid.
class ProbeError : public Error {
public:
    explicit ProbeError(const std::string& msg) : Error(msg) {}
};

/// Malformed experiment configuration. `path` names the offending field.
class ConfigError : public Error {
public:
    ConfigError(std::string path, const std::string& msg)
        : Error(path.empty() ? msg : path + ": " + msg), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

/// Report files could not be read or written.
class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

}  // namespace plap
