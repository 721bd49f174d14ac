#pragma once

#include <stdexcept>
#include <string>

namespace cfrl {

enum class ErrorKind {
    config,            // invalid configuration or input value
    missing_artifact,  // checkpoint or file not found / unreadable
    numeric,           // NaN/Inf or dimension mismatch in numeric code
    state,             // operation invalid in the current object state
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

class ArtifactError : public Error {
public:
    explicit ArtifactError(const std::string& what)
        : Error(ErrorKind::missing_artifact, what) {}
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error(ErrorKind::numeric, what) {}
};

class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& what) : Error(ErrorKind::numeric, what) {}
};

class StateError : public Error {
public:
    explicit StateError(const std::string& what) : Error(ErrorKind::state, what) {}
};

/// Process exit code for an error kind: 2 config, 3 missing artifact, 4 numeric.
inline int exit_code_for(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::config: return 2;
    case ErrorKind::missing_artifact: return 3;
    case ErrorKind::numeric: return 4;
    case ErrorKind::state: return 4;
    }
    return 1;
}

inline const char* kind_name(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::config: return "config";
    case ErrorKind::missing_artifact: return "missing_artifact";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::state: return "state";
    }
    return "unknown";
}

}  // namespace cfrl
