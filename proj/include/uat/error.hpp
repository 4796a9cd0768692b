#pragma once

#include <stdexcept>
#include <string>

namespace uat {

// Base for everything thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Exit code 1: the caller gave us something unusable.
struct ConfigError : Error {
    using Error::Error;
};
struct ValidationError : Error {
    using Error::Error;
};
struct ParseError : ValidationError {
    using ValidationError::ValidationError;
};

// Exit code 2: the run itself failed.
struct IoError : Error {
    using Error::Error;
};
struct TrainingError : Error {
    using Error::Error;
};
struct AttackError : Error {
    using Error::Error;
};
struct GenerationError : Error {
    using Error::Error;
};
struct ShapeError : Error {
    using Error::Error;
};
struct IndexError : Error {
    using Error::Error;
};

inline int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ValidationError*>(&e))
        return 1;
    return 2;
}

} // namespace uat
