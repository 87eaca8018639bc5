#pragma once

#include <stdexcept>
#include <string>

namespace mpmgan {

// Error taxonomy mirrors the CLI exit-code map:
//   ConfigError -> 2, NumericAbort -> 3, VersionError -> 4, SemanticError -> 5.
// Everything else is a generic failure.

struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericAbort : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct VersionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SemanticError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace mpmgan
