#pragma once

#include <stdexcept>
#include <string>

namespace rdae {

/// Caller supplied arguments that violate a documented precondition.
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A computation produced or met values it cannot continue from
/// (non-finite objective, indefinite matrix, ...).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed file contents (IDX headers, checkpoints, CSV).
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A file could not be opened, read or written.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Should be unreachable when preconditions hold.
class InternalError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace rdae
