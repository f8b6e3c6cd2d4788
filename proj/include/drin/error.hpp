#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace drin {

/// Base class for every error raised by the engine.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes are incompatible with the requested operation.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// An input that the operation is undefined on, such as a zero-norm vector
/// passed to cosine similarity.
class DegenerateInputError : public Error {
public:
    using Error::Error;
};

/// A forward pass produced an output that cannot be scored (zero-norm final
/// text vertex). Usually means training has blown up.
class DegenerateOutputError : public Error {
public:
    using Error::Error;
};

/// A caller violated an operation's precondition.
class ContractError : public Error {
public:
    using Error::Error;
};

/// Structurally malformed file content (bad JSON, wrong version, missing keys).
class FormatError : public Error {
public:
    using Error::Error;
};

/// Well-formed content whose values break a record invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration or CLI override.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Loss or gradient became non-finite during training.
class DivergenceError : public Error {
public:
    using Error::Error;
};

/// Filesystem failure. Carries the byte offset when the failure is located
/// inside a binary blob.
class IoError : public Error {
public:
    explicit IoError(const std::string& what, std::int64_t offset = -1)
        : Error(offset >= 0 ? what + " (byte offset " + std::to_string(offset) + ")" : what),
          offset_(offset) {}

    std::int64_t offset() const noexcept { return offset_; }

private:
    std::int64_t offset_;
};

} // namespace drin
