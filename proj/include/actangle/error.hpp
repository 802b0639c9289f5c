#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace actangle {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed expression source. `offset` is the byte offset of the offending token.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : Error(what + " at byte " + std::to_string(offset)), offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

/// Elementary function evaluated outside its domain (log of nonpositive, division by zero, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Caller violated a documented precondition (dimension mismatch, bad tolerance, ...).
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Iterative numerical stage failed (Newton divergence, step exhaustion, rank change, ...).
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Trajectory left the integration bounding box.
class EscapeError : public NumericalError {
public:
    EscapeError(int field, double time)
        : NumericalError("trajectory of field " + std::to_string(field + 1) +
                         " escaped the bounding box at t=" + std::to_string(time)),
          field_(field), time_(time) {}
    int field() const { return field_; }
    double time() const { return time_; }

private:
    int field_;
    double time_;
};

}  // namespace actangle
