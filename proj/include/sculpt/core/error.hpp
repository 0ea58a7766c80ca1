// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace sculpt {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input text; carries the 1-based line (0 when not line oriented).
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class GeometryError : public Error {
public:
    using Error::Error;
};

class NotFound : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// The request conflicts with work in progress.
class ConflictError : public Error {
public:
    using Error::Error;
};

/// Malformed edit program. `record()` is the 0-based index of the offending
/// record, or empty when the problem is at the top level.
class ProgramParseError : public Error {
public:
    ProgramParseError(std::optional<std::size_t> record, const std::string& what)
        : Error(record ? "record " + std::to_string(*record) + ": " + what : what), record_(record) {}
    std::optional<std::size_t> record() const noexcept { return record_; }

private:
    std::optional<std::size_t> record_;
};

/// A well-formed record failed while executing.
class ExecutionError : public Error {
public:
    ExecutionError(std::size_t record, const std::string& what)
        : Error("record " + std::to_string(record) + ": " + what), record_(record) {}
    std::size_t record() const noexcept { return record_; }

private:
    std::size_t record_;
};

/// Failure inside a diffusion loop at timestep `step`.
class EnhancementError : public Error {
public:
    EnhancementError(int step, const std::string& what)
        : Error("step " + std::to_string(step) + ": " + what), step_(step) {}
    int step() const noexcept { return step_; }

private:
    int step_;
};

} // namespace sculpt
