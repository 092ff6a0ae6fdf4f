#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace samodal {

/// Base class for every error raised by the library.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error
{
public:
    using Error::Error;
};

class InvalidArgument : public Error
{
public:
    using Error::Error;
};

/// Raised by (or on behalf of) a model backend. Carries the frame being
/// processed when the failure happened.
class BackendError : public Error
{
public:
    BackendError(std::size_t frame, const std::string& what)
        : Error("frame " + std::to_string(frame) + ": " + what), frame_(frame)
    {
    }

    std::size_t frame() const noexcept { return frame_; }

private:
    std::size_t frame_;
};

/// Malformed input document. `line` is 1-based, 0 when not line oriented.
class FormatError : public Error
{
public:
    FormatError(const std::string& source, std::size_t line, const std::string& what)
        : Error(source + (line ? ":" + std::to_string(line) : std::string()) + ": " + what),
          line_(line)
    {
    }

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace samodal
