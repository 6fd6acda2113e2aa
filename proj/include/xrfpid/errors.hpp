#ifndef XRFPID_ERRORS_HPP
#define XRFPID_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace xrfpid {

// Base class for all toolkit errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input file; carries the 1-based line number when known.
struct ParseError : Error {
    ParseError(const std::string& msg, const std::string& file, long line)
        : Error(file + ":" + std::to_string(line) + ": " + msg),
          file_name(file), line_number(line) {}
    explicit ParseError(const std::string& msg)
        : Error(msg), line_number(0) {}
    std::string file_name;
    long line_number;
};

// A value or structure violates a documented invariant.
struct ValidationError : Error {
    using Error::Error;
};

// Vector/tensor length does not match what the pipeline expects.
struct DimensionError : Error {
    using Error::Error;
};

// Query outside the tabulated or supported range.
struct RangeError : Error {
    using Error::Error;
};

// Physics table lacks data required by a library pigment.
struct IncompletePhysicsError : Error {
    using Error::Error;
};

// I/O failure: missing file, short read, bad magic/version.
struct IoError : Error {
    using Error::Error;
};

// Invalid run configuration.
struct ConfigError : Error {
    using Error::Error;
};

// Serialized model shape does not match the expected architecture.
struct ShapeError : Error {
    using Error::Error;
};

}  // namespace xrfpid

#endif
