#pragma once

#include <stdexcept>
#include <string>

namespace loadnet {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid argument values (negative intensity, g outside (0,1], ...).
class DomainError : public Error {
public:
    using Error::Error;
};

// Vector/matrix dimension mismatches.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Missing sector/pollutant/table entries.
class LookupError : public Error {
public:
    using Error::Error;
};

// Malformed input files; carries a 1-based line number when known.
class ParseError : public Error {
public:
    ParseError(const std::string& msg, int line)
        : Error(line > 0 ? msg + " (line " + std::to_string(line) + ")" : msg), line_(line) {}
    explicit ParseError(const std::string& msg) : ParseError(msg, 0) {}
    int line() const { return line_; }

private:
    int line_ = 0;
};

// Metric has no defined value for the given data (zero variance, constant desired).
class UndefinedMetricError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Model/bundle files that fail to load.
class FormatError : public Error {
public:
    using Error::Error;
};

} // namespace loadnet
