#pragma once

#include <stdexcept>
#include <string>

namespace lwf {

// Base for all library errors. Subclasses map onto CLI exit codes:
// format/data/config -> 2, vocabulary mismatch -> 3, numeric failure -> 4.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

class VocabError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

// Programmer-facing precondition violations (bad shapes, bad scalars).
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace lwf
