#pragma once

#include <stdexcept>
#include <string>

namespace shortvid {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numeric argument is outside the operation's domain.
class InvalidParameter : public Error {
public:
    using Error::Error;
};

/// Input data (series, samples, requests) is empty or malformed.
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// The requested problem has no feasible solution (capacity, quota, nodes).
class Infeasible : public Error {
public:
    using Error::Error;
};

/// The result is mathematically undefined for the given input (e.g. a zero denominator).
class UndefinedResult : public Error {
public:
    using Error::Error;
};

/// A scenario or model configuration could not be loaded or is inconsistent.
class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace shortvid
