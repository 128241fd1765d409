// Exception types shared by every ordinal module.
#pragma once

#include <stdexcept>
#include <string>

namespace ordinal {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor dimensions do not chain or agree.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Non-finite or otherwise malformed numeric input.
class InputError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Class label outside [0, k-1].
class LabelError : public Error {
public:
    using Error::Error;
};

/// Argument outside the mathematical domain of the operation.
class DomainError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

/// The finite-difference oracle saw a non-finite loss.
class OracleError : public Error {
public:
    using Error::Error;
};

class GenerationError : public Error {
public:
    using Error::Error;
};

class SplitError : public Error {
public:
    using Error::Error;
};

class UnsupportedError : public Error {
public:
    using Error::Error;
};

}  // namespace ordinal
