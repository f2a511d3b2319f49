#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace compforest {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A sampled pair (x, y) violates f(x+y) - f(y) <= theta * x.
class H1Violation : public Error {
public:
    H1Violation(const std::string& what, double x, double y, double excess)
        : Error(what), x_(x), y_(y), excess_(excess) {}
    double x() const { return x_; }
    double y() const { return y_; }
    double excess() const { return excess_; }

private:
    double x_, y_, excess_;
};

class NoSignStabilization : public Error {
public:
    using Error::Error;
};

class ZeroCrossing : public Error {
public:
    ZeroCrossing(const std::string& what, double at) : Error(what), at_(at) {}
    double at() const { return at_; }

private:
    double at_;
};

class NoEntranceBoundary : public Error {
public:
    using Error::Error;
};

class H2Violation : public Error {
public:
    using Error::Error;
};

class QuadratureError : public Error {
public:
    using Error::Error;
};

class ExplosionGuard : public Error {
public:
    using Error::Error;
};

class CensoredInput : public Error {
public:
    using Error::Error;
};

class TooFewSamples : public Error {
public:
    using Error::Error;
};

class InsufficientTail : public Error {
public:
    using Error::Error;
};

class OrderingViolation : public Error {
public:
    OrderingViolation(const std::string& what, std::size_t replica)
        : Error(what), replica_(replica) {}
    std::size_t replica() const { return replica_; }

private:
    std::size_t replica_;
};

/// Configuration parse or validation failure. line() is 0 when the problem
/// is not tied to a specific line.
class ConfigError : public Error {
public:
    ConfigError(const std::string& what, std::size_t line = 0)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

}  // namespace compforest
