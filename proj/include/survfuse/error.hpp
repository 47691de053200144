#pragma once

#include <stdexcept>
#include <string>

namespace survfuse {

// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Incompatible matrix shapes; the message names the op and the shapes.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Malformed or inconsistent input files / cohorts.
class DataError : public Error {
public:
    using Error::Error;
};

// Invalid configuration (schemas, hyperparameters, experiment specs).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Degenerate statistics: no events, no comparable pairs, empty grids.
class StatError : public Error {
public:
    using Error::Error;
};

// Training aborted: non-finite loss, NaN gradient, infeasible batch.
class TrainError : public Error {
public:
    using Error::Error;
};

// Fold plans do not match in a controlled comparison.
class PlanMismatchError : public Error {
public:
    using Error::Error;
};

} // namespace survfuse
