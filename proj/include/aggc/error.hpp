#pragma once

#include <stdexcept>
#include <string>

namespace aggc {

// Base class for every error raised by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A gradient buffer contains NaN or Inf. The clipper refuses to touch such
// gradients: they signal an upstream numerical failure that must surface.
class NonFiniteGradientError : public Error {
public:
    NonFiniteGradientError(std::string group_id, std::string tensor_id)
        : Error("non-finite gradient in group '" + group_id + "', tensor '" + tensor_id + "'"),
          group_id(std::move(group_id)),
          tensor_id(std::move(tensor_id)) {}

    std::string group_id;
    std::string tensor_id;
};

// The step index handed to a stateful clipper did not advance by one.
class StepOutOfOrderError : public Error {
public:
    using Error::Error;
};

class EmptyRegistryError : public Error {
public:
    using Error::Error;
};

class MissingGradientError : public Error {
public:
    explicit MissingGradientError(const std::string& name)
        : Error("parameter '" + name + "' has no gradient"), name(name) {}

    std::string name;
};

class MissingGroupThresholdError : public Error {
public:
    explicit MissingGroupThresholdError(const std::string& group_id)
        : Error("no max_norm configured for group '" + group_id + "'"), group_id(group_id) {}

    std::string group_id;
};

class ShapeMismatchError : public Error {
public:
    using Error::Error;
};

// backward() called without a matching forward() for the same batch.
class StaleForwardStateError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class EmptyInputError : public Error {
public:
    using Error::Error;
};

class WorkloadMismatchError : public Error {
public:
    using Error::Error;
};

}  // namespace aggc
