#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace genpod {

/// Operand shapes do not fit together (tensor dims, factor sizes, ranks).
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A matrix expected to be symmetric positive definite is not.
class IndefiniteError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A linear system A y = f could not be solved. Carries the grid
/// multi-index of the offending node when raised from a sweep.
class SingularSystemError : public std::runtime_error {
public:
    explicit SingularSystemError(const std::string& what,
                                 std::vector<std::size_t> node = {})
        : std::runtime_error(what), node_(std::move(node)) {}

    const std::vector<std::size_t>& node() const noexcept { return node_; }

private:
    std::vector<std::size_t> node_;
};

/// Adaptive integration did not reach the requested tolerance.
class IntegrationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad user input: parameters, configuration keys, model setup.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace genpod
