#pragma once

#include <stdexcept>
#include <string>

namespace netres {

// Shapes of matrices or channel maps do not line up.
class DimensionError : public std::invalid_argument {
public:
    explicit DimensionError(const std::string& what) : std::invalid_argument(what) {}
};

// A numerical routine could not produce a trustworthy answer (singular loop,
// Hamiltonian eigenvalues on the imaginary axis, eigensolver failure, ...).
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// A documented precondition of an algorithm is violated by the input model.
class PreconditionError : public std::domain_error {
public:
    explicit PreconditionError(const std::string& what) : std::domain_error(what) {}
};

} // namespace netres
