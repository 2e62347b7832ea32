#pragma once

#include <stdexcept>
#include <string>

namespace bicert {

// Base class for every error this library throws on purpose.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed arguments: bad dimensions, non-finite values, out-of-range scalars.
struct InputError : Error {
    explicit InputError(const std::string& what) : Error(what) {}
};

// A matrix expected to be symmetric positive definite failed factorization.
struct SingularHessian : Error {
    explicit SingularHessian(const std::string& what) : Error(what) {}
};

// An iterative kernel (power iteration, conjugate gradient) hit its cap.
struct NoConvergence : Error {
    explicit NoConvergence(const std::string& what) : Error(what) {}
};

// The requested operation needs data the input does not carry
// (typically ground truth on a black-box oracle).
struct CapabilityError : Error {
    explicit CapabilityError(const std::string& what) : Error(what) {}
};

// File reading or writing failed; message includes the path.
struct IoError : Error {
    explicit IoError(const std::string& what) : Error(what) {}
};

} // namespace bicert
