#pragma once
#include <stdexcept>
#include <string>

namespace asl {

// Error taxonomy shared by the library and the command-line driver.
// The driver maps each class to a distinct process exit code:
//   config_error -> 2, numerical_error -> 3, io_error -> 4.

// Invalid user-supplied configuration: malformed files, schema violations,
// out-of-range parameters, inconsistent experiment plans.
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numerical failure at run time: root not bracketed, quadrature that does
// not converge, non-PSD covariance, loss of identifiability.
struct numerical_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Filesystem / stream failures.
struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace asl
