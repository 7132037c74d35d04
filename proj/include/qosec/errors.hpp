#ifndef QOSEC_ERRORS_HPP
#define QOSEC_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace qosec {

// Bad or inconsistent user-supplied configuration (rejected before any work).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Structurally valid configuration that admits no solution
// (e.g. public stream can never drain, Pr(good slot) = 0 with data pending).
struct InfeasibleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Evaluation left the supported parameter region of a special function.
struct UnsupportedError : std::domain_error {
    using std::domain_error::domain_error;
};

// Runtime numerical failure: non-finite loss, quadrature non-convergence, ...
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace qosec

#endif
