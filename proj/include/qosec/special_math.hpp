#ifndef QOSEC_SPECIAL_MATH_HPP
#define QOSEC_SPECIAL_MATH_HPP

#include <cstdint>

#include "qosec/quadrature.hpp"

namespace qosec {

// Gamma function, x > 0.
double gamma_fn(double x);

// log Gamma, x > 0. Thread-safe (does not touch signgam).
double log_gamma(double x);

// Lower incomplete gamma(a, x) = integral_0^x t^{a-1} e^{-t} dt, a > 0, x >= 0.
double lower_incomplete_gamma(double a, double x);

// Regularized forms P = gamma(a,x)/Gamma(a), Q = 1 - P.
double regularized_lower_gamma(double a, double x);
double regularized_upper_gamma(double a, double x);

// Smallest x with regularized_upper_gamma(a, x) <= q. Used for adaptive
// truncation radii. q in (0,1).
double upper_gamma_quantile(double a, double q);

// Euler beta.
double beta_fn(double m, double n);

// Tricomi confluent hypergeometric U(a,b,z) via its real-axis integral
// representation; requires a > 0 and z > 0 (b unrestricted). The endpoint
// singularity t^{a-1} is removed exactly by the power substitution t = x^{1/a};
// the tail uses the exponential substitution.
double confluent_u(double a, double b, double z, const QuadratureSpec& spec = {});

// Whittaker W_{k,m}(z) for z > 0 on the region m - k + 1/2 > 0 (which covers
// every parameter pair produced by the interference analysis). Outside that
// region an UnsupportedError is thrown rather than returning garbage.
double whittaker_w(double k, double m, double z, const QuadratureSpec& spec = {});

// e^{-nu} * sum_{i=0}^{n-1} nu^i / i!  ==  Pr[Gamma(n,1) > nu].
double poisson_ccdf_sum(int n, double nu);

// Clamp a computed probability to [0,1]. Out-of-range inputs (alternating-sum
// overshoot and the like) are counted so tests can assert how often it fires.
double clamp_probability(double p);
std::uint64_t clamp_warning_count();
void reset_clamp_warnings();

} // namespace qosec

#endif
