#ifndef QOSEC_QUADRATURE_HPP
#define QOSEC_QUADRATURE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <queue>
#include <vector>

#include "qosec/errors.hpp"

namespace qosec {

struct QuadratureSpec {
    double abs_tol = 1e-10;
    double rel_tol = 1e-8;
    int max_subdivisions = 2000;
};

namespace detail {

// Gauss-Kronrod 7/15 nodes and weights on [-1,1] (QUADPACK constants).
inline constexpr double kGk15Nodes[8] = {
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000};

inline constexpr double kGk15Weights[8] = {
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714};

inline constexpr double kGauss7Weights[4] = {
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327};

template <class F>
void gk15(F& f, double a, double b, double& value, double& error) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    double fv[15];
    for (int i = 0; i < 7; ++i) {
        fv[i] = f(c - h * kGk15Nodes[i]);
        fv[14 - i] = f(c + h * kGk15Nodes[i]);
    }
    fv[7] = f(c);
    double kronrod = 0.0;
    for (int i = 0; i < 7; ++i) kronrod += kGk15Weights[i] * (fv[i] + fv[14 - i]);
    kronrod += kGk15Weights[7] * fv[7];
    double gauss = kGauss7Weights[3] * fv[7];
    for (int i = 0; i < 3; ++i)
        gauss += kGauss7Weights[i] * (fv[2 * i + 1] + fv[13 - 2 * i]);
    value = kronrod * h;
    error = std::abs((kronrod - gauss) * h);
}

struct Segment {
    double a, b, value, error;
    bool operator<(const Segment& o) const { return error < o.error; }
};

} // namespace detail

// Adaptive Gauss-Kronrod on a finite interval, worst-segment-first refinement.
template <class F>
double integrate(F&& f, double a, double b, const QuadratureSpec& spec = {}) {
    if (a == b) return 0.0;
    detail::Segment root{};
    root.a = a;
    root.b = b;
    detail::gk15(f, a, b, root.value, root.error);
    std::priority_queue<detail::Segment> heap;
    heap.push(root);
    double total = root.value;
    double total_err = root.error;
    int splits = 0;
    while (total_err > std::max(spec.abs_tol, spec.rel_tol * std::abs(total))) {
        if (++splits > spec.max_subdivisions)
            throw NumericalError("quadrature failed to converge");
        detail::Segment worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        detail::Segment left{}, right{};
        left.a = worst.a;
        left.b = mid;
        right.a = mid;
        right.b = worst.b;
        detail::gk15(f, left.a, left.b, left.value, left.error);
        detail::gk15(f, right.a, right.b, right.value, right.error);
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        if (!std::isfinite(total)) throw NumericalError("quadrature: non-finite integrand");
    }
    return total;
}

// Integral over [0, inf) through the substitution t = e^u - 1, advancing in
// unit u-segments until the running tail is negligible. Integrands must decay
// (exponentially or faster than 1/t) for this to terminate.
template <class F>
double integrate_zero_to_inf(F&& f, const QuadratureSpec& spec = {}) {
    auto g = [&f](double u) {
        const double eu = std::exp(u);
        return f(eu - 1.0) * eu;
    };
    double acc = 0.0;
    int quiet = 0;
    for (int k = 0; k < 64; ++k) {
        const double part = integrate(g, static_cast<double>(k), static_cast<double>(k + 1), spec);
        acc += part;
        const double floor = std::max(spec.abs_tol, spec.rel_tol * std::abs(acc));
        quiet = (std::abs(part) < 0.01 * floor + 1e-300) ? quiet + 1 : 0;
        if (quiet >= 3) return acc;
    }
    return acc;
}

} // namespace qosec

#endif
