#include "qosec/special_math.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>

#include "qosec/errors.hpp"

namespace qosec {

namespace {

std::atomic<std::uint64_t> g_clamp_count{0};

// P(a,x) by the ascending series; converges fast for x < a + 1.
double reg_lower_series(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int i = 0; i < 500; ++i) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::abs(del) < std::abs(sum) * 1e-16)
            return sum * std::exp(a * std::log(x) - x - log_gamma(a));
    }
    throw NumericalError("incomplete gamma series failed to converge");
}

// Q(a,x) by Lentz's continued fraction; preferred for x >= a + 1.
double reg_upper_cf(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-16)
            return h * std::exp(a * std::log(x) - x - log_gamma(a));
    }
    throw NumericalError("incomplete gamma continued fraction failed to converge");
}

} // namespace

double gamma_fn(double x) {
    if (!(x > 0.0)) throw std::domain_error("gamma_fn requires x > 0");
    return std::tgamma(x);
}

double log_gamma(double x) {
    if (!(x > 0.0)) throw std::domain_error("log_gamma requires x > 0");
#if defined(__GLIBC__) || defined(__APPLE__)
    int sign = 0;
    return ::lgamma_r(x, &sign);
#else
    return std::lgamma(x);
#endif
}

double regularized_lower_gamma(double a, double x) {
    if (!(a > 0.0) || !(x >= 0.0))
        throw std::domain_error("regularized_lower_gamma requires a > 0, x >= 0");
    if (x == 0.0) return 0.0;
    if (x < a + 1.0) return reg_lower_series(a, x);
    return 1.0 - reg_upper_cf(a, x);
}

double regularized_upper_gamma(double a, double x) {
    if (!(a > 0.0) || !(x >= 0.0))
        throw std::domain_error("regularized_upper_gamma requires a > 0, x >= 0");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - reg_lower_series(a, x);
    return reg_upper_cf(a, x);
}

double lower_incomplete_gamma(double a, double x) {
    return regularized_lower_gamma(a, x) * gamma_fn(a);
}

double upper_gamma_quantile(double a, double q) {
    if (!(q > 0.0) || !(q < 1.0)) throw std::domain_error("upper_gamma_quantile: q in (0,1)");
    double hi = a + 1.0;
    while (regularized_upper_gamma(a, hi) > q) hi *= 2.0;
    double lo = 0.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (regularized_upper_gamma(a, mid) > q)
            lo = mid;
        else
            hi = mid;
        if (hi - lo < 1e-12 * (1.0 + hi)) break;
    }
    return hi;
}

double beta_fn(double m, double n) {
    if (!(m > 0.0) || !(n > 0.0)) throw std::domain_error("beta_fn requires m, n > 0");
    return std::exp(log_gamma(m) + log_gamma(n) - log_gamma(m + n));
}

double confluent_u(double a, double b, double z, const QuadratureSpec& spec) {
    if (!(a > 0.0)) throw UnsupportedError("confluent_u requires a > 0");
    if (!(z > 0.0)) throw std::domain_error("confluent_u requires z > 0");
    const double p = b - a - 1.0;
    // head: t in [0,1] with t = x^{1/a}, removing the t^{a-1} singularity
    const double inv_a = 1.0 / a;
    auto head = [&](double x) {
        if (x <= 0.0) return 0.0;
        const double t = std::pow(x, inv_a);
        return std::exp(-z * t) * std::pow(1.0 + t, p) * inv_a;
    };
    // For large z the integrand is a spike of width ~1/z at the origin that
    // a panel spanning [0,1] would sample as identically zero; split at the
    // point where e^{-z t} has fully decayed so the spike gets its own panel.
    double value;
    const double t_star = 45.0 / z;
    if (t_star < 1.0) {
        const double x_split = std::pow(t_star, a);
        value = integrate(head, 0.0, x_split, spec) +
                integrate(head, x_split, 1.0, spec);
    } else {
        value = integrate(head, 0.0, 1.0, spec);
    }
    // tail: t in [1,inf) with t = e^u - 1; stops once e^{-zt} underflows
    const double u_cap = std::log1p(780.0 / z);
    const double u_lo = std::log(2.0);
    if (u_cap > u_lo) {
        auto tail = [&](double u) {
            const double eu = std::exp(u);
            const double t = eu - 1.0;
            return std::exp(-z * t + p * u + (a - 1.0) * std::log(t)) * eu;
        };
        value += integrate(tail, u_lo, u_cap, spec);
    }
    return value * std::exp(-log_gamma(a));
}

double whittaker_w(double k, double m, double z, const QuadratureSpec& spec) {
    if (!(z > 0.0)) throw std::domain_error("whittaker_w requires z > 0");
    const double a = m - k + 0.5;
    if (!(a > 0.0))
        throw UnsupportedError("whittaker_w: integral representation needs m - k + 1/2 > 0");
    const double u = confluent_u(a, 1.0 + 2.0 * m, z, spec);
    return std::exp(-0.5 * z + (m + 0.5) * std::log(z)) * u;
}

double poisson_ccdf_sum(int n, double nu) {
    if (n < 1) throw std::domain_error("poisson_ccdf_sum requires n >= 1");
    if (!(nu >= 0.0)) throw std::domain_error("poisson_ccdf_sum requires nu >= 0");
    if (nu == 0.0) return 1.0;
    double term = std::exp(-nu);
    double sum = term;
    for (int i = 1; i < n; ++i) {
        term *= nu / static_cast<double>(i);
        sum += term;
    }
    return clamp_probability(sum);
}

double clamp_probability(double p) {
    if (p < 0.0) {
        ++g_clamp_count;
        return 0.0;
    }
    if (p > 1.0) {
        ++g_clamp_count;
        return 1.0;
    }
    return p;
}

std::uint64_t clamp_warning_count() { return g_clamp_count.load(); }

void reset_clamp_warnings() { g_clamp_count.store(0); }

} // namespace qosec
