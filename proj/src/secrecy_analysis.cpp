#include "qosec/secrecy_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "qosec/errors.hpp"
#include "qosec/special_math.hpp"

namespace qosec {

namespace {

constexpr double kPi = 3.14159265358979323846;

EveScenario default_scenario() { return EveScenario{}; }

// Exponent of the strongest-eavesdropper CDF (without the minus sign).
double strongest_exponent(const SystemConfig& cfg, const TxParams& tx, double omega) {
    const double delta = 2.0 / cfg.eta;
    const double beta = kPi * gamma_fn(1.0 + delta);
    const double xi = (1.0 / tx.zeta - 1.0) / (cfg.n_T - 1);
    const double a1 = tx.zeta * tx.P_s / cfg.sigma_n;
    return beta * cfg.lambda_E * std::pow(a1, delta) * std::pow(omega, -delta) *
           std::pow(1.0 + xi * omega, 1.0 - cfg.n_T);
}

// Radial-profile integral behind the aggregate-SINR Laplace transform, in a
// form free of exponential prefactors:
//   B(d, 1-d)/eta * a1 * s * varrho^{d-1} * U(1-d, 3-n_T-d, varsigma*s)
// degenerating to B(d, 1-d)/eta * (a1*s)^d when the noise subspace is off.
double aggregate_profile(const SystemConfig& cfg, const TxParams& tx, double s) {
    const double delta = 2.0 / cfg.eta;
    const double a1 = tx.zeta * tx.P_s / cfg.sigma_n;
    const double b_over_eta = beta_fn(delta, 1.0 - delta) / cfg.eta;
    if (tx.zeta >= 1.0) return b_over_eta * std::pow(a1 * s, delta);
    const double varrho = (1.0 - tx.zeta) * (tx.P_s / cfg.sigma_n) / (cfg.n_T - 1);
    const double varsigma = tx.zeta * (cfg.n_T - 1) / (1.0 - tx.zeta);
    const double u = confluent_u(1.0 - delta, 3.0 - cfg.n_T - delta, varsigma * s);
    return b_over_eta * a1 * s * std::pow(varrho, delta - 1.0) * u;
}

// Negative-binomial weight C(k+m-1, k) p^k (1-p)^m.
double neg_binom_pmf(long long k, long long m, double p) {
    if (k < 0) return 0.0;
    if (m == 0) return k == 0 ? 1.0 : 0.0;
    if (p <= 0.0) return k == 0 ? 1.0 : 0.0;
    if (p >= 1.0) return 0.0;
    const double lg = log_gamma(static_cast<double>(k + m)) -
                      log_gamma(static_cast<double>(k + 1)) -
                      log_gamma(static_cast<double>(m));
    return std::exp(lg + k * std::log(p) + m * std::log1p(-p));
}

long long frames_per_image(const TxParams& tx, const ImageSpec& img) {
    if (img.N_roi % tx.L_s != 0)
        throw ConfigError("tx.L_s: frame length must divide image.N_roi");
    return img.N_roi / tx.L_s;
}

} // namespace

double nce_cdf(const SystemConfig& cfg, const TxParams& tx, double omega) {
    if (!(omega > 0.0)) throw std::domain_error("nce_cdf: omega must be > 0");
    if (cfg.lambda_E == 0.0) return 1.0;
    return clamp_probability(std::exp(-strongest_exponent(cfg, tx, omega)));
}

double ce_laplace(const SystemConfig& cfg, const TxParams& tx, double s) {
    if (s < 0.0) throw std::domain_error("ce_laplace: s must be >= 0");
    if (s == 0.0 || cfg.lambda_E == 0.0) return 1.0;
    return std::exp(-2.0 * kPi * cfg.lambda_E * aggregate_profile(cfg, tx, s));
}

double ce_ccdf(const SystemConfig& cfg, const TxParams& tx,
               const EveScenario& scenario, double omega) {
    if (!(omega > 0.0)) throw std::domain_error("ce_ccdf: omega must be > 0");
    if (cfg.lambda_E == 0.0) return 0.0;
    const int K = scenario.K_terms;
    const double varphi = derive_constants(cfg, tx, scenario).varphi;
    double sum = 0.0;
    double binom = 1.0; // C(K, 0)
    for (int k = 0; k <= K; ++k) {
        const double term = binom * ce_laplace(cfg, tx, k * varphi / omega);
        sum += (k % 2 == 0) ? term : -term;
        binom *= static_cast<double>(K - k) / static_cast<double>(k + 1);
    }
    return clamp_probability(sum);
}

double p_bg_k(const SystemConfig& cfg, const TxParams& tx, long long k) {
    if (k < 0) throw std::domain_error("p_bg_k: k must be >= 0");
    const double p0 = prob_public_slot(cfg, tx);
    if (p0 <= 0.0)
        throw InfeasibleError("p_bg_k: no public slots occur (nu = 0)");
    const auto d = derive_constants(cfg, tx, default_scenario());
    const double gamma_l = std::exp2(static_cast<double>(k) / cfg.ratio_BT_b) - 1.0;
    const double gamma_u =
        std::min(d.kappa_p * tx.nu,
                 std::exp2(static_cast<double>(k + 1) / cfg.ratio_BT_b) - 1.0);
    if (!(gamma_l < gamma_u)) return 0.0;
    const double hi = regularized_lower_gamma(cfg.n_T, gamma_u / d.kappa_p);
    const double lo = regularized_lower_gamma(cfg.n_T, gamma_l / d.kappa_p);
    return clamp_probability((hi - lo) / p0);
}

long long n_bar_bg(const SystemConfig& cfg, const TxParams& tx, long long N_bg) {
    if (N_bg < 0) throw std::domain_error("n_bar_bg: N_bg must be >= 0");
    if (N_bg == 0) return 0;
    const auto d = derive_constants(cfg, tx, default_scenario());
    // support ends where the lower rate threshold passes the capped SINR
    const double cap = d.kappa_p * tx.nu;
    const long long k_max =
        static_cast<long long>(std::floor(cfg.ratio_BT_b * std::log2(1.0 + cap)));
    double mean = 0.0;
    for (long long k = 1; k <= k_max; ++k) mean += static_cast<double>(k) * p_bg_k(cfg, tx, k);
    if (!(mean > 0.0))
        throw InfeasibleError(
            "n_bar_bg: public slots never carry a whole packet at this nu");
    return static_cast<long long>(std::ceil(static_cast<double>(N_bg) / mean));
}

double omega_outage(const SystemConfig& cfg, const TxParams& tx) {
    const double p1 = prob_confidential_slot(cfg, tx);
    if (p1 <= 0.0)
        throw InfeasibleError("omega_outage: no confidential slots occur");
    const auto d = derive_constants(cfg, tx, default_scenario());
    if (d.theta < d.kappa_s * tx.nu) return 0.0;
    const double hi = regularized_lower_gamma(cfg.n_T, d.theta / d.kappa_s);
    const double lo = regularized_lower_gamma(cfg.n_T, tx.nu);
    return clamp_probability((hi - lo) / p1);
}

double pmf_T_D(const SystemConfig& cfg, const TxParams& tx,
               const ImageSpec& img, long long k) {
    const long long m = frames_per_image(tx, img);
    const long long n_tilde = n_bar_bg(cfg, tx, img.N_bg) + m;
    if (k < n_tilde) return 0.0;
    const double outage = omega_outage(cfg, tx);
    return neg_binom_pmf(k - n_tilde, m, outage);
}

double delay_violation(const SystemConfig& cfg, const TxParams& tx,
                       const ImageSpec& img) {
    const long long m = frames_per_image(tx, img);
    const long long n_tilde = n_bar_bg(cfg, tx, img.N_bg) + m;
    if (img.D_lim < n_tilde) return 1.0;
    const double outage = omega_outage(cfg, tx);
    if (outage >= 1.0) return 1.0;
    double term = neg_binom_pmf(0, m, outage);
    double sum = term;
    for (long long j = 0; j < img.D_lim - n_tilde; ++j) {
        term *= (static_cast<double>(j) + m) / (j + 1.0) * outage;
        sum += term;
    }
    return clamp_probability(1.0 - sum);
}

double lambda_slot_failure(const SystemConfig& cfg, const TxParams& tx,
                           const EveScenario& scenario) {
    const double p1 = prob_confidential_slot(cfg, tx);
    const double theta = derive_constants(cfg, tx, scenario).theta;
    const double capture = (scenario.mode == EveMode::NCE)
                               ? 1.0 - nce_cdf(cfg, tx, theta)
                               : ce_ccdf(cfg, tx, scenario, theta);
    return clamp_probability(1.0 - p1 * capture);
}

double cdf_T_E(const SystemConfig& cfg, const TxParams& tx, const ImageSpec& img,
               const EveScenario& scenario, long long k) {
    const long long m = frames_per_image(tx, img);
    if (k < m) return 0.0;
    const double lam = lambda_slot_failure(cfg, tx, scenario);
    if (lam >= 1.0) return 0.0;
    double term = neg_binom_pmf(0, m, lam);
    double sum = term;
    for (long long j = 0; j < k - m; ++j) {
        term *= (static_cast<double>(j) + m) / (j + 1.0) * lam;
        sum += term;
    }
    return clamp_probability(sum);
}

QvpBreakdown qvp(const SystemConfig& cfg, const TxParams& tx,
                 const ImageSpec& img, const EveScenario& scenario) {
    if (img.N_roi > 0 && prob_confidential_slot(cfg, tx) <= 0.0)
        throw InfeasibleError("qvp: confidential data with no confidential slots");

    QvpBreakdown out;
    const long long m = frames_per_image(tx, img);
    out.N_bar_bg = n_bar_bg(cfg, tx, img.N_bg);
    out.N_tilde = out.N_bar_bg + m;
    out.Omega = omega_outage(cfg, tx);
    out.Lambda = lambda_slot_failure(cfg, tx, scenario);
    out.delay_violation = delay_violation(cfg, tx, img);

    // E[ pmf_T_D(k) * cdf_T_E(k) ] over feasible deadlines, with both
    // negative-binomial series advanced by their term recurrences
    double intercept = 0.0;
    if (img.D_lim >= out.N_tilde && out.Omega < 1.0 && out.Lambda < 1.0) {
        double td_term = neg_binom_pmf(0, m, out.Omega);

        // T_E tail starts at k = m; advance its CDF to k = N_tilde first
        double te_term = neg_binom_pmf(0, m, out.Lambda);
        double te_cdf = te_term;
        for (long long j = 0; j < out.N_tilde - m; ++j) {
            te_term *= (static_cast<double>(j) + m) / (j + 1.0) * out.Lambda;
            te_cdf += te_term;
        }

        for (long long k = out.N_tilde;; ++k) {
            intercept += td_term * std::min(te_cdf, 1.0);
            if (k == img.D_lim) break;
            const long long j_td = k - out.N_tilde;
            td_term *= (static_cast<double>(j_td) + m) / (j_td + 1.0) * out.Omega;
            const long long j_te = k - m;
            te_term *= (static_cast<double>(j_te) + m) / (j_te + 1.0) * out.Lambda;
            te_cdf += te_term;
        }
    }
    out.intercept_term = clamp_probability(intercept);
    out.qvp = clamp_probability(out.delay_violation + out.intercept_term);
    return out;
}

double intercept_probability(const SystemConfig& cfg, const TxParams& tx,
                             const EveScenario& scenario) {
    const double p1 = prob_confidential_slot(cfg, tx);
    const double theta = derive_constants(cfg, tx, scenario).theta;
    const double capture = (scenario.mode == EveMode::NCE)
                               ? 1.0 - nce_cdf(cfg, tx, theta)
                               : ce_ccdf(cfg, tx, scenario, theta);
    return clamp_probability(p1 * capture);
}

int min_secure_Ls(const SystemConfig& cfg, const TxParams& tx,
                  const EveScenario& scenario, double eps_IP, long long N_roi) {
    if (!(eps_IP > 0.0 && eps_IP < 1.0))
        throw ConfigError("eps_IP must lie in (0, 1)");
    if (N_roi < 1) throw ConfigError("min_secure_Ls: N_roi must be >= 1");

    const auto divs = divisors_ascending(N_roi);
    const double p1 = prob_confidential_slot(cfg, tx);
    if (eps_IP >= p1 || cfg.lambda_E == 0.0) return static_cast<int>(divs.front());

    // invert the capture CDF at the required quantile by bisection
    const double target = 1.0 - eps_IP / p1;
    auto capture_cdf = [&](double omega) {
        return (scenario.mode == EveMode::NCE)
                   ? nce_cdf(cfg, tx, omega)
                   : 1.0 - ce_ccdf(cfg, tx, scenario, omega);
    };

    // Even the longest admissible frame has a finite threshold; if the
    // capture probability still exceeds the budget there, no divisor works
    // and the quantile search would chase an unreachable level.
    const double theta_max =
        std::pow(2.0, static_cast<double>(divs.back()) / cfg.ratio_BT_b) - 1.0;
    if (capture_cdf(theta_max) < target) {
        char eps_text[32];
        std::snprintf(eps_text, sizeof eps_text, "%.6g", eps_IP);
        throw InfeasibleError(
            "min_secure_Ls: even L_s = " + std::to_string(divs.back()) +
            " leaves the intercept probability above " + eps_text);
    }

    double lo = 1.0, hi = std::max(1.0, theta_max);
    while (capture_cdf(hi) < target) {
        hi *= 2.0;
        if (hi > 1e18) throw NumericalError("min_secure_Ls: quantile bracket failed");
    }
    while (capture_cdf(lo) > target) {
        lo *= 0.5;
        if (lo < 1e-18) break;
    }
    while (hi - lo > 1e-8 * std::max(1.0, hi)) {
        const double mid = 0.5 * (lo + hi);
        if (capture_cdf(mid) < target)
            lo = mid;
        else
            hi = mid;
    }
    const double bound = cfg.ratio_BT_b * std::log2(1.0 + hi);
    for (long long d : divs) {
        if (static_cast<double>(d) >= bound) return static_cast<int>(d);
    }
    // The feasibility check above guarantees the largest divisor qualifies;
    // reaching this line means `bound` exceeds it only by bisection roundoff.
    return static_cast<int>(divs.back());
}

std::vector<long long> divisors_ascending(long long n) {
    if (n < 1) throw std::domain_error("divisors_ascending: n must be >= 1");
    std::vector<long long> small, large;
    for (long long d = 1; d * d <= n; ++d) {
        if (n % d == 0) {
            small.push_back(d);
            if (d != n / d) large.push_back(n / d);
        }
    }
    small.insert(small.end(), large.rbegin(), large.rend());
    return small;
}

} // namespace qosec
