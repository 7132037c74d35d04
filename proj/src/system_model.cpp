#include "qosec/system_model.hpp"

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>

#include "qosec/errors.hpp"
#include "qosec/special_math.hpp"

namespace qosec {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

void SystemConfig::validate() const {
    if (n_T < 2) throw ConfigError("system.n_T: antenna count must be >= 2");
    if (!(eta > 2.0)) throw ConfigError("system.eta: path-loss exponent must be > 2");
    if (!(lambda_E >= 0.0)) throw ConfigError("system.lambda_E: density must be >= 0");
    if (!(ratio_BT_b > 0.0))
        throw ConfigError("system.ratio_BT_b: symbols-per-packet ratio must be > 0");
    if (!(sigma_n > 0.0)) throw ConfigError("system.sigma_n: noise power must be > 0");
    if (!(r_D > 0.0)) throw ConfigError("system.r_D: link distance must be > 0");
    if (!(rho > 0.0 && rho <= 1.0))
        throw ConfigError("system.rho: correlation must lie in (0, 1]");
    if (!(gamma_min > 0.0 && gamma_min < gamma_max))
        throw ConfigError("system.gamma_min/gamma_max: need 0 < gamma_min < gamma_max");
}

void TxParams::validate(const SystemConfig& cfg) const {
    if (!(zeta > 0.0 && zeta <= 1.0))
        throw ConfigError("tx.zeta: power split must lie in (0, 1]");
    const double snr_p = P_p / cfg.sigma_n;
    const double snr_s = P_s / cfg.sigma_n;
    if (!(snr_s > cfg.gamma_min && snr_s <= cfg.gamma_max))
        throw ConfigError("tx.P_s: confidential SNR outside (gamma_min, gamma_max]");
    if (!(snr_p > cfg.gamma_min && snr_p <= cfg.gamma_max))
        throw ConfigError("tx.P_p: public SNR outside (gamma_min, gamma_max]");
    if (!(nu >= 0.0)) throw ConfigError("tx.nu: gain threshold must be >= 0");
    if (L_s < 1) throw ConfigError("tx.L_s: frame length must be >= 1");
}

void ImageSpec::validate() const {
    if (N_roi < 0) throw ConfigError("image.N_roi: packet count must be >= 0");
    if (N_bg < 0) throw ConfigError("image.N_bg: packet count must be >= 0");
    if (D_lim < 1) throw ConfigError("image.D_lim: delay limit must be >= 1");
    if (N_roi + N_bg < 1)
        throw ConfigError("image: at least one packet is required");
}

void EveScenario::validate() const {
    if (K_terms < 1) throw ConfigError("scenario.K_terms: must be >= 1");
    if (mode == EveMode::CE && K_terms < 5)
        throw ConfigError("scenario.K_terms: aggregate mode needs K_terms >= 5");
}

void validate_scenario(const SystemConfig& cfg, const TxParams& tx,
                       const ImageSpec& image, const EveScenario& scenario) {
    cfg.validate();
    tx.validate(cfg);
    image.validate();
    scenario.validate();
    if (image.N_roi > 0 && image.N_roi % tx.L_s != 0)
        throw ConfigError("tx.L_s: frame length must divide image.N_roi");
}

DerivedConstants derive_constants(const SystemConfig& cfg, const TxParams& tx,
                                  const EveScenario& scenario) {
    const double delta = 2.0 / cfg.eta;
    const double snr_s = tx.P_s / cfg.sigma_n;

    DerivedConstants d{};
    d.beta = kPi * gamma_fn(1.0 + delta);
    d.xi = (1.0 / tx.zeta - 1.0) / (cfg.n_T - 1);
    d.a1 = tx.zeta * snr_s;
    d.varrho = (1.0 - tx.zeta) * snr_s / (cfg.n_T - 1);
    if (tx.zeta < 1.0) {
        d.varsigma = tx.zeta * (cfg.n_T - 1) / (1.0 - tx.zeta);
        d.calB = beta_fn(delta, 1.0 - delta) / cfg.eta *
                 std::pow(d.varrho, (1.0 - cfg.n_T + delta) / 2.0);
    } else {
        // no artificial-noise subspace; consumers branch before using these
        d.varsigma = std::numeric_limits<double>::infinity();
        d.calB = std::numeric_limits<double>::infinity();
    }

    const double r_eta = std::pow(cfg.r_D, cfg.eta);
    const double rho2 = cfg.rho * cfg.rho;
    d.kappa_p = rho2 * tx.P_p / ((1.0 - rho2) * tx.P_p + r_eta * cfg.sigma_n);
    d.kappa_s = rho2 * tx.zeta * tx.P_s / ((1.0 - rho2) * tx.P_s + r_eta * cfg.sigma_n);
    d.theta = std::exp2(static_cast<double>(tx.L_s) / cfg.ratio_BT_b) - 1.0;

    const double k = static_cast<double>(scenario.K_terms);
    d.varphi = k * std::exp(-log_gamma(k + 1.0) / k);
    return d;
}

double prob_confidential_slot(const SystemConfig& cfg, const TxParams& tx) {
    return poisson_ccdf_sum(cfg.n_T, tx.nu);
}

double prob_public_slot(const SystemConfig& cfg, const TxParams& tx) {
    return 1.0 - prob_confidential_slot(cfg, tx);
}

cvec sample_channel_vector(int n_T, Rng& rng) {
    cvec h(static_cast<std::size_t>(n_T));
    const double scale = 1.0 / std::sqrt(2.0);
    for (auto& c : h) {
        const double re = rng.normal() * scale;
        const double im = rng.normal() * scale;
        c = {re, im};
    }
    return h;
}

double sample_estimated_gain(int n_T, Rng& rng) {
    if (n_T < 1) throw std::invalid_argument("sample_estimated_gain: n_T >= 1");
    return rng.gamma(static_cast<double>(n_T));
}

double sinr_destination(const SystemConfig& cfg, const TxParams& tx,
                        double g_hat, FrameKind kind) {
    const double rho2 = cfg.rho * cfg.rho;
    const double r_eta = std::pow(cfg.r_D, cfg.eta);
    if (kind == FrameKind::Confidential)
        return tx.zeta * rho2 * tx.P_s * g_hat /
               ((1.0 - rho2) * tx.P_s + r_eta * cfg.sigma_n);
    return rho2 * tx.P_p * g_hat / ((1.0 - rho2) * tx.P_p + r_eta * cfg.sigma_n);
}

std::vector<double> sample_eve_sinrs(const SystemConfig& cfg, const TxParams& tx,
                                     double r_max, Rng& rng) {
    std::vector<double> out;
    const double mean_count = cfg.lambda_E * kPi * r_max * r_max;
    if (!(mean_count > 0.0)) return out;
    const long long count = rng.poisson(mean_count);
    out.reserve(static_cast<std::size_t>(count));
    const double snr_s = tx.P_s / cfg.sigma_n;
    const double an_scale = (1.0 - tx.zeta) * snr_s / (cfg.n_T - 1);
    for (long long i = 0; i < count; ++i) {
        // distance law of a uniform point on the disc; direction is irrelevant
        const double r = r_max * std::sqrt(rng.uniform01_pos());
        const double u = rng.exponential();
        const double v = rng.gamma(static_cast<double>(cfg.n_T - 1));
        const double path = std::pow(r, -cfg.eta);
        out.push_back(tx.zeta * snr_s * path * u / (an_scale * v * path + 1.0));
    }
    return out;
}

Beamformers build_beamformers(const cvec& h_hat) {
    const std::size_t n = h_hat.size();
    if (n == 0) throw std::invalid_argument("beamformer input is empty");
    double norm2 = 0.0;
    for (const auto& c : h_hat) norm2 += std::norm(c);
    if (!(norm2 > 0.0) || !std::isfinite(norm2))
        throw std::invalid_argument("beamformer input must be a nonzero finite vector");

    std::vector<cvec> basis;
    basis.reserve(n);
    cvec q0(n);
    const double inv_norm = 1.0 / std::sqrt(norm2);
    for (std::size_t i = 0; i < n; ++i) q0[i] = h_hat[i] * inv_norm;
    basis.push_back(q0);

    for (std::size_t k = 0; k < n && basis.size() < n; ++k) {
        cvec v(n, {0.0, 0.0});
        v[k] = {1.0, 0.0};
        // two projection passes keep the basis orthonormal to round-off
        for (int pass = 0; pass < 2; ++pass) {
            for (const auto& q : basis) {
                std::complex<double> proj{0.0, 0.0};
                for (std::size_t i = 0; i < n; ++i) proj += std::conj(q[i]) * v[i];
                for (std::size_t i = 0; i < n; ++i) v[i] -= proj * q[i];
            }
        }
        double vn2 = 0.0;
        for (const auto& c : v) vn2 += std::norm(c);
        if (vn2 > 1e-20) {
            const double s = 1.0 / std::sqrt(vn2);
            for (auto& c : v) c *= s;
            basis.push_back(std::move(v));
        }
    }
    if (basis.size() != n)
        throw NumericalError("noise-subspace basis construction failed");

    Beamformers b;
    b.w.resize(n);
    for (std::size_t i = 0; i < n; ++i) b.w[i] = std::conj(q0[i]);
    b.G.assign(basis.begin() + 1, basis.end());
    return b;
}

double default_r_max_strongest(const SystemConfig& cfg, const TxParams& tx,
                               double omega_min) {
    if (!(omega_min > 0.0))
        throw std::invalid_argument("default_r_max_strongest: omega_min > 0");
    if (cfg.lambda_E <= 0.0) return 1.0;
    const double a1 = tx.zeta * tx.P_s / cfg.sigma_n;
    // radial exceed weight decays as exp(-(omega/a1) r^eta); cut where the
    // remaining fraction of its integral drops below 1e-6
    const double x_star = upper_gamma_quantile(2.0 / cfg.eta, 1e-6);
    return std::pow(x_star * a1 / omega_min, 1.0 / cfg.eta);
}

double default_r_max_aggregate(const SystemConfig& cfg, const TxParams& tx,
                               double omega_min) {
    if (!(omega_min > 0.0))
        throw std::invalid_argument("default_r_max_aggregate: omega_min > 0");
    if (cfg.lambda_E <= 0.0) return 1.0;
    const double a1 = tx.zeta * tx.P_s / cfg.sigma_n;
    // expected aggregate SINR from nodes beyond R is 2 pi lambda a1
    // R^{2-eta}/(eta-2); keep it below 2% of the smallest level of interest
    const double budget = 0.02 * omega_min;
    const double r = std::pow(2.0 * kPi * cfg.lambda_E * a1 / ((cfg.eta - 2.0) * budget),
                              1.0 / (cfg.eta - 2.0));
    return std::max(r, 1.0);
}

} // namespace qosec
