#ifndef QOSEC_SYSTEM_MODEL_HPP
#define QOSEC_SYSTEM_MODEL_HPP

#include <complex>
#include <vector>

#include "qosec/rng.hpp"

namespace qosec {

using cvec = std::vector<std::complex<double>>;

// Which eavesdropper collusion model is analysed: NCE treats eavesdroppers as
// independent (only the strongest matters), CE lets them combine received
// signals (their SINRs add).
enum class EveMode { NCE, CE };

enum class FrameKind { Public, Confidential };

// Static scenario description: antenna array, propagation, eavesdropper
// density, frame geometry, and the admissible transmit-SNR window.
struct SystemConfig {
    int n_T = 8;             // transmit antennas, >= 2
    double eta = 4.0;        // path-loss exponent, > 2
    double lambda_E = 0.2;   // eavesdroppers per unit area, >= 0
    double ratio_BT_b = 6.25; // channel symbols per packet, > 0
    double sigma_n = 1.0;    // noise power (linear), > 0
    double r_D = 1.0;        // source-destination distance, > 0
    double rho = 0.95;       // channel-estimate correlation, in (0, 1]
    double gamma_min = 1.0;  // smallest admissible transmit SNR (linear)
    double gamma_max = 1000.0; // largest admissible transmit SNR (linear)

    void validate() const; // throws ConfigError naming the offending field
};

// Per-run transmit strategy.
struct TxParams {
    double zeta = 0.5; // fraction of confidential power on the data beam, (0,1]
    double P_p = 1.0;  // public transmit power (linear)
    double P_s = 1.0;  // confidential transmit power (linear)
    double nu = 0.0;   // estimated-gain threshold that switches slot type, >= 0
    int L_s = 1;       // confidential packets per frame, >= 1

    void validate(const SystemConfig& cfg) const;
};

// Workload description: how many packets of each class and the delivery
// deadline in slots.
struct ImageSpec {
    long long N_roi = 0; // confidential packets, >= 0
    long long N_bg = 0;  // public packets, >= 0
    int D_lim = 1;       // delay limit in slots, >= 1

    void validate() const;
};

struct EveScenario {
    EveMode mode = EveMode::NCE;
    int K_terms = 10; // series order for the CE tail approximation

    void validate() const; // K_terms >= 5 when mode == CE
};

// Cross-field checks that span more than one value type (e.g. the frame
// length must divide the confidential packet count).
void validate_scenario(const SystemConfig& cfg, const TxParams& tx,
                       const ImageSpec& image, const EveScenario& scenario);

// Constants shared by the closed-form analysis. All are finite and positive
// when zeta < 1; at zeta == 1 the artificial-noise subspace is empty, so
// varsigma and calB degenerate to +infinity and consumers take the dedicated
// no-noise branch instead of touching them.
struct DerivedConstants {
    double beta;     // pi * Gamma(1 + 2/eta)
    double xi;       // (1/zeta - 1) / (n_T - 1)
    double a1;       // zeta * P_s / sigma_n
    double varrho;   // (1 - zeta) * (P_s / sigma_n) / (n_T - 1)
    double varsigma; // zeta * (n_T - 1) / (1 - zeta)
    double calB;     // B(2/eta, 1 - 2/eta)/eta * varrho^{(1 - n_T + 2/eta)/2}
    double kappa_p;  // destination SINR per unit gain, public frames
    double kappa_s;  // destination SINR per unit gain, confidential frames
    double theta;    // SINR needed to carry L_s packets in one frame
    double varphi;   // K / (K!)^{1/K}, tail-approximation constant
};

DerivedConstants derive_constants(const SystemConfig& cfg, const TxParams& tx,
                                  const EveScenario& scenario);

// Probability that a slot is confidential (the estimated gain clears nu) /
// public (its complement). The two are complementary by construction.
double prob_confidential_slot(const SystemConfig& cfg, const TxParams& tx);
double prob_public_slot(const SystemConfig& cfg, const TxParams& tx);

// One draw of the estimated channel vector (i.i.d. circular complex Gaussian
// entries, unit variance) and of its squared norm, which is Gamma(n_T, 1).
cvec sample_channel_vector(int n_T, Rng& rng);
double sample_estimated_gain(int n_T, Rng& rng);

// Destination SINR for a given estimated gain; linear in g_hat.
double sinr_destination(const SystemConfig& cfg, const TxParams& tx,
                        double g_hat, FrameKind kind);

// Per-eavesdropper SINRs for one confidential slot: Poisson number of nodes
// on a disc of radius r_max, each with beam-aligned fading u ~ Exp(1) and
// noise-subspace fading v ~ Gamma(n_T - 1, 1).
std::vector<double> sample_eve_sinrs(const SystemConfig& cfg, const TxParams& tx,
                                     double r_max, Rng& rng);

// Data beam w (unit norm, aligned with the estimated channel) and the
// orthonormal noise-subspace basis G with w^T G = 0.
struct Beamformers {
    cvec w;
    std::vector<cvec> G; // n_T - 1 columns, each of length n_T
};

Beamformers build_beamformers(const cvec& h_hat);

// Simulation disc radii large enough that the neglected far tail is
// immaterial: for the strongest-eavesdropper statistic the analytic exceed
// weight beyond r_max is under 1e-6 of the total at every level >= omega_min;
// for the summed statistic the expected neglected aggregate SINR is under
// 2% of omega_min.
double default_r_max_strongest(const SystemConfig& cfg, const TxParams& tx,
                               double omega_min);
double default_r_max_aggregate(const SystemConfig& cfg, const TxParams& tx,
                               double omega_min);

} // namespace qosec

#endif
