#ifndef QOSEC_SECRECY_ANALYSIS_HPP
#define QOSEC_SECRECY_ANALYSIS_HPP

#include <vector>

#include "qosec/system_model.hpp"

namespace qosec {

// Closed-form delivery/secrecy analysis. Every function here is pure and
// safe to call concurrently.

// Full decomposition of the quality-violation probability: the chance the
// destination misses its deadline plus the chance the eavesdroppers finish
// first, with the intermediate quantities exposed for inspection.
struct QvpBreakdown {
    double delay_violation = 0.0; // Pr[destination needs more than D_lim slots]
    double intercept_term = 0.0;  // Pr[eavesdroppers finish no later than the destination, within the deadline]
    double qvp = 0.0;             // sum of the two
    long long N_bar_bg = 0;       // expected public-phase length in slots
    long long N_tilde = 0;        // minimum slots for a complete delivery
    double Omega = 0.0;           // per-slot confidential outage probability
    double Lambda = 0.0;          // per-slot eavesdropper failure probability
};

// CDF of the strongest eavesdropper's SINR over the infinite plane
// (independent, non-combining eavesdroppers).
double nce_cdf(const SystemConfig& cfg, const TxParams& tx, double omega);

// Laplace transform of the aggregate eavesdropper SINR (signal-combining
// eavesdroppers); equals 1 at s = 0. Evaluated in a cancellation-free form,
// so it stays finite for arbitrarily large s.
double ce_laplace(const SystemConfig& cfg, const TxParams& tx, double s);

// CCDF of the aggregate eavesdropper SINR via an alternating K-term
// exponential approximation of the hard threshold; clamped to [0, 1].
double ce_ccdf(const SystemConfig& cfg, const TxParams& tx,
               const EveScenario& scenario, double omega);

// Distribution of the number of public packets carried by one public slot,
// conditioned on the slot being public. Finite support.
double p_bg_k(const SystemConfig& cfg, const TxParams& tx, long long k);

// Expected number of slots needed to move N_bg public packets, rounded up.
long long n_bar_bg(const SystemConfig& cfg, const TxParams& tx, long long N_bg);

// Probability that a confidential slot fails to deliver its frame (the
// destination SINR cannot carry L_s packets), conditioned on the slot being
// confidential.
double omega_outage(const SystemConfig& cfg, const TxParams& tx);

// Delivery-time law: pmf of the total slot count T_D at value k, and the
// probability the delivery misses the deadline D_lim.
double pmf_T_D(const SystemConfig& cfg, const TxParams& tx,
               const ImageSpec& img, long long k);
double delay_violation(const SystemConfig& cfg, const TxParams& tx,
                       const ImageSpec& img);

// Probability that one slot yields no confidential frame to the
// eavesdroppers (public slot, or their channel cannot carry the frame).
double lambda_slot_failure(const SystemConfig& cfg, const TxParams& tx,
                           const EveScenario& scenario);

// CDF of the eavesdroppers' completion time T_E at slot k (slot-independent
// capture model).
double cdf_T_E(const SystemConfig& cfg, const TxParams& tx, const ImageSpec& img,
               const EveScenario& scenario, long long k);

// Quality-violation probability with its full breakdown.
QvpBreakdown qvp(const SystemConfig& cfg, const TxParams& tx,
                 const ImageSpec& img, const EveScenario& scenario);

// Probability that a given confidential frame is captured by the
// eavesdroppers (strictly more SINR than the frame's rate requires).
double intercept_probability(const SystemConfig& cfg, const TxParams& tx,
                             const EveScenario& scenario);

// Smallest frame length L_s that divides N_roi and keeps the per-frame
// intercept probability at or below eps_IP. tx.L_s is ignored on input.
int min_secure_Ls(const SystemConfig& cfg, const TxParams& tx,
                  const EveScenario& scenario, double eps_IP, long long N_roi);

// Positive divisors of n in increasing order (n >= 1).
std::vector<long long> divisors_ascending(long long n);

} // namespace qosec

#endif
