#ifndef QOSEC_OPTIMIZER_HPP
#define QOSEC_OPTIMIZER_HPP

#include <cstdint>
#include <optional>
#include <vector>

#include "qosec/rng.hpp"
#include "qosec/system_model.hpp"

namespace qosec {

// Minimization instance: find the transmit strategy with the smallest
// analytic violation probability subject to the interception budget, the
// admissible SNR window for both powers, and the frame-length divisibility
// constraint.
struct OptProblem {
    SystemConfig cfg;
    ImageSpec img;
    EveScenario scenario;
    double eps_IP = 0.1; // interception-probability budget, in (0,1)

    void validate() const;
};

// Search hyperparameters. Defaults are tuned for the 5-gene encoding; all
// are overridable through configuration.
struct GaSettings {
    int population = 60;
    int generations = 120;
    int tournament = 3;       // selection pool size
    double crossover_prob = 0.9;
    double sbx_eta = 15.0;    // spread of the simulated-binary crossover
    double mutation_prob = 0.1;  // per gene
    double mutation_scale = 0.1; // stddev as a fraction of the gene's box
    double penalty = 1e3;     // weight per unit of constraint violation

    void validate() const;
};

// Optional per-gene pins. A pinned gene is fixed at the given value and
// consumes no randomness, so pinned and free runs are comparable draw by
// draw. Normalized coordinates: powers as P/(sigma_n*gamma_max), the slot
// threshold as nu/(4*n_T), the frame length as an index into the ascending
// divisors of N_roi.
struct GenePins {
    std::optional<double> zeta;
    std::optional<double> p_pub_norm;
    std::optional<double> p_sec_norm;
    std::optional<double> nu_norm;
    std::optional<int> ls_index;
};

struct OptResult {
    TxParams tx_star;
    double qvp_star = 1.0;
    bool feasible = false;
    long long evaluations = 0;
    // Best penalized objective after initialization and after each
    // generation; non-increasing because elites survive unchanged.
    std::vector<double> history;
};

// Genetic search over the full encoding.
OptResult solve(const OptProblem& problem, const GaSettings& settings, Rng& rng);

// Genetic search with selected genes frozen. With every gene pinned the
// search degenerates to a single evaluation.
OptResult solve_pinned(const OptProblem& problem, const GaSettings& settings,
                       Rng& rng, const GenePins& pins);

// Reference strategies: maximum power pins both SNRs at the top of the
// admissible window; equal power pins the beam split at one half. The
// remaining genes are optimized with the same budget.
OptResult baseline_mp(const OptProblem& problem, const GaSettings& settings,
                      Rng& rng);
OptResult baseline_ep(const OptProblem& problem, const GaSettings& settings,
                      Rng& rng);

} // namespace qosec

#endif
