// Timing comparison between the single-threaded reference estimator and the
// parallel kernel, on the same workload and seed. The two must agree bit for
// bit; the table reports the speedup.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "qosec/protocol_sim.hpp"
#include "qosec/system_model.hpp"

#ifdef QOSEC_HAVE_OPENMP
#include <omp.h>
#endif

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start)
        .count();
}

} // namespace

int main(int argc, char** argv) {
    long long trials = 20000;
    std::uint64_t seed = 1;
    if (argc > 1) trials = std::atoll(argv[1]);
    if (argc > 2) seed = static_cast<std::uint64_t>(std::atoll(argv[2]));
    if (trials < 1) {
        std::fprintf(stderr, "usage: %s [trials] [seed]\n", argv[0]);
        return 2;
    }

    qosec::SystemConfig cfg;
    cfg.n_T = 8;
    cfg.eta = 4.0;
    cfg.lambda_E = 0.2;
    cfg.ratio_BT_b = 6.25;
    cfg.sigma_n = 1.0;
    cfg.r_D = 2.8284271247461903;
    cfg.rho = 0.95;
    cfg.gamma_min = 0.1;
    cfg.gamma_max = 1000.0;

    qosec::TxParams tx;
    tx.zeta = 0.5;
    tx.P_p = 44.0;
    tx.P_s = 44.0;
    tx.nu = 1.0;
    tx.L_s = 10;

    qosec::ImageSpec img;
    img.N_roi = 60;
    img.N_bg = 40;
    img.D_lim = 40;

    qosec::EveScenario scenario; // independent eavesdroppers
    qosec::SimOptions opts;

#ifdef QOSEC_HAVE_OPENMP
    const int workers = omp_get_max_threads();
#else
    const int workers = 1;
#endif
    std::printf("workload: %lld trials, deadline %d, seed %llu, %d worker(s)\n",
                trials, img.D_lim, static_cast<unsigned long long>(seed),
                workers);

    auto t0 = std::chrono::steady_clock::now();
    const qosec::McEstimate serial = qosec::estimate_qvp_serial(
        cfg, tx, img, scenario, opts, trials, seed);
    const double serial_s = seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    const qosec::McEstimate parallel =
        qosec::estimate_qvp(cfg, tx, img, scenario, opts, trials, seed);
    const double parallel_s = seconds_since(t0);

    std::printf("serial:   %.3fs  qvp=%.6f +- %.6f\n", serial_s, serial.value,
                serial.std_err);
    std::printf("parallel: %.3fs  qvp=%.6f +- %.6f\n", parallel_s,
                parallel.value, parallel.std_err);
    std::printf("speedup:  %.2fx\n", serial_s / parallel_s);

    if (serial.value != parallel.value) {
        std::fprintf(stderr,
                     "MISMATCH: serial and parallel estimates differ\n");
        return 1;
    }
    std::printf("estimates identical: yes\n");
    return 0;
}
