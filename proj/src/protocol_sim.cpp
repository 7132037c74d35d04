#include "qosec/protocol_sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>

#include "qosec/errors.hpp"

namespace qosec {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::vector<long long>& recovered_of(PacketLedger& l, FrameKind k) {
    return k == FrameKind::Confidential ? l.recovered_s : l.recovered_p;
}
std::vector<long long>& unrecovered_of(PacketLedger& l, FrameKind k) {
    return k == FrameKind::Confidential ? l.unrecovered_s : l.unrecovered_p;
}
const std::vector<long long>& unrecovered_of(const PacketLedger& l, FrameKind k) {
    return k == FrameKind::Confidential ? l.unrecovered_s : l.unrecovered_p;
}
const std::vector<long long>& recovered_of(const PacketLedger& l, FrameKind k) {
    return k == FrameKind::Confidential ? l.recovered_s : l.recovered_p;
}

// Packets a public frame can carry at the given destination SINR.
long long public_frame_size(const SystemConfig& cfg, double sinr_p) {
    const double packets = cfg.ratio_BT_b * std::log2(1.0 + sinr_p);
    return static_cast<long long>(std::floor(packets));
}

double eve_sinr_at_radius(const SystemConfig& cfg, const TxParams& tx,
                          double r, Rng& rng) {
    const double snr_s = tx.P_s / cfg.sigma_n;
    const double an_scale = (1.0 - tx.zeta) * snr_s / (cfg.n_T - 1);
    const double u = rng.exponential();
    const double v = rng.gamma(static_cast<double>(cfg.n_T - 1));
    const double path = std::pow(r, -cfg.eta);
    return tx.zeta * snr_s * path * u / (an_scale * v * path + 1.0);
}

double combine(EveMode mode, const std::vector<double>& sinrs) {
    double acc = 0.0;
    if (mode == EveMode::NCE) {
        for (double s : sinrs) acc = std::max(acc, s);
    } else {
        for (double s : sinrs) acc += s;
    }
    return acc;
}

} // namespace

PacketLedger PacketLedger::fresh(long long N_roi, long long N_bg) {
    if (N_roi < 0 || N_bg < 0)
        throw std::invalid_argument("packet counts must be nonnegative");
    PacketLedger l;
    l.unrecovered_s.reserve(static_cast<std::size_t>(N_roi));
    for (long long i = 0; i < N_roi; ++i) l.unrecovered_s.push_back(i);
    l.unrecovered_p.reserve(static_cast<std::size_t>(N_bg));
    for (long long i = 0; i < N_bg; ++i) l.unrecovered_p.push_back(N_roi + i);
    return l;
}

bool PacketLedger::stream_complete(FrameKind kind) const {
    return unrecovered_of(*this, kind).empty();
}

std::vector<CodedPacket> fountain_encode(const PacketLedger& ledger,
                                         FrameKind stream, long long L) {
    if (L < 0) throw std::invalid_argument("frame size must be nonnegative");
    const auto& pending = unrecovered_of(ledger, stream);
    const auto& done = recovered_of(ledger, stream);
    const long long n =
        std::min<long long>(L, static_cast<long long>(pending.size()));
    std::vector<CodedPacket> frame;
    frame.reserve(static_cast<std::size_t>(n));
    const long long base = done.empty() ? kUncoded : done.back();
    for (long long i = 0; i < n; ++i)
        frame.push_back({base, pending[static_cast<std::size_t>(i)]});
    return frame;
}

void fountain_decode_frame(PacketLedger& ledger, FrameKind stream,
                           const std::vector<CodedPacket>& frame, bool success) {
    if (!success) return;
    auto& pending = unrecovered_of(ledger, stream);
    auto& done = recovered_of(ledger, stream);
    for (const CodedPacket& c : frame) {
        const auto it = std::find(pending.begin(), pending.end(), c.target);
        if (it == pending.end())
            throw std::invalid_argument("frame targets a packet that is not pending");
        pending.erase(it);
        done.push_back(c.target);
    }
}

std::vector<Payload> encode_payloads(const std::vector<CodedPacket>& frame,
                                     const std::vector<Payload>& source) {
    std::vector<Payload> coded;
    coded.reserve(frame.size());
    for (const CodedPacket& c : frame) {
        const auto& target = source.at(static_cast<std::size_t>(c.target));
        Payload p = target;
        if (c.base != kUncoded) {
            const auto& base = source.at(static_cast<std::size_t>(c.base));
            if (base.size() != p.size())
                throw std::invalid_argument("payload sizes differ within a frame");
            for (std::size_t i = 0; i < p.size(); ++i) p[i] ^= base[i];
        }
        coded.push_back(std::move(p));
    }
    return coded;
}

void decode_payloads(const std::vector<CodedPacket>& frame,
                     const std::vector<Payload>& coded,
                     std::vector<Payload>& store) {
    if (frame.size() != coded.size())
        throw std::invalid_argument("frame and payload counts differ");
    for (std::size_t i = 0; i < frame.size(); ++i) {
        const CodedPacket& c = frame[i];
        Payload p = coded[i];
        if (c.base != kUncoded) {
            const auto& base = store.at(static_cast<std::size_t>(c.base));
            if (base.empty())
                throw std::invalid_argument("base payload has not been recovered yet");
            if (base.size() != p.size())
                throw std::invalid_argument("payload sizes differ within a frame");
            for (std::size_t j = 0; j < p.size(); ++j) p[j] ^= base[j];
        }
        store.at(static_cast<std::size_t>(c.target)) = std::move(p);
    }
}

EveSampler::EveSampler(const SystemConfig& cfg, const TxParams& tx,
                       const EveScenario& scenario, const SimOptions& opts)
    : cfg_(cfg), tx_(tx), mode_(scenario.mode), placement_(opts.placement) {
    if (opts.r_max > 0.0) {
        r_max_ = opts.r_max;
    } else {
        const DerivedConstants d = derive_constants(cfg, tx, scenario);
        r_max_ = mode_ == EveMode::NCE
                     ? default_r_max_strongest(cfg, tx, d.theta)
                     : default_r_max_aggregate(cfg, tx, d.theta);
    }
}

void EveSampler::begin_delivery(Rng& rng) {
    if (placement_ != EvePlacement::Static) return;
    static_radii_.clear();
    const double mean_count = cfg_.lambda_E * kPi * r_max_ * r_max_;
    if (!(mean_count > 0.0)) return;
    const long long count = static_cast<long long>(rng.poisson(mean_count));
    static_radii_.reserve(static_cast<std::size_t>(count));
    for (long long i = 0; i < count; ++i)
        static_radii_.push_back(r_max_ * std::sqrt(rng.uniform01_pos()));
}

double EveSampler::combined_sinr(Rng& rng) {
    if (placement_ == EvePlacement::IID)
        return combine(mode_, sample_eve_sinrs(cfg_, tx_, r_max_, rng));
    double acc = 0.0;
    for (double r : static_radii_) {
        const double s = eve_sinr_at_radius(cfg_, tx_, r, rng);
        acc = mode_ == EveMode::NCE ? std::max(acc, s) : acc + s;
    }
    return acc;
}

SlotRecord run_slot(const SystemConfig& cfg, const TxParams& tx,
                    const DerivedConstants& d, PacketLedger& ledger,
                    EveSampler& eves, Rng& rng) {
    SlotRecord rec;
    const double g_hat = sample_estimated_gain(cfg.n_T, rng);
    if (g_hat <= tx.nu) {
        if (ledger.stream_complete(FrameKind::Public)) return rec; // idle
        rec.type = SlotType::Public;
        rec.destination_success = true; // public frames always get through
        const long long L_p = public_frame_size(cfg, d.kappa_p * g_hat);
        if (L_p >= 1) {
            const auto frame = fountain_encode(ledger, FrameKind::Public, L_p);
            fountain_decode_frame(ledger, FrameKind::Public, frame, true);
            rec.packets_delivered = static_cast<long long>(frame.size());
        }
        return rec;
    }
    if (ledger.stream_complete(FrameKind::Confidential)) return rec; // idle
    rec.type = SlotType::Confidential;
    const auto frame = fountain_encode(ledger, FrameKind::Confidential, tx.L_s);
    // The frame carries L_s packets exactly when the destination SINR meets
    // the rate threshold; the eavesdroppers need to exceed it strictly.
    const double sinr_s = d.kappa_s * g_hat;
    rec.destination_success = sinr_s >= d.theta;
    fountain_decode_frame(ledger, FrameKind::Confidential, frame,
                          rec.destination_success);
    if (rec.destination_success)
        rec.packets_delivered = static_cast<long long>(frame.size());
    if (cfg.lambda_E > 0.0)
        rec.eve_captured = eves.combined_sinr(rng) > d.theta;
    return rec;
}

DeliveryOutcome simulate_delivery(const SystemConfig& cfg, const TxParams& tx,
                                  const ImageSpec& img, const EveScenario& scenario,
                                  const SimOptions& opts, Rng& rng) {
    const DerivedConstants d = derive_constants(cfg, tx, scenario);
    EveSampler eves(cfg, tx, scenario, opts);
    eves.begin_delivery(rng);
    PacketLedger ledger = PacketLedger::fresh(img.N_roi, img.N_bg);

    DeliveryOutcome out;
    long long eve_packets = 0;
    if (ledger.stream_complete(FrameKind::Public) &&
        ledger.stream_complete(FrameKind::Confidential)) {
        out.T_D = 0;
        return out;
    }
    for (long long slot = 1; slot <= img.D_lim; ++slot) {
        const SlotRecord rec = run_slot(cfg, tx, d, ledger, eves, rng);
        switch (rec.type) {
            case SlotType::Public: ++out.slots_public; break;
            case SlotType::Confidential: ++out.slots_confidential; break;
            case SlotType::Idle: ++out.slots_idle; break;
        }
        if (rec.type == SlotType::Confidential && rec.eve_captured &&
            out.T_E == kNever && img.N_roi > 0) {
            eve_packets += tx.L_s;
            if (eve_packets >= img.N_roi) out.T_E = slot;
        }
        if (ledger.stream_complete(FrameKind::Public) &&
            ledger.stream_complete(FrameKind::Confidential)) {
            out.T_D = slot;
            break;
        }
    }
    out.delay_violated = out.T_D == kNever;
    out.intercepted_in_time = out.T_E != kNever;
    return out;
}

namespace {

McEstimate run_trials(const SystemConfig& cfg, const TxParams& tx,
                      const ImageSpec& img, const EveScenario& scenario,
                      const SimOptions& opts, long long trials,
                      std::uint64_t seed, std::vector<DeliveryOutcome>* records,
                      bool parallel) {
    validate_scenario(cfg, tx, img, scenario);
    if (trials < 1) throw ConfigError("trials: must be at least 1");
    if (records) records->assign(static_cast<std::size_t>(trials), {});

    long long violations = 0;
#if defined(QOSEC_HAVE_OPENMP)
#pragma omp parallel for schedule(dynamic, 64) reduction(+ : violations) \
    if (parallel)
#endif
    for (long long i = 0; i < trials; ++i) {
        Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(i));
        const DeliveryOutcome out =
            simulate_delivery(cfg, tx, img, scenario, opts, rng);
        if (out.delay_violated || out.intercepted_in_time) ++violations;
        if (records) (*records)[static_cast<std::size_t>(i)] = out;
    }
#if !defined(QOSEC_HAVE_OPENMP)
    (void)parallel;
#endif

    McEstimate est;
    est.trials = trials;
    est.seed = seed;
    est.value = static_cast<double>(violations) / static_cast<double>(trials);
    est.std_err =
        std::sqrt(est.value * (1.0 - est.value) / static_cast<double>(trials));
    return est;
}

} // namespace

McEstimate estimate_qvp(const SystemConfig& cfg, const TxParams& tx,
                        const ImageSpec& img, const EveScenario& scenario,
                        const SimOptions& opts, long long trials,
                        std::uint64_t seed,
                        std::vector<DeliveryOutcome>* records) {
    return run_trials(cfg, tx, img, scenario, opts, trials, seed, records, true);
}

McEstimate estimate_qvp_serial(const SystemConfig& cfg, const TxParams& tx,
                               const ImageSpec& img, const EveScenario& scenario,
                               const SimOptions& opts, long long trials,
                               std::uint64_t seed,
                               std::vector<DeliveryOutcome>* records) {
    return run_trials(cfg, tx, img, scenario, opts, trials, seed, records, false);
}

std::vector<McEstimate> qvp_curve(const SystemConfig& cfg, const TxParams& tx,
                                  const ImageSpec& img, const EveScenario& scenario,
                                  const SimOptions& opts,
                                  const std::vector<int>& deadline_grid,
                                  long long trials, std::uint64_t seed) {
    if (deadline_grid.empty())
        throw ConfigError("deadline_grid: must contain at least one deadline");
    for (int d : deadline_grid)
        if (d < 1) throw ConfigError("deadline_grid: deadlines must be >= 1");

    ImageSpec widest = img;
    widest.D_lim = *std::max_element(deadline_grid.begin(), deadline_grid.end());

    std::vector<DeliveryOutcome> outcomes;
    estimate_qvp(cfg, tx, widest, scenario, opts, trials, seed, &outcomes);

    // T_E never exceeds the trial's own delivery window, so under a shorter
    // deadline d the trial violates exactly when delivery ran past d or the
    // interception happened by slot d.
    std::vector<McEstimate> curve;
    curve.reserve(deadline_grid.size());
    for (int d : deadline_grid) {
        long long violations = 0;
        for (const DeliveryOutcome& out : outcomes) {
            const bool late = out.T_D == kNever || out.T_D > d;
            const bool spied = out.T_E != kNever && out.T_E <= d;
            if (late || spied) ++violations;
        }
        McEstimate est;
        est.trials = trials;
        est.seed = seed;
        est.value = static_cast<double>(violations) / static_cast<double>(trials);
        est.std_err = std::sqrt(est.value * (1.0 - est.value) /
                                static_cast<double>(trials));
        curve.push_back(est);
    }
    return curve;
}

} // namespace qosec
