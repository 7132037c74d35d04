#ifndef QOSEC_PROTOCOL_SIM_HPP
#define QOSEC_PROTOCOL_SIM_HPP

#include <cstdint>
#include <vector>

#include "qosec/rng.hpp"
#include "qosec/system_model.hpp"

namespace qosec {

// Sentinel for "event never happened" in slot-count fields.
inline constexpr long long kNever = -1;

// Result of one simulated delivery attempt.
struct DeliveryOutcome {
    long long T_D = kNever; // slot on which the destination completed
    long long T_E = kNever; // slot on which the eavesdroppers completed
    bool delay_violated = false;
    bool intercepted_in_time = false; // T_E <= min(T_D, D_lim)
    long long slots_public = 0;
    long long slots_confidential = 0;
    long long slots_idle = 0;
};

// Per-stream packet bookkeeping. Ids are global: confidential packets take
// [0, N_roi), public packets take [N_roi, N_roi + N_bg), so the two streams
// can never alias. Within each list, order is priority order; the most
// recently recovered packet sits at the back of its recovered list.
struct PacketLedger {
    std::vector<long long> recovered_s;
    std::vector<long long> unrecovered_s;
    std::vector<long long> recovered_p;
    std::vector<long long> unrecovered_p;

    static PacketLedger fresh(long long N_roi, long long N_bg);
    bool stream_complete(FrameKind kind) const;
};

// One coded packet: XOR of an already-recovered base packet with a new
// target packet. base == kUncoded marks the bootstrap case (target sent
// plain because nothing is recovered yet).
inline constexpr long long kUncoded = -1;

struct CodedPacket {
    long long base = kUncoded;
    long long target = 0;
};

// Builds one frame of up to L coded packets for the given stream: targets
// are the L highest-priority unrecovered packets, each combined with the
// most recently recovered packet. Returns an empty frame when the stream is
// already complete.
std::vector<CodedPacket> fountain_encode(const PacketLedger& ledger,
                                         FrameKind stream, long long L);

// Applies a received frame: on success every target moves from unrecovered
// to recovered (in frame order); on failure the ledger is left untouched.
void fountain_decode_frame(PacketLedger& ledger, FrameKind stream,
                           const std::vector<CodedPacket>& frame, bool success);

// Byte-level companions, used to verify the XOR code is lossless end to end.
// `source` and `store` are indexed by global packet id; decode requires each
// packet's base payload to already be present in `store`.
using Payload = std::vector<std::uint8_t>;
std::vector<Payload> encode_payloads(const std::vector<CodedPacket>& frame,
                                     const std::vector<Payload>& source);
void decode_payloads(const std::vector<CodedPacket>& frame,
                     const std::vector<Payload>& coded,
                     std::vector<Payload>& store);

// Whether eavesdropper positions are redrawn every slot (matching the
// analysis's slot-independence assumption) or frozen per delivery.
enum class EvePlacement { IID, Static };

struct SimOptions {
    EvePlacement placement = EvePlacement::IID;
    double r_max = 0.0; // simulation disc radius; <= 0 selects a default
};

// Draws the combined eavesdropper SINR for one slot: the maximum over nodes
// when they act independently (NCE), their sum when they combine (CE).
class EveSampler {
  public:
    EveSampler(const SystemConfig& cfg, const TxParams& tx,
               const EveScenario& scenario, const SimOptions& opts);

    // In static placement, draws the node positions for one delivery.
    void begin_delivery(Rng& rng);
    double combined_sinr(Rng& rng);
    double r_max() const { return r_max_; }

  private:
    SystemConfig cfg_;
    TxParams tx_;
    EveMode mode_;
    EvePlacement placement_;
    double r_max_;
    std::vector<double> static_radii_;
};

enum class SlotType { Public, Confidential, Idle };

struct SlotRecord {
    SlotType type = SlotType::Idle;
    long long packets_delivered = 0; // packets newly recovered by the destination
    bool destination_success = false; // confidential frame decoded at the destination
    bool eve_captured = false;        // confidential frame captured by the eavesdroppers
};

// Advances the protocol by one slot: draws the estimated gain, picks the
// slot type, transmits one frame, and updates the destination ledger. The
// eavesdropper collusion model is carried by the sampler.
SlotRecord run_slot(const SystemConfig& cfg, const TxParams& tx,
                    const DerivedConstants& d, PacketLedger& ledger,
                    EveSampler& eves, Rng& rng);

// Runs one full delivery attempt up to img.D_lim slots.
DeliveryOutcome simulate_delivery(const SystemConfig& cfg, const TxParams& tx,
                                  const ImageSpec& img, const EveScenario& scenario,
                                  const SimOptions& opts, Rng& rng);

struct McEstimate {
    double value = 0.0;
    double std_err = 0.0;
    long long trials = 0;
    std::uint64_t seed = 0;
};

// Monte Carlo estimate of the quality-violation probability. Trial i always
// uses substream(seed, i), so the result is bit-identical for a given seed
// regardless of worker count or scheduling. When `records` is non-null it
// receives all per-trial outcomes, indexed by trial.
McEstimate estimate_qvp(const SystemConfig& cfg, const TxParams& tx,
                        const ImageSpec& img, const EveScenario& scenario,
                        const SimOptions& opts, long long trials,
                        std::uint64_t seed,
                        std::vector<DeliveryOutcome>* records = nullptr);

// Single-threaded reference implementation with the identical contract;
// kept for validation and benchmarking against the parallel kernel.
McEstimate estimate_qvp_serial(const SystemConfig& cfg, const TxParams& tx,
                               const ImageSpec& img, const EveScenario& scenario,
                               const SimOptions& opts, long long trials,
                               std::uint64_t seed,
                               std::vector<DeliveryOutcome>* records = nullptr);

// Evaluates the violation probability on a whole deadline grid from one set
// of trials (each trial is simulated once at the largest deadline).
std::vector<McEstimate> qvp_curve(const SystemConfig& cfg, const TxParams& tx,
                                  const ImageSpec& img, const EveScenario& scenario,
                                  const SimOptions& opts,
                                  const std::vector<int>& deadline_grid,
                                  long long trials, std::uint64_t seed);

} // namespace qosec

#endif
