#pragma once

// Scenario engine. Frame attempts advance bit by bit; inside a bit the bus is
// a sequence of constant-DC segments (split at pulse edges, window edges and
// protective-device switching), with analytic comparator runs for receivers
// and exact per-segment advance of IRS devices and the damage accumulator.
// Between attempts the bus is idle and advanced in whole segments.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <future>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "canvolt/attacks.hpp"
#include "canvolt/electrical.hpp"
#include "canvolt/irs.hpp"
#include "canvolt/link.hpp"

namespace canvolt {

enum class EcuRole { VidsHost, Sender, Logger };

inline const char* to_string(EcuRole r) {
    switch (r) {
        case EcuRole::VidsHost: return "vids";
        case EcuRole::Sender: return "sender";
        case EcuRole::Logger: return "logger";
    }
    return "?";
}

struct EcuConfig {
    std::string name;
    EcuRole role = EcuRole::Logger;
    /// Sender traffic: one instance of `frame` every `period`, first at `offset`.
    double period = 1.0;
    double offset = 0.0;
    Frame frame;
    /// Attacker pin source limits (VIDS host only).
    double source_resistance = 0.0;
    double source_current_limit = std::numeric_limits<double>::infinity();
};

/// Microcontroller damage accumulator; damaged is absorbing.
struct EcuDamage {
    double i_max = 0.040;
    double damage_time = 1e-6;
    double over_timer = 0.0;
    bool damaged = false;
};

inline EcuDamage damage_step(EcuDamage s, double i, double dt) {
    if (!(dt > 0)) throw Error("damage_step: dt must be > 0");
    if (s.damaged) return s;
    if (std::abs(i) > s.i_max) {
        s.over_timer += dt;
        if (s.over_timer + detail::kTimeTolerance >= s.damage_time) s.damaged = true;
    } else {
        s.over_timer = 0.0;
    }
    return s;
}

inline double damage_time_to_trip(const EcuDamage& s, double i) {
    if (s.damaged || !(std::abs(i) > s.i_max)) return detail::kNever;
    return std::max(0.0, s.damage_time - s.over_timer);
}

struct TraceOptions {
    /// Period of line-voltage and pin-current samples; 0 disables them.
    double sample_period = 0.0;
    /// Record ErrorFrame and Retransmission events.
    bool frame_errors = true;
};

struct SweepSpec {
    std::string path;
    double from = 0.0;
    double to = 0.0;
    double step = 0.0;

    /// Grid points from..to inclusive, computed as from + k*step.
    std::vector<double> values() const {
        std::vector<double> out;
        if (!(step > 0)) return out;
        const auto n = static_cast<long>(std::floor((to - from) / step + 1e-9));
        for (long k = 0; k <= n; ++k) out.push_back(from + static_cast<double>(k) * step);
        return out;
    }
};

/// Expected outcomes checked by `simulate --check`.
struct Expectations {
    std::optional<std::string> indicator;  // e.g. "1111000111", one char per slot
    std::optional<bool> attack_success;
    std::optional<bool> damaged;
    std::optional<int> min_retransmissions;
    std::optional<int> frames_received;

    bool empty() const {
        return !indicator && !attack_success && !damaged && !min_retransmissions && !frames_received;
    }
};

struct ScenarioConfig {
    double duration = 60.0;
    BitTiming timing;
    TransceiverParams params;
    double termination_a = 120.0;
    double termination_b = 120.0;
    std::vector<EcuConfig> ecus;
    std::optional<AttackSpec> attack;
    IrsConfig irs;
    EcuDamage damage;
    TraceOptions trace;
    std::optional<SweepSpec> sweep;
    Expectations expect;

    const EcuConfig* find_ecu(const std::string& name) const {
        for (const auto& e : ecus)
            if (e.name == name) return &e;
        return nullptr;
    }

    const EcuConfig& vids_host() const {
        for (const auto& e : ecus)
            if (e.role == EcuRole::VidsHost) return e;
        throw ConfigError(0, "ecu", "no VIDS host");
    }

    /// Transmission time of the longest sender frame including intermission.
    double max_frame_time() const {
        std::size_t bits = 0;
        for (const auto& e : ecus)
            if (e.role == EcuRole::Sender) bits = std::max(bits, encode_frame(e.frame).bits.size());
        return static_cast<double>(bits + kIntermissionBits) * timing.bit_time();
    }

    double min_frame_time() const {
        std::size_t bits = std::numeric_limits<std::size_t>::max();
        for (const auto& e : ecus)
            if (e.role == EcuRole::Sender) bits = std::min(bits, encode_frame(e.frame).bits.size());
        if (bits == std::numeric_limits<std::size_t>::max()) return std::numeric_limits<double>::infinity();
        return static_cast<double>(bits) * timing.bit_time();
    }

    void validate() const {
        auto fail = [](const std::string& path, const std::string& msg) { throw ConfigError(0, path, msg); };
        if (!(duration > 0)) fail("bus.duration", "must be > 0");
        try {
            timing.validate();
        } catch (const LinkError& e) {
            fail("bus", e.what());
        }
        try {
            params.validate();
        } catch (const ElectricalError& e) {
            fail("bus", e.what());
        }
        if (!(termination_a > 0)) fail("bus.termination_a", "must be > 0");
        if (!(termination_b > 0)) fail("bus.termination_b", "must be > 0");
        int hosts = 0;
        for (std::size_t k = 0; k < ecus.size(); ++k) {
            const auto& e = ecus[k];
            const std::string p = "ecu." + e.name;
            for (std::size_t j = 0; j < k; ++j)
                if (ecus[j].name == e.name) fail(p, "duplicate ECU name");
            if (e.role == EcuRole::VidsHost) ++hosts;
            if (e.role == EcuRole::Sender) {
                const double ft = static_cast<double>(encode_frame(e.frame).bits.size()) * timing.bit_time();
                if (!(e.period > ft)) fail(p + ".period", "must exceed the frame transmission time");
                if (!(e.offset >= 0)) fail(p + ".offset", "must be >= 0");
                for (std::size_t j = 0; j < k; ++j)
                    if (ecus[j].role == EcuRole::Sender && ecus[j].frame.id == e.frame.id)
                        fail(p + ".id", "identifier already used by ECU " + ecus[j].name);
            }
            if (!(e.source_resistance >= 0)) fail(p + ".source_resistance", "must be >= 0");
            if (!(e.source_current_limit > 0)) fail(p + ".source_current_limit", "must be > 0");
        }
        if (hosts != 1) fail("ecu", "exactly one ECU must have role vids (found " + std::to_string(hosts) + ")");
        if (attack) {
            if (attack->attacker_node != vids_host().name)
                fail("attack.node", "attacks are launched from the VIDS host " + vids_host().name);
            if (!(attack->t_start < attack->t_end)) fail("attack.t_end", "must be greater than attack.t_start");
            if (const auto* p = std::get_if<attack::Pulse>(&attack->attack)) {
                if (!(p->period > 0)) fail("attack.period", "must be > 0");
                if (!(p->duty >= 0 && p->duty <= 1)) fail("attack.duty", "must be in [0, 1]");
                if (!(p->v_high >= 0 && p->v_high <= kMaxPinLevel)) fail("attack.v_high", "must be in [0, 5] V");
                if (!(p->v_low >= 0 && p->v_low <= kMaxPinLevel)) fail("attack.v_low", "must be in [0, 5] V");
                if (!(p->period < min_frame_time())) fail("attack.period", "must be shorter than a frame transmission");
            }
            if (const auto* d = std::get_if<attack::DoS>(&attack->attack))
                if (!(d->v_attack_l > 0 && d->v_attack_l <= kMaxPinLevel)) fail("attack.voltage", "must be in (0, 5] V");
            if (const auto* f = std::get_if<attack::ForcedRetransmission>(&attack->attack))
                if (!(f->v_attack_h > 0 && f->v_attack_h <= kMaxPinLevel)) fail("attack.voltage", "must be in (0, 5] V");
        }
        try {
            irs.validate();
        } catch (const IrsError& e) {
            fail("irs", e.what());
        }
        if (!(damage.i_max > 0)) fail("damage.i_max", "must be > 0");
        if (!(damage.damage_time > 0)) fail("damage.damage_time", "must be > 0");
        if (!(trace.sample_period >= 0)) fail("trace.sample_period", "must be >= 0");
    }
};

enum class TraceKind : std::uint8_t {
    FrameSent,
    FrameReceived,
    ErrorFrame,
    Retransmission,
    FuseBlown,
    BreakerTripped,
    ResettableFuseOpen,
    ResettableFuseClosed,
    ThermostatOpen,
    ThermostatClosed,
    Damage,
    AttackStart,
    AttackEnd,
    PinCurrentSample,
    LineVoltageSample,
};

inline const char* to_string(TraceKind k) {
    switch (k) {
        case TraceKind::FrameSent: return "FrameSent";
        case TraceKind::FrameReceived: return "FrameReceived";
        case TraceKind::ErrorFrame: return "ErrorFrame";
        case TraceKind::Retransmission: return "Retransmission";
        case TraceKind::FuseBlown: return "FuseBlown";
        case TraceKind::BreakerTripped: return "BreakerTripped";
        case TraceKind::ResettableFuseOpen: return "ResettableFuseOpen";
        case TraceKind::ResettableFuseClosed: return "ResettableFuseClosed";
        case TraceKind::ThermostatOpen: return "ThermostatOpen";
        case TraceKind::ThermostatClosed: return "ThermostatClosed";
        case TraceKind::Damage: return "Damage";
        case TraceKind::AttackStart: return "AttackStart";
        case TraceKind::AttackEnd: return "AttackEnd";
        case TraceKind::PinCurrentSample: return "PinCurrentSample";
        case TraceKind::LineVoltageSample: return "LineVoltageSample";
    }
    return "?";
}

/// One trace row. `a` and `b` are kind-specific integers:
///   FrameSent       a = frame id, b = instance
///   FrameReceived   a = sender ECU index, b = instance, value = frame id
///   ErrorFrame      a = error kind, b = bit index within the attempt
///   Retransmission  a = frame id, b = instance, value = retransmission count of the instance
struct TraceRecord {
    Picos t = 0;
    TraceKind kind = TraceKind::FrameSent;
    std::int8_t line = -1;  // -1 none, 0 CANH, 1 CANL
    std::int32_t ecu = -1;
    double value = 0.0;
    std::int64_t a = 0;
    std::int64_t b = 0;

    friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

struct Trace {
    std::vector<std::string> ecus;
    std::string attack;
    std::vector<TraceRecord> records;

    std::string ecu_name(std::int32_t k) const { return k >= 0 ? ecus[static_cast<std::size_t>(k)] : ""; }

    std::string detail(const TraceRecord& r) const {
        auto hex = [](std::int64_t id) {
            char buf[16];
            std::snprintf(buf, sizeof buf, "0x%03llx", static_cast<unsigned long long>(id));
            return std::string(buf);
        };
        switch (r.kind) {
            case TraceKind::FrameSent: return "id=" + hex(r.a) + " instance=" + std::to_string(r.b);
            case TraceKind::FrameReceived:
                return "from=" + ecu_name(static_cast<std::int32_t>(r.a)) + " id=" + hex(static_cast<std::int64_t>(r.value)) +
                       " instance=" + std::to_string(r.b);
            case TraceKind::ErrorFrame:
                return std::string("error=") + to_string(static_cast<DecodeError>(r.a)) + " bit=" + std::to_string(r.b);
            case TraceKind::Retransmission: return "id=" + hex(r.a) + " instance=" + std::to_string(r.b);
            case TraceKind::AttackStart:
            case TraceKind::AttackEnd: return attack;
            default: return "";
        }
    }
};

struct DeviceEvent {
    Line line;
    TraceKind kind;
    double t;
};

struct Summary {
    int frames_sent = 0;
    int frames_received = 0;
    int undelivered = 0;
    std::vector<int> indicator;
    int retransmissions = 0;
    int error_frames = 0;
    bool attack_success = false;
    /// Why the attack did not succeed; empty on success or without attack.
    std::string failure_reason;
    std::vector<DeviceEvent> device_events;
    bool damaged = false;
    std::optional<double> damage_time;
};

struct RunResult {
    Trace trace;
    Summary summary;
};

/// Per-slot message indicator: 1 iff instance k of `sender` reached `receiver`.
inline std::vector<int> message_indicator(const Trace& trace, const std::string& sender, const std::string& receiver,
                                          int slots) {
    std::vector<int> out(static_cast<std::size_t>(std::max(0, slots)), 0);
    std::int32_t s = -1, r = -1;
    for (std::size_t k = 0; k < trace.ecus.size(); ++k) {
        if (trace.ecus[k] == sender) s = static_cast<std::int32_t>(k);
        if (trace.ecus[k] == receiver) r = static_cast<std::int32_t>(k);
    }
    for (const auto& rec : trace.records)
        if (rec.kind == TraceKind::FrameReceived && rec.ecu == r && rec.a == s && rec.b >= 0 &&
            rec.b < static_cast<std::int64_t>(out.size()))
            out[static_cast<std::size_t>(rec.b)] = 1;
    return out;
}

}  // namespace canvolt

#include "canvolt/detail/simulator.hpp"
