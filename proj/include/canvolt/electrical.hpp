#pragma once

// Bus electrical layer: transceiver drivers, termination, attacker pin sources.
//
// The DC solution is piecewise closed form. Each driver is treated as a
// regulated output inside its normal operating region and as a Thevenin
// source (with a blocking diode) once an external source pulls the bus out of
// that region:
//
//   CANH driver  regulated at dominant_canh() while CANL <= dominant_canl(),
//                otherwise dominant_canh() behind r_drive_high.
//   CANL driver  regulated at dominant_canl() while CANL is free, otherwise a
//                sink of r_sink_offset volts behind r_sink.
//
// In the recessive state both drivers are off and the bias network is ideal
// but weak: a free line follows the other line through the termination and
// draws no current, and two free lines sit at v_ref.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "canvolt/common.hpp"

namespace canvolt {

class ElectricalError : public Error {
public:
    enum class Code { ConflictingSources, MultipleAttackers, InvalidPinMode, InvalidVoltage, InvalidTopology };
    ElectricalError(Code code, const std::string& what) : Error(what), code_(code) {}
    Code code() const noexcept { return code_; }

private:
    Code code_;
};

inline constexpr double kMaxPinLevel = 5.0;

struct LineVoltages {
    double v_canh = 0.0;
    double v_canl = 0.0;
    double v_diff() const { return v_canh - v_canl; }
};

/// Analog pin state of the microcontroller wired to a bus line.
class PinMode {
public:
    struct Input {};
    struct OutputHigh {
        double level;
    };
    struct OutputLow {};
    struct Pulse {
        double period;
        double duty;
        double v_high;
        double v_low;
    };
    using Variant = std::variant<Input, OutputHigh, OutputLow, Pulse>;

    PinMode() = default;

    static PinMode input() { return PinMode{Input{}}; }

    static PinMode output_high(double level) {
        if (!(level > 0.0 && level <= kMaxPinLevel))
            throw ElectricalError(ElectricalError::Code::InvalidPinMode,
                                  "output level must be in (0, 5] V, got " + std::to_string(level));
        return PinMode{OutputHigh{level}};
    }

    static PinMode output_low() { return PinMode{OutputLow{}}; }

    /// Duty 1 and duty 0 collapse to the constant output they describe.
    static PinMode pulse(double period, double duty, double v_high = kMaxPinLevel, double v_low = 0.0) {
        if (!(period > 0.0))
            throw ElectricalError(ElectricalError::Code::InvalidPinMode, "pulse period must be > 0");
        if (!(duty >= 0.0 && duty <= 1.0))
            throw ElectricalError(ElectricalError::Code::InvalidPinMode, "pulse duty must be in [0, 1]");
        if (!(v_high >= 0.0 && v_high <= kMaxPinLevel && v_low >= 0.0 && v_low <= kMaxPinLevel))
            throw ElectricalError(ElectricalError::Code::InvalidPinMode, "pulse levels must be in [0, 5] V");
        if (duty == 1.0) return constant(v_high);
        if (duty == 0.0) return constant(v_low);
        return PinMode{Pulse{period, duty, v_high, v_low}};
    }

    const Variant& get() const { return mode_; }
    bool is_input() const { return std::holds_alternative<Input>(mode_); }
    bool is_pulse() const { return std::holds_alternative<Pulse>(mode_); }

    /// Source level driven at `t` seconds after the pulse phase origin;
    /// nullopt when the pin only measures. Pulses start with the high phase.
    std::optional<double> level_at(double t) const {
        return std::visit(
            [t](const auto& m) -> std::optional<double> {
                using M = std::decay_t<decltype(m)>;
                if constexpr (std::is_same_v<M, Input>) {
                    return std::nullopt;
                } else if constexpr (std::is_same_v<M, OutputHigh>) {
                    return m.level;
                } else if constexpr (std::is_same_v<M, OutputLow>) {
                    return 0.0;
                } else {
                    double phase = std::fmod(t, m.period);
                    if (phase < 0) phase += m.period;
                    return phase < m.duty * m.period ? m.v_high : m.v_low;
                }
            },
            mode_);
    }

    friend bool operator==(const PinMode& a, const PinMode& b) {
        if (a.mode_.index() != b.mode_.index()) return false;
        if (const auto* h = std::get_if<OutputHigh>(&a.mode_)) return h->level == std::get<OutputHigh>(b.mode_).level;
        if (const auto* p = std::get_if<Pulse>(&a.mode_)) {
            const auto& q = std::get<Pulse>(b.mode_);
            return p->period == q.period && p->duty == q.duty && p->v_high == q.v_high && p->v_low == q.v_low;
        }
        return true;
    }

private:
    explicit PinMode(Variant v) : mode_(v) {}
    static PinMode constant(double level) { return level > 0.0 ? output_high(level) : output_low(); }

    Variant mode_{Input{}};
};

struct PinPair {
    PinMode p_h;
    PinMode p_l;
};

struct TransceiverParams {
    double v_dd = 5.0;
    double v_ref = 2.5;
    double diode_drop = 0.7;
    double v_ce_sat = 0.1;
    double r_drive_high = 26.7;
    double r_sink_offset = 1.4;
    double r_sink = 12.8;
    bool reverse_blocking = true;
    /// RC constant of a line pulled up through the termination alone.
    double tau_rc = 1.16e-6 / std::log(7.0);
    /// Driver-controlled dominant-to-recessive transition.
    double nominal_transition = 100e-9;
    /// Extra recovery time after a CANH disturbance ends.
    double transition_extension = 55e-9;

    double dominant_canh() const { return v_dd - 2.0 * diode_drop - v_ce_sat; }
    double dominant_canl() const { return 2.0 * diode_drop + v_ce_sat; }

    void validate() const {
        if (!(r_drive_high > 0 && r_sink > 0 && tau_rc > 0))
            throw ElectricalError(ElectricalError::Code::InvalidTopology, "transceiver resistances and tau_rc must be > 0");
        if (!(dominant_canh() > dominant_canl()))
            throw ElectricalError(ElectricalError::Code::InvalidTopology, "dominant CANH must exceed dominant CANL");
    }
};

/// Per-pin series connection as seen by the solver. An open protective device
/// is `connected = false`; an open resettable fuse keeps the pin connected
/// through a current limit.
struct PinLink {
    bool connected = true;
    double current_limit = std::numeric_limits<double>::infinity();
};

struct NodeAttachment {
    std::string name;
    bool has_ph = false;
    bool has_pl = false;
    /// Output resistance of the attacker pin; 0 is an ideal source.
    double source_resistance = 0.0;
    /// Maximum current an output pin can deliver (e.g. 52 mA on an Arduino).
    double source_current_limit = std::numeric_limits<double>::infinity();
};

struct BusTopology {
    double termination_a = 120.0;
    double termination_b = 120.0;
    std::vector<NodeAttachment> nodes;

    double r_load() const { return termination_a * termination_b / (termination_a + termination_b); }

    void validate() const {
        if (!(termination_a > 0 && termination_b > 0))
            throw ElectricalError(ElectricalError::Code::InvalidTopology, "termination resistors must be > 0");
        for (const auto& n : nodes)
            if (n.source_resistance < 0 || !(n.source_current_limit > 0))
                throw ElectricalError(ElectricalError::Code::InvalidTopology, "bad source parameters on node " + n.name);
    }
};

/// Branch currents of the two-node network, amps.
///   drive_h  transceiver CANH driver -> CANH
///   sink_l   CANL -> transceiver CANL sink
///   term     CANH -> CANL through the termination
///   source_h attacker source -> CANH
///   source_l attacker source -> CANL
struct BranchCurrents {
    double drive_h = 0.0;
    double sink_l = 0.0;
    double term = 0.0;
    double source_h = 0.0;
    double source_l = 0.0;
};

struct NetworkState {
    LineVoltages v;
    BranchCurrents i;
};

/// Signed pin currents; positive flows into the microcontroller pin.
struct PinCurrents {
    double i_ph = 0.0;
    double i_pl = 0.0;
};

struct BusSolution {
    LineVoltages v;
    BranchCurrents branches;
    std::vector<PinCurrents> pins;
};

/// Closed-form network state with lines optionally held by ideal sources.
inline NetworkState resolve_ideal(bool dominant, std::optional<double> forced_h, std::optional<double> forced_l,
                                  const TransceiverParams& p, double r_load) {
    NetworkState s;
    auto& v = s.v;
    auto& i = s.i;
    const double vh_dom = p.dominant_canh();
    const double vl_dom = p.dominant_canl();
    auto block = [&](double x) { return p.reverse_blocking ? std::max(0.0, x) : x; };
    auto thevenin_h = [&](double vh) { return block((vh_dom - vh) / p.r_drive_high); };
    auto offset_sink = [&](double vl) { return block((vl - p.r_sink_offset) / p.r_sink); };

    if (!dominant) {
        if (forced_h && forced_l) {
            v = {*forced_h, *forced_l};
            i.term = (v.v_canh - v.v_canl) / r_load;
            i.source_h = i.term;
            i.source_l = -i.term;
        } else if (forced_h) {
            v = {*forced_h, *forced_h};
        } else if (forced_l) {
            v = {*forced_l, *forced_l};
        } else {
            v = {p.v_ref, p.v_ref};
        }
        return s;
    }

    if (!forced_h && !forced_l) {
        v = {vh_dom, vl_dom};
        i.term = (vh_dom - vl_dom) / r_load;
        i.drive_h = i.term;
        i.sink_l = i.term;
        return s;
    }

    if (forced_h && !forced_l) {
        const double vh = *forced_h;
        if (vh >= vl_dom || !p.reverse_blocking) {
            v = {vh, vl_dom};
            i.term = (vh - vl_dom) / r_load;
            i.sink_l = i.term;
        } else {
            v = {vh, vh};
        }
        i.drive_h = thevenin_h(vh);
        i.source_h = i.term - i.drive_h;
        return s;
    }

    if (!forced_h && forced_l) {
        const double vl = *forced_l;
        double vh;
        if (vl >= vh_dom && p.reverse_blocking) {
            vh = vl;
        } else if (vl <= vl_dom) {
            vh = vh_dom;
        } else {
            vh = vl + (vh_dom - vl) * r_load / (r_load + p.r_drive_high);
        }
        v = {vh, vl};
        i.term = (vh - vl) / r_load;
        i.drive_h = i.term;
        i.sink_l = offset_sink(vl);
        i.source_l = i.sink_l - i.term;
        return s;
    }

    v = {*forced_h, *forced_l};
    i.term = (v.v_canh - v.v_canl) / r_load;
    i.drive_h = thevenin_h(v.v_canh);
    i.sink_l = offset_sink(v.v_canl);
    i.source_h = i.term - i.drive_h;
    i.source_l = i.sink_l - i.term;
    return s;
}

/// An attacker output driving one line.
struct LineSource {
    double level = 0.0;
    double resistance = 0.0;
    double current_limit = std::numeric_limits<double>::infinity();

    bool ideal() const { return resistance == 0.0 && std::isinf(current_limit); }
};

namespace detail {

// f increasing on [lo, hi]; fixed iteration count keeps results reproducible.
template <class F>
double bisect_increasing(F&& f, double lo, double hi) {
    for (int k = 0; k < 100; ++k) {
        const double mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0)
            hi = mid;
        else
            lo = mid;
    }
    return 0.5 * (lo + hi);
}

// Line voltage reached by a non-ideal source. `demand(V)` is the current the
// source must push into the line to hold it at V (increasing in V).
template <class Demand>
double settle_source(const LineSource& s, Demand&& demand, double v_dd) {
    if (s.ideal()) return s.level;
    const double lo = std::min(0.0, s.level) - 100.0;
    const double hi = std::max(s.level, v_dd) + 100.0;
    const double cap = s.current_limit;
    if (s.resistance == 0.0) {
        const double at_level = demand(s.level);
        if (std::abs(at_level) <= cap) return s.level;
        if (at_level > cap) return bisect_increasing([&](double x) { return demand(x) - cap; }, lo, s.level);
        return bisect_increasing([&](double x) { return demand(x) + cap; }, s.level, hi);
    }
    return bisect_increasing(
        [&](double x) { return demand(x) - std::clamp((s.level - x) / s.resistance, -cap, cap); }, lo, hi);
}

}  // namespace detail

/// Network state with optional (possibly non-ideal) sources on each line.
inline NetworkState solve_lines(bool dominant, const std::optional<LineSource>& src_h,
                                const std::optional<LineSource>& src_l, const TransceiverParams& p, double r_load) {
    auto settle_l = [&](std::optional<double> vh) -> std::optional<double> {
        if (!src_l) return std::nullopt;
        return detail::settle_source(
            *src_l, [&](double x) { return resolve_ideal(dominant, vh, x, p, r_load).i.source_l; }, p.v_dd);
    };
    std::optional<double> vh;
    if (src_h) {
        vh = detail::settle_source(
            *src_h, [&](double x) { return resolve_ideal(dominant, x, settle_l(x), p, r_load).i.source_h; }, p.v_dd);
    }
    return resolve_ideal(dominant, vh, settle_l(vh), p, r_load);
}

/// Steady-state DC solution of the bus for per-node drive states and pin modes.
/// `t` is the time since the pulse phase origin used to resolve Pulse pins;
/// `links` (optional, one per node) describes in-line protective devices.
inline BusSolution solve_bus(std::span<const Bit> drive, std::span<const PinPair> pins, const BusTopology& topo,
                             const TransceiverParams& params, double t = 0.0,
                             std::span<const std::pair<PinLink, PinLink>> links = {}) {
    using Code = ElectricalError::Code;
    topo.validate();
    params.validate();
    if (drive.size() != topo.nodes.size() || pins.size() != topo.nodes.size())
        throw ElectricalError(Code::InvalidTopology, "drive and pin lists must have one entry per node");
    if (!links.empty() && links.size() != topo.nodes.size())
        throw ElectricalError(Code::InvalidTopology, "link list must have one entry per node");

    bool dominant = false;
    for (Bit b : drive) dominant = dominant || b == Bit::Dominant;

    std::optional<LineSource> src[2];
    int owner[2] = {-1, -1};
    for (std::size_t n = 0; n < topo.nodes.size(); ++n) {
        const auto& node = topo.nodes[n];
        const PinMode* modes[2] = {&pins[n].p_h, &pins[n].p_l};
        const bool present[2] = {node.has_ph, node.has_pl};
        for (int line = 0; line < 2; ++line) {
            auto level = modes[line]->level_at(t);
            if (!level) continue;
            if (!present[line])
                throw ElectricalError(Code::InvalidTopology, "node " + node.name + " drives a pin it does not have");
            PinLink link;
            if (!links.empty()) link = line == 0 ? links[n].first : links[n].second;
            if (!link.connected) continue;
            if (src[line]) {
                if (src[line]->level != *level)
                    throw ElectricalError(Code::ConflictingSources,
                                          std::string("two sources drive ") + (line == 0 ? "CANH" : "CANL") +
                                              " to different levels");
                throw ElectricalError(Code::MultipleAttackers,
                                      std::string("more than one attacker drives ") + (line == 0 ? "CANH" : "CANL"));
            }
            src[line] = LineSource{*level, node.source_resistance,
                                   std::min(node.source_current_limit, link.current_limit)};
            owner[line] = static_cast<int>(n);
        }
    }

    const NetworkState state = solve_lines(dominant, src[0], src[1], params, topo.r_load());
    BusSolution out{state.v, state.i, std::vector<PinCurrents>(topo.nodes.size())};
    if (owner[0] >= 0) out.pins[owner[0]].i_ph = -state.i.source_h;
    if (owner[1] >= 0) out.pins[owner[1]].i_pl = -state.i.source_l;
    return out;
}

/// Largest current-balance error over the two bus nodes, with the termination
/// current recomputed from the solved voltages.
inline double kirchhoff_residual(const LineVoltages& v, const BranchCurrents& i, double r_load) {
    const double t = (v.v_canh - v.v_canl) / r_load;
    return std::max(std::abs(i.drive_h + i.source_h - t), std::abs(t + i.source_l - i.sink_l));
}

/// First-order approach of a line voltage to a new target.
struct RecoveryWaveform {
    double v_start;
    double v_target;
    double tau;

    double operator()(double t) const { return v_target - (v_target - v_start) * std::exp(-t / tau); }

    /// Time at which the waveform reaches `v`; infinity if it never does.
    double time_to_reach(double v) const {
        const double gap = v_target - v_start;
        const double rem = v_target - v;
        if (gap == 0.0) return v == v_target ? 0.0 : std::numeric_limits<double>::infinity();
        const double ratio = rem / gap;
        if (ratio >= 1.0) return 0.0;
        if (ratio <= 0.0) return std::numeric_limits<double>::infinity();
        return -tau * std::log(ratio);
    }
};

inline RecoveryWaveform recovery_waveform(double v_start, double v_target, double tau_rc) {
    if (!(tau_rc > 0.0)) throw ElectricalError(ElectricalError::Code::InvalidVoltage, "tau_rc must be > 0");
    return {v_start, v_target, tau_rc};
}

/// Whether a free line pulled to `target` recovers through the termination RC
/// (slow) instead of the transceiver's own transition.
inline bool slow_recovery(double target, const TransceiverParams& p) { return target >= p.dominant_canh(); }

/// Dominant-bit duration plus the time for CANL to reach 90 % of its recessive
/// level. Without an attacker (or below the CANH dominant level) the
/// transceiver's nominal transition applies.
inline double measure_tau_bit(double dominant_duration, std::optional<double> v_attack_h, double tau_rc,
                              const TransceiverParams& p = {}) {
    if (v_attack_h && !(*v_attack_h > 0.0))
        throw ElectricalError(ElectricalError::Code::InvalidVoltage, "v_attack_h must be > 0");
    if (!v_attack_h || !slow_recovery(*v_attack_h, p)) return dominant_duration + p.nominal_transition;
    const double target = std::max(*v_attack_h, p.v_ref);
    return dominant_duration + recovery_waveform(p.dominant_canl(), target, tau_rc).time_to_reach(0.9 * target);
}

struct CurrentSegment {
    double duration;
    double amps;
};

struct PinCurrentProfile {
    std::vector<CurrentSegment> p_h;
    std::vector<CurrentSegment> p_l;
};

/// Piecewise-constant pin currents of one attacker node while `bits` are on
/// the bus. Segments split at bit edges and pulse edges; equal neighbours merge.
inline PinCurrentProfile pin_current_profile(std::span<const Bit> bits, double bit_time, const PinPair& pins,
                                             const BusTopology& topo, const TransceiverParams& params,
                                             double phase_origin = 0.0) {
    PinCurrentProfile out;
    auto push = [](std::vector<CurrentSegment>& v, double d, double a) {
        if (d <= 0) return;
        if (!v.empty() && v.back().amps == a)
            v.back().duration += d;
        else
            v.push_back({d, a});
    };
    auto edges_of = [](const PinMode& m, double a, double b, double origin, std::vector<double>& out_edges) {
        const auto* pulse = std::get_if<PinMode::Pulse>(&m.get());
        if (!pulse) return;
        const double hi = pulse->duty * pulse->period;
        double k = std::floor((a - origin) / pulse->period);
        for (;; k += 1.0) {
            const double start = origin + k * pulse->period;
            if (start > b) break;
            for (double e : {start, start + hi})
                if (e > a && e < b) out_edges.push_back(e);
        }
    };

    NodeAttachment attacker{"attacker", true, true};
    BusTopology single = topo;
    single.nodes = {attacker};

    for (std::size_t k = 0; k < bits.size(); ++k) {
        const double a = static_cast<double>(k) * bit_time;
        const double b = a + bit_time;
        std::vector<double> cuts{a};
        edges_of(pins.p_h, a, b, phase_origin, cuts);
        edges_of(pins.p_l, a, b, phase_origin, cuts);
        std::sort(cuts.begin(), cuts.end());
        cuts.push_back(b);
        const Bit drive[1] = {bits[k]};
        for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
            const double mid = 0.5 * (cuts[c] + cuts[c + 1]);
            const PinPair at[1] = {pins};
            const auto sol = solve_bus(drive, at, single, params, mid - phase_origin);
            push(out.p_h, cuts[c + 1] - cuts[c], sol.pins[0].i_ph);
            push(out.p_l, cuts[c + 1] - cuts[c], sol.pins[0].i_pl);
        }
    }
    return out;
}

}  // namespace canvolt
