#pragma once

// Attack definitions on the VIDS analog pins, the pin-mode classification
// table, and closed-form threshold predictors.

#include <cmath>
#include <optional>
#include <string>
#include <variant>

#include "canvolt/electrical.hpp"
#include "canvolt/link.hpp"

namespace canvolt {

class AttackError : public Error {
public:
    using Error::Error;
};

namespace attack {
struct PassiveOvercurrent {};
struct ActiveOvercurrent {};
struct DoS {
    double v_attack_l = 5.0;
};
struct ForcedRetransmission {
    double v_attack_h = 5.0;
};
struct Pulse {
    Line line = Line::CanL;
    double period = 1e-6;
    double duty = 0.5;
    double v_high = kMaxPinLevel;
    double v_low = 0.0;
    /// Shift of the pulse phase origin relative to the window start.
    double phase_offset = 0.0;
};
}  // namespace attack

using AttackVariant = std::variant<attack::PassiveOvercurrent, attack::ActiveOvercurrent, attack::DoS,
                                   attack::ForcedRetransmission, attack::Pulse>;

struct AttackSpec {
    AttackVariant attack;
    double t_start = 0.0;
    double t_end = 0.0;
    std::string attacker_node;

    bool active_at(double t) const { return t >= t_start && t < t_end; }

    /// `max_period` is the frame transmission time; pulse periods must stay below it.
    void validate(double max_period = std::numeric_limits<double>::infinity()) const {
        if (!(t_start < t_end)) throw AttackError("attack window needs t_start < t_end");
        if (const auto* p = std::get_if<attack::Pulse>(&attack)) {
            PinMode::pulse(p->period, p->duty, p->v_high, p->v_low);
            if (!(p->period < max_period))
                throw AttackError("pulse period must be shorter than one frame transmission");
        }
        if (const auto* d = std::get_if<attack::DoS>(&attack)) PinMode::output_high(d->v_attack_l);
        if (const auto* f = std::get_if<attack::ForcedRetransmission>(&attack)) PinMode::output_high(f->v_attack_h);
    }
};

inline const char* attack_name(const AttackVariant& a) {
    switch (a.index()) {
        case 0: return "passive_overcurrent";
        case 1: return "active_overcurrent";
        case 2: return "dos";
        case 3: return "fra";
        default: return "pulse";
    }
}

enum class AttackClass {
    NotAnAttack,
    DoSClass,
    PassiveOvercurrentClass,
    ForcedRetransmissionClass,
    ActiveOvercurrentClass,
    DoSOrPassiveOvercurrent,
    DoSOrActiveOvercurrent,
    PulseClass,
    /// Pin pairs outside the published table (e.g. both pins high).
    Unclassified,
};

inline const char* to_string(AttackClass c) {
    switch (c) {
        case AttackClass::NotAnAttack: return "not_an_attack";
        case AttackClass::DoSClass: return "dos";
        case AttackClass::PassiveOvercurrentClass: return "passive_overcurrent";
        case AttackClass::ForcedRetransmissionClass: return "forced_retransmission";
        case AttackClass::ActiveOvercurrentClass: return "active_overcurrent";
        case AttackClass::DoSOrPassiveOvercurrent: return "dos_or_passive_overcurrent";
        case AttackClass::DoSOrActiveOvercurrent: return "dos_or_active_overcurrent";
        case AttackClass::PulseClass: return "pulse";
        case AttackClass::Unclassified: return "unclassified";
    }
    return "?";
}

enum class PinShape { Input, High, Low, Pulse };

inline PinShape shape_of(const PinMode& m) {
    switch (m.get().index()) {
        case 0: return PinShape::Input;
        case 1: return PinShape::High;
        case 2: return PinShape::Low;
        default: return PinShape::Pulse;
    }
}

inline AttackClass classify_pin_combo(const PinMode& p_h, const PinMode& p_l) {
    using S = PinShape;
    const S h = shape_of(p_h), l = shape_of(p_l);
    if (h == S::Input && l == S::Input) return AttackClass::NotAnAttack;
    if (h == S::Input && l == S::High) return AttackClass::DoSClass;
    if (h == S::Input && l == S::Low) return AttackClass::PassiveOvercurrentClass;
    if (h == S::High && l == S::Input) return AttackClass::ForcedRetransmissionClass;
    if (h == S::High && l == S::Low) return AttackClass::ActiveOvercurrentClass;
    if (h == S::Low && (l == S::Input || l == S::Low)) return AttackClass::DoSOrPassiveOvercurrent;
    if (h == S::Low && l == S::High) return AttackClass::DoSOrActiveOvercurrent;
    if ((h == S::Pulse && l == S::Input) || (h == S::Input && l == S::Pulse)) return AttackClass::PulseClass;
    return AttackClass::Unclassified;
}

inline AttackClass attack_class(const AttackVariant& a) {
    switch (a.index()) {
        case 0: return AttackClass::PassiveOvercurrentClass;
        case 1: return AttackClass::ActiveOvercurrentClass;
        case 2: return AttackClass::DoSClass;
        case 3: return AttackClass::ForcedRetransmissionClass;
        default: return AttackClass::PulseClass;
    }
}

/// Pin modes the attacker sets at time `t`. Pulse modes are returned intact;
/// see instantaneous_pins for the level they drive at `t`.
inline PinPair pin_override(const AttackSpec& spec, double t) {
    if (!spec.active_at(t)) return {PinMode::input(), PinMode::input()};
    return std::visit(
        [](const auto& a) -> PinPair {
            using A = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<A, attack::PassiveOvercurrent>) {
                return {PinMode::input(), PinMode::output_low()};
            } else if constexpr (std::is_same_v<A, attack::ActiveOvercurrent>) {
                return {PinMode::output_high(kMaxPinLevel), PinMode::output_low()};
            } else if constexpr (std::is_same_v<A, attack::DoS>) {
                return {PinMode::input(), PinMode::output_high(a.v_attack_l)};
            } else if constexpr (std::is_same_v<A, attack::ForcedRetransmission>) {
                return {PinMode::output_high(a.v_attack_h), PinMode::input()};
            } else {
                const PinMode p = PinMode::pulse(a.period, a.duty, a.v_high, a.v_low);
                if (a.line == Line::CanH) return {p, PinMode::input()};
                return {PinMode::input(), p};
            }
        },
        spec.attack);
}

/// Phase origin of a pulse attack: the window start plus the configured offset.
inline double pulse_origin(const AttackSpec& spec) {
    const auto* p = std::get_if<attack::Pulse>(&spec.attack);
    return spec.t_start + (p ? p->phase_offset : 0.0);
}

/// pin_override with pulse modes resolved to the constant level driven at `t`.
inline PinPair instantaneous_pins(const AttackSpec& spec, double t) {
    PinPair pins = pin_override(spec, t);
    auto resolve = [&](PinMode& m) {
        if (!m.is_pulse()) return;
        const double level = *m.level_at(t - pulse_origin(spec));
        m = level > 0.0 ? PinMode::output_high(level) : PinMode::output_low();
    };
    resolve(pins.p_h);
    resolve(pins.p_l);
    return pins;
}

enum class OvercurrentVariant { Passive, Active };

struct OvercurrentResult {
    double amps;
    bool exceeds(double i_max) const { return amps > i_max; }
};

/// Peak pin current of an overcurrent attack. `attacker` carries the source
/// limits of the attacking pins (ideal by default).
inline OvercurrentResult overcurrent_current(OvercurrentVariant variant, const TransceiverParams& params,
                                             const BusTopology& topo, NodeAttachment attacker = {}) {
    attacker.has_ph = attacker.has_pl = true;
    if (attacker.name.empty()) attacker.name = "attacker";
    BusTopology single = topo;
    single.nodes = {attacker};
    const PinPair pins[1] = {variant == OvercurrentVariant::Passive
                                 ? PinPair{PinMode::input(), PinMode::output_low()}
                                 : PinPair{PinMode::output_high(kMaxPinLevel), PinMode::output_low()}};
    // Passive overcurrent needs the transceiver to drive; active does not.
    const Bit drive[1] = {variant == OvercurrentVariant::Passive ? Bit::Dominant : Bit::Recessive};
    const auto s = solve_bus(drive, pins, single, params);
    return {std::max(std::abs(s.pins[0].i_ph), std::abs(s.pins[0].i_pl))};
}

/// Differential voltage of a dominant bit with CANL held at `v`.
inline double dos_differential(double v, const TransceiverParams& params, const BusTopology& topo) {
    return solve_lines(true, std::nullopt, LineSource{v}, params, topo.r_load()).v.v_diff();
}

/// A DoS voltage succeeds when no dominant bit is recognised any more.
inline bool dos_succeeds(double v, const TransceiverParams& params, const BusTopology& topo, const BitTiming& timing) {
    return !(dos_differential(v, params, topo) > timing.dominant_threshold);
}

/// Smallest successful DoS voltage on the 0.1 V grid from 0.1 to 5.0 V.
inline std::optional<double> min_dos_voltage(const TransceiverParams& params, const BusTopology& topo,
                                             const BitTiming& timing) {
    for (int k = 1; k <= 50; ++k)
        if (dos_succeeds(k / 10.0, params, topo, timing)) return k / 10.0;
    return std::nullopt;
}

/// Time after the ACK-delimiter start at which the transmitter's comparator
/// returns to recessive with CANH held at `v`; infinity if it never does.
inline double fra_release_time(double v, const TransceiverParams& params, const BitTiming& timing) {
    if (!slow_recovery(v, params)) return timing.ack_delay;
    const double target_l = v - timing.recessive_threshold;
    return timing.ack_delay + recovery_waveform(params.dominant_canl(), v, params.tau_rc).time_to_reach(target_l);
}

/// FRA succeeds when the transmitter still reads dominant at the ACK
/// delimiter's sample point.
inline bool fra_succeeds(double v, const TransceiverParams& params, const BitTiming& timing) {
    return fra_release_time(v, params, timing) > timing.sample_point * timing.bit_time();
}

/// Smallest successful FRA voltage on the 0.5 V grid from 2.5 to 5.0 V.
inline std::optional<double> min_fra_voltage(const TransceiverParams& params, const BusTopology&,
                                             const BitTiming& timing) {
    for (int k = 5; k <= 10; ++k)
        if (fra_succeeds(k * 0.5, params, timing)) return k * 0.5;
    return std::nullopt;
}

/// Length of the recessive disturbance a pulse inflicts on a dominant bit.
/// On CANL the high phase disturbs; on CANH the low phase does, lengthened by
/// the slower transceiver transition.
inline Picos pulse_disturbance(Line line, Picos period, double duty, const TransceiverParams& params) {
    const Picos high = static_cast<Picos>(std::llround(duty * static_cast<double>(period)));
    if (line == Line::CanL) return high;
    return period - high + to_picos(params.transition_extension);
}

inline bool pulse_succeeds(Line line, Picos period, double duty, const TransceiverParams& params,
                           const BitTiming& timing) {
    return pulse_disturbance(line, period, duty, params) >= timing.hold_picos();
}

/// Smallest successful pulse period on a grid (default 500..700 ns, 10 ns steps).
inline std::optional<Picos> min_pulse_period(Line line, double duty, const TransceiverParams& params,
                                             const BitTiming& timing, Picos from = 500'000, Picos to = 700'000,
                                             Picos step = 10'000) {
    for (Picos p = from; p <= to; p += step)
        if (pulse_succeeds(line, p, duty, params, timing)) return p;
    return std::nullopt;
}

/// Continuous lower bound on the pulse period.
inline double pulse_period_bound(Line line, double duty, const TransceiverParams& params, const BitTiming& timing) {
    if (line == Line::CanL) return timing.decode_hold / duty;
    return (timing.decode_hold - params.transition_extension) / (1.0 - duty);
}

}  // namespace canvolt
