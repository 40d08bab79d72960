#pragma once

// Protective devices in series with the VIDS analog pins: fuse, circuit
// breaker, resettable fuse, and heating coil + thermostat.

#include <cmath>
#include <limits>
#include <string>
#include <variant>

#include "canvolt/electrical.hpp"

namespace canvolt {

class IrsError : public Error {
public:
    enum class Code { NotTripped, InvalidStep, InvalidDevice };
    IrsError(Code code, const std::string& what) : Error(what), code_(code) {}
    Code code() const noexcept { return code_; }

private:
    Code code_;
};

namespace detail {
// Event times are rounded to the picosecond grid; these absorb that rounding.
inline constexpr double kTimeTolerance = 1e-13;
inline constexpr double kTempTolerance = 1e-9;
inline constexpr double kNever = std::numeric_limits<double>::infinity();
}  // namespace detail

struct FuseState {
    double rating = 0.010;
    double opening_time = 1e-6;
    double over_timer = 0.0;
    bool blown = false;
};

/// Threshold-and-duration trip: open once the current has exceeded the rating
/// for the opening time without interruption. Blown is absorbing.
inline FuseState fuse_step(FuseState s, double i, double dt) {
    if (!(dt > 0)) throw IrsError(IrsError::Code::InvalidStep, "dt must be > 0");
    if (s.blown) return s;
    if (std::abs(i) > s.rating) {
        s.over_timer += dt;
        if (s.over_timer + detail::kTimeTolerance >= s.opening_time) s.blown = true;
    } else {
        s.over_timer = 0.0;
    }
    return s;
}

inline double fuse_time_to_trip(const FuseState& s, double i) {
    if (s.blown || !(std::abs(i) > s.rating)) return detail::kNever;
    return std::max(0.0, s.opening_time - s.over_timer);
}

struct BreakerState {
    double rating = 0.010;
    double opening_time = 1e-6;
    double over_timer = 0.0;
    bool tripped = false;
};

inline BreakerState breaker_step(BreakerState s, double i, double dt) {
    const FuseState f = fuse_step(FuseState{s.rating, s.opening_time, s.over_timer, s.tripped}, i, dt);
    s.over_timer = f.over_timer;
    s.tripped = f.blown;
    return s;
}

/// Manual reset of a tripped breaker.
inline BreakerState breaker_reset(BreakerState s) {
    if (!s.tripped) throw IrsError(IrsError::Code::NotTripped, "breaker is not tripped");
    s.tripped = false;
    s.over_timer = 0.0;
    return s;
}

struct ResettableFuseState {
    double rating = 0.010;
    double opening_time = 1e-6;
    double leakage_current = 0.100;
    double over_timer = 0.0;
    bool open = false;
};

/// Current that passes the device when the source could deliver `capability`.
inline double resettable_fuse_current(const ResettableFuseState& s, double capability) {
    if (!s.open) return capability;
    return std::copysign(std::min(s.leakage_current, std::abs(capability)), capability);
}

/// Trips like a fuse; while open it passes up to the leakage current and
/// recloses once the current through it falls to the rating or below.
inline ResettableFuseState resettable_fuse_step(ResettableFuseState s, double i, double dt) {
    if (!(dt > 0)) throw IrsError(IrsError::Code::InvalidStep, "dt must be > 0");
    if (s.open) {
        if (std::abs(i) <= s.rating) {
            s.open = false;
            s.over_timer = 0.0;
        }
        return s;
    }
    const FuseState f = fuse_step(FuseState{s.rating, s.opening_time, s.over_timer, false}, i, dt);
    s.over_timer = f.over_timer;
    s.open = f.blown;
    return s;
}

struct ThermostatCoil {
    double r_coil = 1.0;
    double temp = 25.0;
    double t_ambient = 25.0;
    double t_limit = 40.0;
    double hysteresis = 2.0;
    double thermal_gain = 40.0;
    double tau_thermal = 2.0;
    bool open = false;

    double steady_temp(double i) const { return t_ambient + thermal_gain * i * i * r_coil; }
};

namespace detail {
inline ThermostatCoil thermostat_switch(ThermostatCoil s) {
    if (!s.open && s.temp + kTempTolerance >= s.t_limit) s.open = true;
    if (s.open && s.temp - kTempTolerance <= s.t_limit - s.hysteresis) s.open = false;
    return s;
}
}  // namespace detail

/// First-order (Euler) thermal update of the coil and thermostat.
inline ThermostatCoil thermostat_step(ThermostatCoil s, double i, double dt) {
    if (!(dt > 0)) throw IrsError(IrsError::Code::InvalidStep, "dt must be > 0");
    if (dt > s.tau_thermal / 10.0) throw IrsError(IrsError::Code::InvalidStep, "dt must be <= tau_thermal / 10");
    s.temp += dt / s.tau_thermal * (s.steady_temp(i) - s.temp);
    return detail::thermostat_switch(s);
}

/// Time until the thermostat switches under a constant coil current.
inline double thermostat_time_to_switch(const ThermostatCoil& s, double i) {
    const double ss = s.steady_temp(i);
    const double target = s.open ? s.t_limit - s.hysteresis : s.t_limit;
    const bool reaches = s.open ? ss < target : ss > target;
    if (!reaches) return detail::kNever;
    return std::max(0.0, s.tau_thermal * std::log((ss - s.temp) / (ss - target)));
}

/// Exact exponential update under a constant coil current.
inline ThermostatCoil thermostat_advance(ThermostatCoil s, double i, double dt) {
    const double ss = s.steady_temp(i);
    s.temp = ss + (s.temp - ss) * std::exp(-dt / s.tau_thermal);
    return detail::thermostat_switch(s);
}

struct NoDevice {};

using ProtectiveDevice = std::variant<NoDevice, FuseState, BreakerState, ResettableFuseState, ThermostatCoil>;

inline const char* device_name(const ProtectiveDevice& d) {
    switch (d.index()) {
        case 0: return "none";
        case 1: return "fuse";
        case 2: return "breaker";
        case 3: return "resettable_fuse";
        default: return "thermostat";
    }
}

/// Series connection the device presents to the solver.
inline PinLink device_link(const ProtectiveDevice& d) {
    if (const auto* f = std::get_if<FuseState>(&d)) return {!f->blown};
    if (const auto* b = std::get_if<BreakerState>(&d)) return {!b->tripped};
    if (const auto* r = std::get_if<ResettableFuseState>(&d)) {
        if (r->open) return {true, r->leakage_current};
        return {};
    }
    if (const auto* t = std::get_if<ThermostatCoil>(&d)) return {!t->open};
    return {};
}

inline bool device_conducts_fully(const ProtectiveDevice& d) {
    const PinLink l = device_link(d);
    return l.connected && std::isinf(l.current_limit);
}

/// Time until the device changes its connection under constant current `i`
/// (`coil` is the total coil current for a thermostat).
inline double device_time_to_change(const ProtectiveDevice& d, double i, double coil) {
    if (const auto* f = std::get_if<FuseState>(&d)) return fuse_time_to_trip(*f, i);
    if (const auto* b = std::get_if<BreakerState>(&d))
        return fuse_time_to_trip(FuseState{b->rating, b->opening_time, b->over_timer, b->tripped}, i);
    if (const auto* r = std::get_if<ResettableFuseState>(&d)) {
        if (r->open) return std::abs(i) <= r->rating ? 0.0 : detail::kNever;
        return fuse_time_to_trip(FuseState{r->rating, r->opening_time, r->over_timer, false}, i);
    }
    if (const auto* t = std::get_if<ThermostatCoil>(&d)) return thermostat_time_to_switch(*t, coil);
    return detail::kNever;
}

/// Exact advance of a device over `dt` seconds of constant current. A
/// resettable fuse recloses at the start of the interval if the current
/// allows; with dt = 0 only such instantaneous switching is applied.
inline ProtectiveDevice device_advance(const ProtectiveDevice& d, double i, double coil, double dt) {
    if (!(dt > 0)) {
        if (const auto* r = std::get_if<ResettableFuseState>(&d); r && r->open && std::abs(i) <= r->rating) {
            ResettableFuseState s = *r;
            s.open = false;
            s.over_timer = 0.0;
            return s;
        }
        if (const auto* t = std::get_if<ThermostatCoil>(&d)) return detail::thermostat_switch(*t);
        return d;
    }
    return std::visit(
        [&](const auto& s) -> ProtectiveDevice {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, FuseState>) {
                return fuse_step(s, i, dt);
            } else if constexpr (std::is_same_v<S, BreakerState>) {
                return breaker_step(s, i, dt);
            } else if constexpr (std::is_same_v<S, ResettableFuseState>) {
                return resettable_fuse_step(s, i, dt);
            } else if constexpr (std::is_same_v<S, ThermostatCoil>) {
                return thermostat_advance(s, coil, dt);
            } else {
                return s;
            }
        },
        d);
}

enum class DeviceKind { None, Fuse, Breaker, ResettableFuse, Thermostat };

/// IRS configuration: one device of the given kind in series with each pin,
/// plus an optional externally driven heating-coil current over a window.
struct IrsConfig {
    DeviceKind kind = DeviceKind::None;
    double rating = 0.010;
    double opening_time = 1e-6;
    double leakage_current = 0.100;
    ThermostatCoil thermostat;
    double coil_drive = 0.0;
    double coil_t_start = 0.0;
    double coil_t_end = std::numeric_limits<double>::infinity();

    void validate() const {
        if (!(rating > 0 && opening_time > 0 && leakage_current >= 0))
            throw IrsError(IrsError::Code::InvalidDevice, "device rating and opening time must be > 0");
        if (!(thermostat.tau_thermal > 0 && thermostat.r_coil >= 0 && thermostat.hysteresis >= 0))
            throw IrsError(IrsError::Code::InvalidDevice, "invalid thermostat parameters");
        if (!(coil_t_start <= coil_t_end)) throw IrsError(IrsError::Code::InvalidDevice, "coil window is reversed");
    }

    ProtectiveDevice make() const {
        switch (kind) {
            case DeviceKind::None: return NoDevice{};
            case DeviceKind::Fuse: return FuseState{rating, opening_time};
            case DeviceKind::Breaker: return BreakerState{rating, opening_time};
            case DeviceKind::ResettableFuse: return ResettableFuseState{rating, opening_time, leakage_current};
            case DeviceKind::Thermostat: return thermostat;
        }
        return NoDevice{};
    }

    double coil_drive_at(double t) const { return (t >= coil_t_start && t < coil_t_end) ? coil_drive : 0.0; }
};

}  // namespace canvolt
