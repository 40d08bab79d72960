#pragma once

// Calibrated parameter sets: closed-form calibration from measured targets,
// and the JSON parameter file.

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "canvolt/electrical.hpp"
#include "canvolt/link.hpp"

namespace canvolt {

class InfeasibleTarget : public Error {
public:
    using Error::Error;
};

struct ParameterSet {
    TransceiverParams transceiver;
    BitTiming timing;
};

/// Measured quantities the calibration can be fitted to (SI units).
struct CalibrationTargets {
    std::optional<double> sink_current;   // A, CANL sink with the pin held at 5 V
    std::optional<double> dos_threshold;  // V, smallest successful V_attack,L
    std::optional<double> tau_bit_5v;     // s, bit length time at V_attack,H = 5 V
    std::optional<double> pulse_canl;     // s, minimum CANL pulse period at 50% duty
    std::optional<double> pulse_canh;     // s, minimum CANH pulse period at 50% duty
    std::optional<double> fra_threshold;  // V, smallest successful V_attack,H

    static CalibrationTargets defaults() { return {0.281, 2.2, 3.16e-6, 680e-9, 570e-9, 4.5}; }
};

namespace detail {
// Grid rounding with `per_unit` steps per unit (10 for 0.1 ohm, 1e9 for 1 ns).
inline double ceil_to(double x, double per_unit) { return std::ceil(x * per_unit - 1e-9) / per_unit; }
inline double round_to(double x, double per_unit) { return std::round(x * per_unit) / per_unit; }
inline constexpr double kR_load = 60.0;
}  // namespace detail

/// Solves the calibration equations on top of `base`. Resistances are kept on
/// a 0.1 ohm grid and times on a 1 ns grid, rounded so the thresholds land on
/// the targeted grid point.
inline ParameterSet calibrate(const CalibrationTargets& t, ParameterSet base = {}) {
    auto& p = base.transceiver;
    auto& tm = base.timing;
    if (t.sink_current) {
        if (!(*t.sink_current > 0)) throw InfeasibleTarget("sink_current must be > 0");
        p.r_sink = detail::round_to((kMaxPinLevel - p.r_sink_offset) / *t.sink_current, 10.0);
        if (!(p.r_sink > 0)) throw InfeasibleTarget("sink_current is too large for the sink offset");
    }
    if (t.dos_threshold) {
        const double headroom = p.dominant_canh() - *t.dos_threshold;
        const double r = headroom * detail::kR_load / tm.dominant_threshold - detail::kR_load;
        if (!(r > 0)) throw InfeasibleTarget("dos_threshold leaves no room for a dominant bit");
        p.r_drive_high = detail::ceil_to(r, 10.0);
    }
    if (t.tau_bit_5v) {
        const double rise = *t.tau_bit_5v - tm.bit_time();
        if (!(rise > 0)) throw InfeasibleTarget("tau_bit_5v must exceed the bit time");
        p.tau_rc = rise / std::log((kMaxPinLevel - p.dominant_canl()) / (0.1 * kMaxPinLevel));
    }
    if (t.pulse_canl) {
        const double hold = detail::round_to(0.5 * *t.pulse_canl, 1e9);
        if (!(hold > 0 && hold < tm.bit_time())) throw InfeasibleTarget("pulse_canl gives a decode hold outside the bit");
        tm.decode_hold = hold;
    }
    if (t.pulse_canh) {
        const double ext = detail::round_to(tm.decode_hold - 0.5 * *t.pulse_canh, 1e9);
        if (ext < 0) throw InfeasibleTarget("pulse_canh is longer than the CANL period allows");
        p.transition_extension = ext;
    }
    if (t.fra_threshold) {
        const double v = *t.fra_threshold;
        if (!(v > p.dominant_canh() && v <= kMaxPinLevel))
            throw InfeasibleTarget("fra_threshold must lie above the dominant CANH level");
        const double rise = p.tau_rc * std::log((v - p.dominant_canl()) / tm.recessive_threshold);
        const double delay = detail::ceil_to(tm.sample_point * tm.bit_time() - rise, 1e9);
        if (!(delay >= 0 && delay < tm.bit_time()))
            throw InfeasibleTarget("fra_threshold needs an ACK loop delay outside [0, bit_time)");
        tm.ack_delay = delay;
    }
    p.validate();
    tm.validate();
    return base;
}

/// Parses "all" or a comma-separated list of name[=value] items; a bare name
/// uses the default target value.
inline CalibrationTargets parse_targets(const std::string& list) {
    const CalibrationTargets d = CalibrationTargets::defaults();
    if (list == "all") return d;
    CalibrationTargets out;
    const std::map<std::string, std::pair<std::optional<double> CalibrationTargets::*, double>> names{
        {"sink_current", {&CalibrationTargets::sink_current, *d.sink_current}},
        {"dos_threshold", {&CalibrationTargets::dos_threshold, *d.dos_threshold}},
        {"tau_bit_5v", {&CalibrationTargets::tau_bit_5v, *d.tau_bit_5v}},
        {"pulse_canl", {&CalibrationTargets::pulse_canl, *d.pulse_canl}},
        {"pulse_canh", {&CalibrationTargets::pulse_canh, *d.pulse_canh}},
        {"fra_threshold", {&CalibrationTargets::fra_threshold, *d.fra_threshold}},
    };
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        const auto eq = item.find('=');
        const std::string name = item.substr(0, eq);
        const auto it = names.find(name);
        if (it == names.end()) throw InfeasibleTarget("unknown calibration target '" + name + "'");
        double value = it->second.second;
        if (eq != std::string::npos) {
            try {
                std::size_t used = 0;
                value = std::stod(item.substr(eq + 1), &used);
                if (used != item.size() - eq - 1) throw std::invalid_argument(item);
            } catch (const std::logic_error&) {
                throw InfeasibleTarget("bad value in calibration target '" + item + "'");
            }
        }
        out.*(it->second.first) = value;
    }
    return out;
}

inline nlohmann::json to_json(const ParameterSet& s) {
    const auto& p = s.transceiver;
    const auto& t = s.timing;
    return {
        {"transceiver",
         {{"v_dd", p.v_dd},
          {"v_ref", p.v_ref},
          {"diode_drop", p.diode_drop},
          {"v_ce_sat", p.v_ce_sat},
          {"r_drive_high", p.r_drive_high},
          {"r_sink_offset", p.r_sink_offset},
          {"r_sink", p.r_sink},
          {"reverse_blocking", p.reverse_blocking},
          {"tau_rc", p.tau_rc},
          {"nominal_transition", p.nominal_transition},
          {"transition_extension", p.transition_extension}}},
        {"timing",
         {{"bus_speed", t.bus_speed},
          {"sample_point", t.sample_point},
          {"decode_hold", t.decode_hold},
          {"dominant_threshold", t.dominant_threshold},
          {"recessive_threshold", t.recessive_threshold},
          {"ack_delay", t.ack_delay}}},
    };
}

/// Reads a parameter set; missing fields keep the values of `base`, unknown
/// fields are rejected.
inline ParameterSet parameters_from_json(const nlohmann::json& j, ParameterSet base = {}) {
    auto fail = [](const std::string& path, const std::string& msg) { throw ConfigError(0, path, msg); };
    if (!j.is_object()) fail("", "parameter file must hold a JSON object");
    auto num = [&](const nlohmann::json& v, const std::string& path) {
        if (!v.is_number()) fail(path, "must be a number");
        return v.get<double>();
    };
    for (const auto& [section, body] : j.items()) {
        if (!body.is_object()) fail(section, "must be an object");
        for (const auto& [key, v] : body.items()) {
            const std::string path = section + "." + key;
            auto& p = base.transceiver;
            auto& t = base.timing;
            if (section == "transceiver") {
                if (key == "v_dd") p.v_dd = num(v, path);
                else if (key == "v_ref") p.v_ref = num(v, path);
                else if (key == "diode_drop") p.diode_drop = num(v, path);
                else if (key == "v_ce_sat") p.v_ce_sat = num(v, path);
                else if (key == "r_drive_high") p.r_drive_high = num(v, path);
                else if (key == "r_sink_offset") p.r_sink_offset = num(v, path);
                else if (key == "r_sink") p.r_sink = num(v, path);
                else if (key == "reverse_blocking") {
                    if (!v.is_boolean()) fail(path, "must be true or false");
                    p.reverse_blocking = v.get<bool>();
                } else if (key == "tau_rc") p.tau_rc = num(v, path);
                else if (key == "nominal_transition") p.nominal_transition = num(v, path);
                else if (key == "transition_extension") p.transition_extension = num(v, path);
                else fail(path, "unknown parameter");
            } else if (section == "timing") {
                if (key == "bus_speed") t.bus_speed = num(v, path);
                else if (key == "sample_point") t.sample_point = num(v, path);
                else if (key == "decode_hold") t.decode_hold = num(v, path);
                else if (key == "dominant_threshold") t.dominant_threshold = num(v, path);
                else if (key == "recessive_threshold") t.recessive_threshold = num(v, path);
                else if (key == "ack_delay") t.ack_delay = num(v, path);
                else fail(path, "unknown parameter");
            } else {
                fail(section, "unknown parameter section");
            }
        }
    }
    try {
        base.transceiver.validate();
        base.timing.validate();
    } catch (const Error& e) {
        fail("", e.what());
    }
    return base;
}

inline ParameterSet load_parameters(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open parameter file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(0, "", path + ": " + e.what());
    }
    return parameters_from_json(j);
}

inline void save_parameters(const ParameterSet& s, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write parameter file " + path);
    out << to_json(s).dump(2) << '\n';
    if (!out) throw Error("write failed: " + path);
}

/// Parameter file used by the CLI: $CANVOLT_PARAMS if set, else the shipped default.
inline std::string default_parameter_path() {
    if (const char* env = std::getenv("CANVOLT_PARAMS"); env && *env) return env;
#ifdef CANVOLT_DEFAULT_PARAMS
    return CANVOLT_DEFAULT_PARAMS;
#else
    return "params/default.json";
#endif
}

}  // namespace canvolt
