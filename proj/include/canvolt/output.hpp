#pragma once

// Output formats: trace CSV, summary JSON, sweep CSV, the bit-length table,
// and the expectation check used by `simulate --check`.

#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "canvolt/engine.hpp"

namespace canvolt {

namespace detail {
inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

inline std::string format_value(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}
}  // namespace detail

inline const char* line_name(std::int8_t line) {
    if (line == 0) return "canh";
    if (line == 1) return "canl";
    return "";
}

/// Columns: time_s, kind, ecu, line, value, detail.
inline void write_trace_csv(std::ostream& out, const Trace& trace) {
    out << "time_s,kind,ecu,line,value,detail\n";
    for (const auto& r : trace.records) {
        out << format_seconds(r.t) << ',' << to_string(r.kind) << ',' << detail::csv_field(trace.ecu_name(r.ecu)) << ','
            << line_name(r.line) << ',' << detail::format_value(r.value) << ',' << detail::csv_field(trace.detail(r))
            << '\n';
    }
}

inline nlohmann::json summary_json(const Summary& s, const ScenarioConfig& cfg) {
    std::string indicator;
    for (int x : s.indicator) indicator += x ? '1' : '0';
    nlohmann::json devices = nlohmann::json::array();
    for (const auto& d : s.device_events)
        devices.push_back({{"line", d.line == Line::CanH ? "canh" : "canl"}, {"event", to_string(d.kind)}, {"t", d.t}});
    nlohmann::json j = {
        {"duration", cfg.duration},
        {"attack", cfg.attack ? attack_name(cfg.attack->attack) : "none"},
        {"irs", device_name(cfg.irs.make())},
        {"frames_sent", s.frames_sent},
        {"frames_received", s.frames_received},
        {"undelivered", s.undelivered},
        {"indicator", indicator},
        {"retransmissions", s.retransmissions},
        {"error_frames", s.error_frames},
        {"attack_success", s.attack_success},
        {"failure_reason", s.failure_reason},
        {"device_events", devices},
        {"damaged", s.damaged},
        {"damage_time", s.damage_time ? nlohmann::json(*s.damage_time) : nlohmann::json(nullptr)},
    };
    return j;
}

/// Columns: param, success, first_failure_reason.
inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
    out << "param,success,first_failure_reason\n";
    for (const auto& r : rows)
        out << detail::format_value(r.value) << ',' << (r.success ? 1 : 0) << ',' << detail::csv_field(r.reason)
            << '\n';
}

/// Smallest grid value with a successful attack, if any.
inline std::optional<double> first_success(const std::vector<SweepRow>& rows) {
    for (const auto& r : rows)
        if (r.success) return r.value;
    return std::nullopt;
}

struct TauBitRow {
    double v_attack_h;
    double tau_bit;
};

inline std::vector<TauBitRow> tau_bit_table(const TransceiverParams& p, const BitTiming& t) {
    std::vector<TauBitRow> out;
    for (int k = 5; k <= 10; ++k) {
        const double v = 0.5 * k;
        out.push_back({v, measure_tau_bit(t.bit_time(), v, p.tau_rc, p)});
    }
    return out;
}

/// Human-readable mismatches between a run and the scenario's expectations.
inline std::vector<std::string> check_expectations(const Expectations& x, const Summary& s) {
    std::vector<std::string> out;
    std::string indicator;
    for (int v : s.indicator) indicator += v ? '1' : '0';
    auto yn = [](bool b) { return b ? std::string("true") : std::string("false"); };
    if (x.indicator && *x.indicator != indicator)
        out.push_back("indicator: expected " + *x.indicator + ", got " + indicator);
    if (x.attack_success && *x.attack_success != s.attack_success)
        out.push_back("attack_success: expected " + yn(*x.attack_success) + ", got " + yn(s.attack_success));
    if (x.damaged && *x.damaged != s.damaged)
        out.push_back("damaged: expected " + yn(*x.damaged) + ", got " + yn(s.damaged));
    if (x.min_retransmissions && s.retransmissions < *x.min_retransmissions)
        out.push_back("retransmissions: expected at least " + std::to_string(*x.min_retransmissions) + ", got " +
                      std::to_string(s.retransmissions));
    if (x.frames_received && *x.frames_received != s.frames_received)
        out.push_back("frames_received: expected " + std::to_string(*x.frames_received) + ", got " +
                      std::to_string(s.frames_received));
    return out;
}

}  // namespace canvolt
