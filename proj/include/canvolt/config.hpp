#pragma once

// Scenario files: INI-style sections ([bus], [params], [ecu.<name>], [attack],
// [irs], [damage], [trace], [sweep], [expect]) parsed into ScenarioConfig with
// line-accurate errors, and serialized back.

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "canvolt/engine.hpp"
#include "canvolt/params.hpp"

namespace canvolt {

struct IniEntry {
    std::string key;
    std::string value;
    int line = 0;
};

struct IniSection {
    std::string name;
    int line = 0;
    std::vector<IniEntry> entries;

    const IniEntry* find(const std::string& key) const {
        for (const auto& e : entries)
            if (e.key == key) return &e;
        return nullptr;
    }
};

struct IniDocument {
    std::vector<IniSection> sections;

    IniSection* find(const std::string& name) {
        for (auto& s : sections)
            if (s.name == name) return &s;
        return nullptr;
    }
    const IniSection* find(const std::string& name) const { return const_cast<IniDocument*>(this)->find(name); }

    /// Sets "section.key" (the section is everything before the last dot),
    /// creating the section or key if needed.
    void set(const std::string& path, const std::string& value) {
        const auto dot = path.rfind('.');
        if (dot == std::string::npos) throw ConfigError(0, path, "expected section.key");
        const std::string name = path.substr(0, dot), key = path.substr(dot + 1);
        IniSection* s = find(name);
        if (!s) s = &sections.emplace_back(IniSection{name, 0, {}});
        for (auto& e : s->entries)
            if (e.key == key) {
                e.value = value;
                return;
            }
        s->entries.push_back({key, value, 0});
    }

    /// Source line of a field path ("attack.duty", "ecu.C.period", "ecu.C"); 0 if unknown.
    int line_of(const std::string& path) const {
        if (const IniSection* s = find(path)) return s->line;
        const auto dot = path.rfind('.');
        if (dot == std::string::npos) return 0;
        if (const IniSection* s = find(path.substr(0, dot))) {
            if (const IniEntry* e = s->find(path.substr(dot + 1))) return e->line;
            return s->line;
        }
        return 0;
    }
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline std::string unquote(const std::string& v) {
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
    return v;
}

}  // namespace detail

/// Tokenizes INI text. `#` and `;` start comments; values may be double-quoted.
inline IniDocument parse_ini(std::string_view text) {
    IniDocument doc;
    std::istringstream in{std::string(text)};
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        std::string s = raw;
        bool quoted = false;
        for (std::size_t k = 0; k < s.size(); ++k) {
            if (s[k] == '"') quoted = !quoted;
            if (!quoted && (s[k] == '#' || s[k] == ';')) {
                s.resize(k);
                break;
            }
        }
        s = detail::trim(s);
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']') throw ConfigError(line, "", "unterminated section header");
            const std::string name = detail::trim(std::string_view(s).substr(1, s.size() - 2));
            if (name.empty()) throw ConfigError(line, "", "empty section name");
            if (doc.find(name)) throw ConfigError(line, name, "duplicate section");
            doc.sections.push_back({name, line, {}});
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError(line, "", "expected key = value");
        if (doc.sections.empty()) throw ConfigError(line, "", "key outside of a section");
        IniSection& sec = doc.sections.back();
        const std::string key = detail::trim(std::string_view(s).substr(0, eq));
        if (key.empty()) throw ConfigError(line, sec.name, "empty key");
        if (sec.find(key)) throw ConfigError(line, sec.name + "." + key, "duplicate key");
        sec.entries.push_back({key, detail::unquote(detail::trim(std::string_view(s).substr(eq + 1))), line});
    }
    return doc;
}

/// Shortest decimal text that reads back to the same double.
inline std::string format_number(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

namespace detail {

class ConfigBuilder {
public:
    ConfigBuilder(const IniDocument& doc, const ParameterSet& base) : doc_(doc) {
        cfg_.params = base.transceiver;
        cfg_.timing = base.timing;
    }

    ScenarioConfig build() {
        for (const auto& s : doc_.sections) {
            if (s.name == "bus") section(s, bus_keys());
            else if (s.name == "params") section(s, params_keys());
            else if (s.name.rfind("ecu.", 0) == 0) ecu(s);
            else if (s.name == "attack") attack_section(s);
            else if (s.name == "irs") section(s, irs_keys());
            else if (s.name == "damage") section(s, damage_keys());
            else if (s.name == "trace") section(s, trace_keys());
            else if (s.name == "sweep") sweep_section(s);
            else if (s.name == "expect") section(s, expect_keys());
            else throw ConfigError(s.line, s.name, "unknown section");
        }
        try {
            cfg_.validate();
        } catch (const ConfigError& e) {
            throw ConfigError(doc_.line_of(e.path()), e.path(), e.message());
        }
        return cfg_;
    }

private:
    using Setter = std::function<void(const std::string& value)>;
    using Keys = std::map<std::string, Setter>;

    struct Ctx {
        int line;
        std::string path;
    };

    [[noreturn]] void fail(const std::string& msg) const { throw ConfigError(ctx_.line, ctx_.path, msg); }

    double number(const std::string& v) const {
        double out = 0.0;
        const char* b = v.data();
        const char* e = b + v.size();
        if (b != e && *b == '+') ++b;
        const auto r = std::from_chars(b, e, out);
        if (v.empty() || r.ec != std::errc() || r.ptr != e) fail("expected a number, got '" + v + "'");
        return out;
    }

    int integer(const std::string& v) const {
        const double d = number(v);
        if (d != std::floor(d) || std::abs(d) > 1e9) fail("expected an integer, got '" + v + "'");
        return static_cast<int>(d);
    }

    bool boolean(const std::string& v) const {
        if (v == "true" || v == "yes" || v == "1") return true;
        if (v == "false" || v == "no" || v == "0") return false;
        fail("expected true or false, got '" + v + "'");
    }

    unsigned hex_or_dec(const std::string& v) const {
        unsigned out = 0;
        const bool hex = v.size() > 2 && v[0] == '0' && (v[1] == 'x' || v[1] == 'X');
        const char* b = v.data() + (hex ? 2 : 0);
        const char* e = v.data() + v.size();
        const auto r = std::from_chars(b, e, out, hex ? 16 : 10);
        if (v.empty() || r.ec != std::errc() || r.ptr != e) fail("expected an integer, got '" + v + "'");
        return out;
    }

    std::vector<std::uint8_t> bytes(const std::string& v) const {
        std::vector<std::uint8_t> out;
        std::string tok;
        std::istringstream in(v);
        while (in >> tok) {
            std::stringstream parts(tok);
            std::string b;
            while (std::getline(parts, b, ',')) {
                if (b.empty()) continue;
                if (b.size() > 2 && b[0] == '0' && (b[1] == 'x' || b[1] == 'X')) b = b.substr(2);
                unsigned x = 0;
                const auto r = std::from_chars(b.data(), b.data() + b.size(), x, 16);
                if (r.ec != std::errc() || r.ptr != b.data() + b.size() || x > 0xFF)
                    fail("expected hex bytes, got '" + v + "'");
                out.push_back(static_cast<std::uint8_t>(x));
            }
        }
        return out;
    }

    void section(const IniSection& s, const Keys& keys) {
        for (const auto& e : s.entries) {
            ctx_ = {e.line, s.name + "." + e.key};
            const auto it = keys.find(e.key);
            if (it == keys.end()) fail("unknown key");
            it->second(e.value);
        }
    }

    Keys bus_keys() {
        return {
            {"duration", [this](auto& v) { cfg_.duration = number(v); }},
            {"bus_speed", [this](auto& v) { cfg_.timing.bus_speed = number(v); }},
            {"termination_a", [this](auto& v) { cfg_.termination_a = number(v); }},
            {"termination_b", [this](auto& v) { cfg_.termination_b = number(v); }},
        };
    }

    Keys params_keys() {
        auto& p = cfg_.params;
        auto& t = cfg_.timing;
        auto num = [this](double& field) { return [this, &field](auto& v) { field = number(v); }; };
        return {
            {"v_dd", num(p.v_dd)},
            {"v_ref", num(p.v_ref)},
            {"diode_drop", num(p.diode_drop)},
            {"v_ce_sat", num(p.v_ce_sat)},
            {"r_drive_high", num(p.r_drive_high)},
            {"r_sink_offset", num(p.r_sink_offset)},
            {"r_sink", num(p.r_sink)},
            {"reverse_blocking", [this](auto& v) { cfg_.params.reverse_blocking = boolean(v); }},
            {"tau_rc", num(p.tau_rc)},
            {"nominal_transition", num(p.nominal_transition)},
            {"transition_extension", num(p.transition_extension)},
            {"sample_point", num(t.sample_point)},
            {"decode_hold", num(t.decode_hold)},
            {"dominant_threshold", num(t.dominant_threshold)},
            {"recessive_threshold", num(t.recessive_threshold)},
            {"ack_delay", num(t.ack_delay)},
        };
    }

    void ecu(const IniSection& s) {
        EcuConfig e;
        e.name = s.name.substr(4);
        ctx_ = {s.line, s.name};
        if (e.name.empty() || e.name.find_first_of(" \t,.") != std::string::npos) fail("invalid ECU name");
        const IniEntry* role = s.find("role");
        if (!role) fail("missing key 'role'");
        ctx_ = {role->line, s.name + ".role"};
        if (role->value == "vids") e.role = EcuRole::VidsHost;
        else if (role->value == "sender") e.role = EcuRole::Sender;
        else if (role->value == "logger") e.role = EcuRole::Logger;
        else fail("expected vids, sender or logger");
        unsigned id = 0;
        std::vector<std::uint8_t> data;
        bool rtr = false;
        const Keys keys{
            {"role", [](auto&) {}},
            {"period", [&](auto& v) { e.period = number(v); }},
            {"offset", [&](auto& v) { e.offset = number(v); }},
            {"id", [&](auto& v) { id = hex_or_dec(v); }},
            {"data", [&](auto& v) { data = bytes(v); }},
            {"rtr", [&](auto& v) { rtr = boolean(v); }},
            {"source_resistance", [&](auto& v) { e.source_resistance = number(v); }},
            {"source_current_limit", [&](auto& v) { e.source_current_limit = number(v); }},
        };
        section(s, keys);
        if (e.role == EcuRole::Sender) {
            ctx_ = {s.line, s.name};
            try {
                e.frame = make_frame(static_cast<std::uint16_t>(std::min(id, 0xFFFFu)), data, rtr);
                if (id > kMaxStandardId) throw LinkError(LinkError::Code::InvalidFrame, "identifier exceeds 11 bits");
            } catch (const LinkError& err) {
                fail(err.what());
            }
        } else {
            for (const char* k : {"period", "offset", "id", "data", "rtr"})
                if (const IniEntry* x = s.find(k)) {
                    ctx_ = {x->line, s.name + "." + k};
                    fail("only senders carry traffic");
                }
        }
        cfg_.ecus.push_back(std::move(e));
    }

    void attack_section(const IniSection& s) {
        ctx_ = {s.line, "attack"};
        const IniEntry* type = s.find("type");
        if (!type) fail("missing key 'type'");
        ctx_ = {type->line, "attack.type"};
        AttackSpec spec;
        double voltage = kMaxPinLevel;
        attack::Pulse pulse;
        Keys keys{
            {"type", [](auto&) {}},
            {"node", [&](auto& v) { spec.attacker_node = v; }},
            {"t_start", [&](auto& v) { spec.t_start = number(v); }},
            {"t_end", [&](auto& v) { spec.t_end = number(v); }},
        };
        const std::string& t = type->value;
        if (t == "dos" || t == "fra") {
            keys["voltage"] = [&](auto& v) { voltage = number(v); };
        } else if (t == "pulse") {
            keys["line"] = [&](auto& v) {
                if (v == "canh") pulse.line = Line::CanH;
                else if (v == "canl") pulse.line = Line::CanL;
                else fail("expected canh or canl");
            };
            keys["period"] = [&](auto& v) { pulse.period = number(v); };
            keys["duty"] = [&](auto& v) { pulse.duty = number(v); };
            keys["v_high"] = [&](auto& v) { pulse.v_high = number(v); };
            keys["v_low"] = [&](auto& v) { pulse.v_low = number(v); };
            keys["phase_offset"] = [&](auto& v) { pulse.phase_offset = number(v); };
        } else if (t != "passive_overcurrent" && t != "active_overcurrent") {
            fail("expected passive_overcurrent, active_overcurrent, dos, fra or pulse");
        }
        section(s, keys);
        if (t == "passive_overcurrent") spec.attack = attack::PassiveOvercurrent{};
        else if (t == "active_overcurrent") spec.attack = attack::ActiveOvercurrent{};
        else if (t == "dos") spec.attack = attack::DoS{voltage};
        else if (t == "fra") spec.attack = attack::ForcedRetransmission{voltage};
        else spec.attack = pulse;
        cfg_.attack = spec;
    }

    Keys irs_keys() {
        auto& i = cfg_.irs;
        auto num = [this](double& field) { return [this, &field](auto& v) { field = number(v); }; };
        return {
            {"device",
             [this](auto& v) {
                 if (v == "none") cfg_.irs.kind = DeviceKind::None;
                 else if (v == "fuse") cfg_.irs.kind = DeviceKind::Fuse;
                 else if (v == "breaker") cfg_.irs.kind = DeviceKind::Breaker;
                 else if (v == "resettable_fuse") cfg_.irs.kind = DeviceKind::ResettableFuse;
                 else if (v == "thermostat") cfg_.irs.kind = DeviceKind::Thermostat;
                 else fail("expected none, fuse, breaker, resettable_fuse or thermostat");
             }},
            {"rating", num(i.rating)},
            {"opening_time", num(i.opening_time)},
            {"leakage_current", num(i.leakage_current)},
            {"r_coil", num(i.thermostat.r_coil)},
            {"t_ambient",
             [this](auto& v) { cfg_.irs.thermostat.t_ambient = cfg_.irs.thermostat.temp = number(v); }},
            {"t_limit", num(i.thermostat.t_limit)},
            {"hysteresis", num(i.thermostat.hysteresis)},
            {"thermal_gain", num(i.thermostat.thermal_gain)},
            {"tau_thermal", num(i.thermostat.tau_thermal)},
            {"coil_drive", num(i.coil_drive)},
            {"coil_t_start", num(i.coil_t_start)},
            {"coil_t_end", num(i.coil_t_end)},
        };
    }

    Keys damage_keys() {
        return {
            {"i_max", [this](auto& v) { cfg_.damage.i_max = number(v); }},
            {"damage_time", [this](auto& v) { cfg_.damage.damage_time = number(v); }},
        };
    }

    Keys trace_keys() {
        return {
            {"sample_period", [this](auto& v) { cfg_.trace.sample_period = number(v); }},
            {"frame_errors", [this](auto& v) { cfg_.trace.frame_errors = boolean(v); }},
        };
    }

    void sweep_section(const IniSection& s) {
        SweepSpec w;
        section(s, {
                       {"path", [&](auto& v) { w.path = v; }},
                       {"from", [&](auto& v) { w.from = number(v); }},
                       {"to", [&](auto& v) { w.to = number(v); }},
                       {"step", [&](auto& v) { w.step = number(v); }},
                   });
        auto at = [&](const char* key) {
            const IniEntry* e = s.find(key);
            ctx_ = {e ? e->line : s.line, std::string("sweep.") + key};
        };
        at("path");
        if (w.path.empty()) fail("missing sweep path");
        if (w.path.rfind("sweep.", 0) == 0) fail("cannot sweep the sweep section");
        at("step");
        if (!(w.step > 0)) fail("must be > 0");
        at("to");
        if (!(w.to >= w.from)) fail("must be >= sweep.from");
        if (w.values().size() > 100000) fail("grid has more than 100000 points");
        cfg_.sweep = w;
    }

    Keys expect_keys() {
        return {
            {"indicator",
             [this](auto& v) {
                 if (v.find_first_not_of("01") != std::string::npos) fail("expected a string of 0 and 1");
                 cfg_.expect.indicator = v;
             }},
            {"attack_success", [this](auto& v) { cfg_.expect.attack_success = boolean(v); }},
            {"damaged", [this](auto& v) { cfg_.expect.damaged = boolean(v); }},
            {"min_retransmissions", [this](auto& v) { cfg_.expect.min_retransmissions = integer(v); }},
            {"frames_received", [this](auto& v) { cfg_.expect.frames_received = integer(v); }},
        };
    }

    const IniDocument& doc_;
    ScenarioConfig cfg_;
    Ctx ctx_{0, ""};
};

}  // namespace detail

/// Builds a validated scenario from a parsed document on top of `base`
/// parameters. Unknown sections and keys are rejected; the attacker node
/// defaults to the VIDS host.
inline ScenarioConfig config_from_ini(const IniDocument& doc, const ParameterSet& base = {}) {
    IniDocument d = doc;
    if (IniSection* a = d.find("attack"); a && !a->find("node"))
        for (const auto& s : d.sections)
            if (s.name.rfind("ecu.", 0) == 0)
                if (const IniEntry* r = s.find("role"); r && r->value == "vids") {
                    a->entries.push_back({"node", s.name.substr(4), 0});
                    break;
                }
    return detail::ConfigBuilder(d, base).build();
}

inline ScenarioConfig parse_config(std::string_view text, const ParameterSet& base = {}) {
    return config_from_ini(parse_ini(text), base);
}

/// Scenario with the sweep parameter set to `value`; the [sweep] section is dropped.
inline ScenarioConfig config_at(const IniDocument& doc, const std::string& path, double value,
                                const ParameterSet& base = {}) {
    IniDocument d = doc;
    std::erase_if(d.sections, [](const IniSection& s) { return s.name == "sweep"; });
    const auto dot = path.rfind('.');
    const IniSection* s = dot == std::string::npos ? nullptr : d.find(path.substr(0, dot));
    if (!s) throw ConfigError(doc.line_of("sweep.path"), "sweep.path", "no section for '" + path + "'");
    d.set(path, format_number(value));
    return config_from_ini(d, base);
}

inline std::string serialize_config(const ScenarioConfig& c, const ParameterSet& base = {}) {
    std::ostringstream out;
    auto kv = [&](const std::string& k, const std::string& v) { out << k << " = " << v << '\n'; };
    auto num = [&](const std::string& k, double v) { kv(k, format_number(v)); };
    auto flag = [&](const std::string& k, bool v) { kv(k, v ? "true" : "false"); };

    out << "[bus]\n";
    num("duration", c.duration);
    num("bus_speed", c.timing.bus_speed);
    num("termination_a", c.termination_a);
    num("termination_b", c.termination_b);

    std::ostringstream params;
    auto pnum = [&](const char* k, double v, double b) {
        if (v != b) params << k << " = " << format_number(v) << '\n';
    };
    const auto& p = c.params;
    const auto& bp = base.transceiver;
    const auto& t = c.timing;
    const auto& bt = base.timing;
    pnum("v_dd", p.v_dd, bp.v_dd);
    pnum("v_ref", p.v_ref, bp.v_ref);
    pnum("diode_drop", p.diode_drop, bp.diode_drop);
    pnum("v_ce_sat", p.v_ce_sat, bp.v_ce_sat);
    pnum("r_drive_high", p.r_drive_high, bp.r_drive_high);
    pnum("r_sink_offset", p.r_sink_offset, bp.r_sink_offset);
    pnum("r_sink", p.r_sink, bp.r_sink);
    if (p.reverse_blocking != bp.reverse_blocking)
        params << "reverse_blocking = " << (p.reverse_blocking ? "true" : "false") << '\n';
    pnum("tau_rc", p.tau_rc, bp.tau_rc);
    pnum("nominal_transition", p.nominal_transition, bp.nominal_transition);
    pnum("transition_extension", p.transition_extension, bp.transition_extension);
    pnum("sample_point", t.sample_point, bt.sample_point);
    pnum("decode_hold", t.decode_hold, bt.decode_hold);
    pnum("dominant_threshold", t.dominant_threshold, bt.dominant_threshold);
    pnum("recessive_threshold", t.recessive_threshold, bt.recessive_threshold);
    pnum("ack_delay", t.ack_delay, bt.ack_delay);
    if (!params.str().empty()) out << "\n[params]\n" << params.str();

    for (const auto& e : c.ecus) {
        out << "\n[ecu." << e.name << "]\n";
        kv("role", to_string(e.role));
        if (e.role == EcuRole::Sender) {
            num("period", e.period);
            num("offset", e.offset);
            char id[16];
            std::snprintf(id, sizeof id, "0x%03x", static_cast<unsigned>(e.frame.id));
            kv("id", id);
            std::string data;
            for (auto b : e.frame.data) {
                char h[4];
                std::snprintf(h, sizeof h, "%02x", static_cast<unsigned>(b));
                data += (data.empty() ? "" : " ") + std::string(h);
            }
            kv("data", "\"" + data + "\"");
            if (e.frame.rtr) flag("rtr", true);
        }
        if (e.source_resistance != 0.0) num("source_resistance", e.source_resistance);
        if (!std::isinf(e.source_current_limit)) num("source_current_limit", e.source_current_limit);
    }

    if (c.attack) {
        const auto& a = *c.attack;
        out << "\n[attack]\n";
        kv("type", attack_name(a.attack));
        kv("node", a.attacker_node);
        num("t_start", a.t_start);
        num("t_end", a.t_end);
        if (const auto* d = std::get_if<attack::DoS>(&a.attack)) num("voltage", d->v_attack_l);
        if (const auto* f = std::get_if<attack::ForcedRetransmission>(&a.attack)) num("voltage", f->v_attack_h);
        if (const auto* pl = std::get_if<attack::Pulse>(&a.attack)) {
            kv("line", pl->line == Line::CanH ? "canh" : "canl");
            num("period", pl->period);
            num("duty", pl->duty);
            num("v_high", pl->v_high);
            num("v_low", pl->v_low);
            num("phase_offset", pl->phase_offset);
        }
    }

    const IrsConfig& i = c.irs;
    out << "\n[irs]\n";
    kv("device", device_name(i.make()));
    num("rating", i.rating);
    num("opening_time", i.opening_time);
    num("leakage_current", i.leakage_current);
    if (i.kind == DeviceKind::Thermostat || i.coil_drive != 0.0) {
        num("r_coil", i.thermostat.r_coil);
        num("t_ambient", i.thermostat.t_ambient);
        num("t_limit", i.thermostat.t_limit);
        num("hysteresis", i.thermostat.hysteresis);
        num("thermal_gain", i.thermostat.thermal_gain);
        num("tau_thermal", i.thermostat.tau_thermal);
        num("coil_drive", i.coil_drive);
        num("coil_t_start", i.coil_t_start);
        num("coil_t_end", i.coil_t_end);
    }

    out << "\n[damage]\n";
    num("i_max", c.damage.i_max);
    num("damage_time", c.damage.damage_time);

    out << "\n[trace]\n";
    num("sample_period", c.trace.sample_period);
    flag("frame_errors", c.trace.frame_errors);

    if (c.sweep) {
        out << "\n[sweep]\n";
        kv("path", c.sweep->path);
        num("from", c.sweep->from);
        num("to", c.sweep->to);
        num("step", c.sweep->step);
    }

    const Expectations& x = c.expect;
    if (!x.empty()) {
        out << "\n[expect]\n";
        if (x.indicator) kv("indicator", *x.indicator);
        if (x.attack_success) flag("attack_success", *x.attack_success);
        if (x.damaged) flag("damaged", *x.damaged);
        if (x.min_retransmissions) kv("min_retransmissions", std::to_string(*x.min_retransmissions));
        if (x.frames_received) kv("frames_received", std::to_string(*x.frames_received));
    }
    return out.str();
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace canvolt
