#include <gtest/gtest.h>

#include <filesystem>

#include "canvolt/config.hpp"

using namespace canvolt;

namespace {

const char* kBaseline = R"(# three ECUs, 500 kbps, 1 s traffic
[bus]
duration = 60
bus_speed = 500000

[ecu.A]
role = vids

[ecu.B]
role = logger

[ecu.C]
role = sender
period = 1.0
id = 0x001
data = "01"
)";

ConfigError config_error(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e;
    }
    ADD_FAILURE() << "no ConfigError for:\n" << text;
    return ConfigError(0, "", "");
}

}  // namespace

TEST(Config, BaselineIsValid) {
    const ScenarioConfig c = parse_config(kBaseline);
    ASSERT_EQ(c.ecus.size(), 3u);
    EXPECT_EQ(c.vids_host().name, "A");
    EXPECT_EQ(c.ecus[2].frame, make_frame(0x001, {0x01}));
    EXPECT_DOUBLE_EQ(c.timing.bus_speed, 500000.0);
    EXPECT_FALSE(c.attack.has_value());
}

TEST(Config, DutyOutOfRangeNamesField) {
    const auto e = config_error(std::string(kBaseline) + "\n[attack]\ntype = pulse\nt_start = 10\nt_end = 30\nduty = 1.5\n");
    EXPECT_EQ(e.path(), "attack.duty");
    EXPECT_EQ(e.line(), 22);
}

TEST(Config, TwoVidsHostsRejected) {
    const auto e = config_error(std::string(kBaseline) + "\n[ecu.D]\nrole = vids\n");
    EXPECT_EQ(e.path(), "ecu");
}

TEST(Config, UnknownKeysAndSectionsRejected) {
    auto e = config_error(std::string(kBaseline) + "colour = red\n");
    EXPECT_EQ(e.path(), "ecu.C.colour");
    EXPECT_EQ(e.line(), 17);
    e = config_error(std::string(kBaseline) + "[weather]\n");
    EXPECT_EQ(e.path(), "weather");
    e = config_error(std::string(kBaseline) + "[attack]\ntype = dos\nt_start = 1\nt_end = 2\nduty = 0.5\n");
    EXPECT_EQ(e.path(), "attack.duty");
}

TEST(Config, SyntaxErrorsCarryLine) {
    auto e = config_error("[bus]\nduration 60\n");
    EXPECT_EQ(e.line(), 2);
    e = config_error("[bus]\nduration = sixty\n");
    EXPECT_EQ(e.path(), "bus.duration");
    e = config_error("[bus]\nduration = 1\nduration = 2\n");
    EXPECT_EQ(e.line(), 3);
    e = config_error("duration = 1\n");
    EXPECT_EQ(e.line(), 1);
    e = config_error(std::string(kBaseline) + "[ecu.E]\nrole = sender\nid = 0x900\n");
    EXPECT_EQ(e.path(), "ecu.E");
}

TEST(Config, ValidationPathsMapToLines) {
    const auto e = config_error(std::string(kBaseline) + "offset = -1\n");
    EXPECT_EQ(e.path(), "ecu.C.offset");
    EXPECT_EQ(e.line(), 17);
}

TEST(Config, AttackNodeDefaultsToVidsHost) {
    const auto c = parse_config(std::string(kBaseline) + "[attack]\ntype = fra\nt_start = 10\nt_end = 30\nvoltage = 4.5\n");
    ASSERT_TRUE(c.attack);
    EXPECT_EQ(c.attack->attacker_node, "A");
    EXPECT_DOUBLE_EQ(std::get<attack::ForcedRetransmission>(c.attack->attack).v_attack_h, 4.5);
    const auto e = config_error(std::string(kBaseline) + "[attack]\ntype = dos\nnode = C\nt_start = 1\nt_end = 2\n");
    EXPECT_EQ(e.path(), "attack.node");
}

TEST(Config, RoundTrip) {
    const std::string text = std::string(kBaseline) + R"(
[params]
decode_hold = 350e-9
[attack]
type = pulse
line = canh
t_start = 10
t_end = 30
period = 570e-9
duty = 0.5
phase_offset = 1.25e-7
[irs]
device = thermostat
coil_drive = 1
coil_t_start = 2
[damage]
i_max = 0.02
[trace]
sample_period = 0.5
[sweep]
path = attack.period
from = 500e-9
to = 700e-9
step = 10e-9
[expect]
indicator = 1111
damaged = false
)";
    const ScenarioConfig c = parse_config(text);
    const std::string s1 = serialize_config(c);
    const ScenarioConfig c2 = parse_config(s1);
    EXPECT_EQ(serialize_config(c2), s1);
    EXPECT_DOUBLE_EQ(c2.timing.decode_hold, 350e-9);
    EXPECT_EQ(c2.irs.kind, DeviceKind::Thermostat);
    EXPECT_TRUE(std::isinf(c2.irs.coil_t_end));
    EXPECT_EQ(c2.expect.indicator, "1111");
    EXPECT_EQ(std::get<attack::Pulse>(c2.attack->attack).line, Line::CanH);
    EXPECT_EQ(c2.sweep->values().size(), 21u);
}

TEST(Config, SweepAppliesValue) {
    const auto doc = parse_ini(std::string(kBaseline) +
                               "[attack]\ntype = dos\nt_start = 1\nt_end = 2\nvoltage = 5\n[sweep]\npath = attack.voltage\n"
                               "from = 0.1\nto = 5\nstep = 0.1\n");
    const ScenarioConfig base = config_from_ini(doc);
    ASSERT_TRUE(base.sweep);
    const auto values = base.sweep->values();
    ASSERT_EQ(values.size(), 50u);
    EXPECT_DOUBLE_EQ(values[21], 2.2);
    const ScenarioConfig at = config_at(doc, base.sweep->path, values[21]);
    EXPECT_DOUBLE_EQ(std::get<attack::DoS>(at.attack->attack).v_attack_l, 2.2);
    EXPECT_FALSE(at.sweep);
    EXPECT_THROW(config_at(doc, "nothing.here", 1.0), ConfigError);
}

TEST(Config, CookbookScenariosValidate) {
    int n = 0;
    for (const auto& entry : std::filesystem::directory_iterator(CANVOLT_SOURCE_DIR "/scenarios")) {
        if (entry.path().extension() != ".ini") continue;
        ++n;
        EXPECT_NO_THROW(parse_config(read_text_file(entry.path().string()))) << entry.path();
    }
    EXPECT_GE(n, 8);
}
