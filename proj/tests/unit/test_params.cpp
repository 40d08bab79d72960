#include <gtest/gtest.h>

#include "canvolt/attacks.hpp"
#include "canvolt/params.hpp"

using namespace canvolt;

TEST(Params, CalibrateReproducesDefaults) {
    const ParameterSet s = calibrate(CalibrationTargets::defaults());
    const TransceiverParams d;
    const BitTiming t;
    EXPECT_DOUBLE_EQ(s.transceiver.r_drive_high, 26.7);
    EXPECT_DOUBLE_EQ(s.transceiver.r_sink, 12.8);
    EXPECT_NEAR(s.transceiver.tau_rc, 0.596e-6, 0.0005e-6);
    EXPECT_NEAR(s.transceiver.tau_rc, d.tau_rc, 1e-18);
    EXPECT_NEAR(s.transceiver.transition_extension, d.transition_extension, 1e-18);
    EXPECT_NEAR(s.timing.decode_hold, t.decode_hold, 1e-18);
    EXPECT_NEAR(s.timing.ack_delay, t.ack_delay, 1e-18);
}

TEST(Params, CalibratedSetPassesTargetedChecks) {
    const ParameterSet s = calibrate(CalibrationTargets::defaults());
    const BusTopology topo;
    EXPECT_DOUBLE_EQ(*min_dos_voltage(s.transceiver, topo, s.timing), 2.2);
    EXPECT_DOUBLE_EQ(*min_fra_voltage(s.transceiver, topo, s.timing), 4.5);
    EXPECT_EQ(*min_pulse_period(Line::CanL, 0.5, s.transceiver, s.timing), 680'000);
    EXPECT_EQ(*min_pulse_period(Line::CanH, 0.5, s.transceiver, s.timing), 570'000);
    EXPECT_NEAR(measure_tau_bit(s.timing.bit_time(), 5.0, s.transceiver.tau_rc, s.transceiver), 3.16e-6, 1e-12);
    EXPECT_NEAR((5.0 - s.transceiver.r_sink_offset) / s.transceiver.r_sink, 0.281, 0.0005);
}

TEST(Params, SingleTargetsFromSpecExamples) {
    EXPECT_DOUBLE_EQ(calibrate(parse_targets("dos_threshold=2.2")).transceiver.r_drive_high, 26.7);
    EXPECT_NEAR(calibrate(parse_targets("tau_bit_5v=3.16e-6")).transceiver.tau_rc, 1.16e-6 / std::log(7.0), 1e-15);
    EXPECT_DOUBLE_EQ(calibrate(parse_targets("sink_current")).transceiver.r_sink, 12.8);
}

TEST(Params, ShiftedTargetMovesThreshold) {
    const ParameterSet s = calibrate(parse_targets("dos_threshold=1.8"));
    EXPECT_DOUBLE_EQ(*min_dos_voltage(s.transceiver, BusTopology{}, s.timing), 1.8);
    const ParameterSet f = calibrate(parse_targets("fra_threshold=4.0"));
    EXPECT_DOUBLE_EQ(*min_fra_voltage(f.transceiver, BusTopology{}, f.timing), 4.0);
}

TEST(Params, InfeasibleTargets) {
    EXPECT_THROW(calibrate(parse_targets("dos_threshold=3.0")), InfeasibleTarget);
    EXPECT_THROW(calibrate(parse_targets("pulse_canl=680e-9,pulse_canh=900e-9")), InfeasibleTarget);
    EXPECT_THROW(calibrate(parse_targets("fra_threshold=3.0")), InfeasibleTarget);
    EXPECT_THROW(calibrate(parse_targets("tau_bit_5v=1e-6")), InfeasibleTarget);
    EXPECT_THROW(parse_targets("speed=3"), InfeasibleTarget);
    EXPECT_THROW(parse_targets("dos_threshold=abc"), InfeasibleTarget);
}

TEST(Params, JsonRoundTripAndShippedFile) {
    const ParameterSet s = calibrate(CalibrationTargets::defaults());
    const ParameterSet back = parameters_from_json(to_json(s));
    EXPECT_EQ(to_json(back), to_json(s));
    const ParameterSet shipped = load_parameters(CANVOLT_SOURCE_DIR "/params/default.json");
    EXPECT_EQ(to_json(shipped).dump(), to_json(s).dump());
}

TEST(Params, JsonRejectsUnknownFields) {
    nlohmann::json j = to_json(ParameterSet{});
    j["transceiver"]["r_foo"] = 1.0;
    try {
        parameters_from_json(j);
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.path(), "transceiver.r_foo");
    }
    EXPECT_THROW(parameters_from_json(nlohmann::json{{"timing", {{"sample_point", 1.5}}}}), ConfigError);
}
