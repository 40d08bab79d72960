#include <gtest/gtest.h>

#include "canvolt/attacks.hpp"

using namespace canvolt;

namespace {

const BusTopology kBus{};

}  // namespace

TEST(Attacks, PinComboTableHasTenRows) {
    const auto in = PinMode::input(), hi = PinMode::output_high(5.0), lo = PinMode::output_low();
    const auto pu = PinMode::pulse(1e-6, 0.5);
    struct Row {
        PinMode h, l;
        AttackClass c;
    };
    const Row rows[] = {
        {in, in, AttackClass::NotAnAttack},
        {in, hi, AttackClass::DoSClass},
        {in, lo, AttackClass::PassiveOvercurrentClass},
        {hi, in, AttackClass::ForcedRetransmissionClass},
        {hi, lo, AttackClass::ActiveOvercurrentClass},
        {lo, in, AttackClass::DoSOrPassiveOvercurrent},
        {lo, lo, AttackClass::DoSOrPassiveOvercurrent},
        {lo, hi, AttackClass::DoSOrActiveOvercurrent},
        {pu, in, AttackClass::PulseClass},
        {in, pu, AttackClass::PulseClass},
    };
    for (const auto& r : rows) EXPECT_EQ(classify_pin_combo(r.h, r.l), r.c) << to_string(r.c);
    EXPECT_EQ(classify_pin_combo(hi, hi), AttackClass::Unclassified);
    EXPECT_EQ(classify_pin_combo(pu, hi), AttackClass::Unclassified);
}

TEST(Attacks, OverrideClassMatchesSpecClass) {
    const AttackVariant all[] = {attack::PassiveOvercurrent{}, attack::ActiveOvercurrent{}, attack::DoS{3.0},
                                 attack::ForcedRetransmission{4.5}, attack::Pulse{Line::CanH, 1e-6, 0.5},
                                 attack::Pulse{Line::CanL, 0.7e-6, 0.3}};
    for (const auto& a : all) {
        const AttackSpec s{a, 1.0, 2.0, "vids"};
        for (double t : {1.0, 1.3, 1.999}) {
            const auto p = pin_override(s, t);
            EXPECT_EQ(classify_pin_combo(p.p_h, p.p_l), attack_class(a)) << attack_name(a);
        }
        const auto before = pin_override(s, 0.5), after = pin_override(s, 2.0);
        EXPECT_EQ(classify_pin_combo(before.p_h, before.p_l), AttackClass::NotAnAttack);
        EXPECT_EQ(classify_pin_combo(after.p_h, after.p_l), AttackClass::NotAnAttack);
    }
}

TEST(Attacks, DosOverrideDrivesCanl) {
    const AttackSpec s{attack::DoS{5.0}, 0.0, 1.0, "vids"};
    const auto p = pin_override(s, 0.5);
    EXPECT_TRUE(p.p_h.is_input());
    EXPECT_EQ(p.p_l, PinMode::output_high(5.0));
}

TEST(Attacks, PulsePhaseResolution) {
    const AttackSpec s{attack::Pulse{Line::CanL, 1e-6, 0.5}, 2.0, 3.0, "vids"};
    EXPECT_EQ(instantaneous_pins(s, 2.0 + 0.25e-6).p_l, PinMode::output_high(5.0));
    EXPECT_EQ(instantaneous_pins(s, 2.0 + 0.75e-6).p_l, PinMode::output_low());
    EXPECT_TRUE(instantaneous_pins(s, 2.0 + 0.25e-6).p_h.is_input());
}

TEST(Attacks, SpecValidation) {
    EXPECT_THROW((AttackSpec{attack::DoS{}, 2.0, 1.0, "x"}.validate()), AttackError);
    EXPECT_THROW((AttackSpec{attack::Pulse{Line::CanL, 200e-6, 0.5}, 0.0, 1.0, "x"}.validate(112e-6)), AttackError);
    EXPECT_THROW((AttackSpec{attack::DoS{6.0}, 0.0, 1.0, "x"}.validate()), ElectricalError);
    EXPECT_NO_THROW((AttackSpec{attack::Pulse{Line::CanL, 0.7e-6, 0.5}, 0.0, 1.0, "x"}.validate(112e-6)));
}

TEST(Attacks, OvercurrentCurrents) {
    const auto passive = overcurrent_current(OvercurrentVariant::Passive, {}, kBus);
    const auto active = overcurrent_current(OvercurrentVariant::Active, {}, kBus);
    EXPECT_NEAR(passive.amps * 1e3, 58.3, 0.1);
    EXPECT_NEAR(active.amps * 1e3, 83.3, 0.1);
    EXPECT_TRUE(passive.exceeds(0.040));
    EXPECT_TRUE(active.exceeds(0.040));
    NodeAttachment capped;
    capped.source_current_limit = 0.052;
    const auto limited = overcurrent_current(OvercurrentVariant::Active, {}, kBus, capped);
    EXPECT_NEAR(limited.amps * 1e3, 52.0, 1e-6);
    EXPECT_TRUE(limited.exceeds(0.040));
}

TEST(Attacks, DosThreshold) {
    const BitTiming t;
    EXPECT_EQ(min_dos_voltage({}, kBus, t), 2.2);
    EXPECT_FALSE(dos_succeeds(2.1, {}, kBus, t));
    EXPECT_FALSE(dos_succeeds(0.1, {}, kBus, t));
    EXPECT_TRUE(dos_succeeds(5.0, {}, kBus, t));
    EXPECT_NEAR(dos_differential(5.0, {}, kBus), 0.0, 1e-12);
}

TEST(Attacks, FraThreshold) {
    const BitTiming t;
    EXPECT_EQ(min_fra_voltage({}, kBus, t), 4.5);
    EXPECT_FALSE(fra_succeeds(4.0, {}, t));
    EXPECT_TRUE(fra_succeeds(5.0, {}, t));
    EXPECT_FALSE(fra_succeeds(2.5, {}, t));
    // At 4.5 V the comparator releases about 0.1 ns after the sample point.
    EXPECT_NEAR(fra_release_time(4.5, {}, t), 432e-9 + 1.16e-6 * std::log(6.0) / std::log(7.0), 1e-15);
    EXPECT_GT(fra_release_time(4.5, {}, t), 1.5e-6);
}

TEST(Attacks, PulseThresholds) {
    const BitTiming t;
    EXPECT_EQ(min_pulse_period(Line::CanL, 0.5, {}, t), 680'000);
    EXPECT_EQ(min_pulse_period(Line::CanH, 0.5, {}, t), 570'000);
    BitTiming slow = t;
    slow.decode_hold = 350e-9;
    EXPECT_NEAR(pulse_period_bound(Line::CanL, 0.5, {}, slow), 700e-9, 1e-18);
    EXPECT_EQ(min_pulse_period(Line::CanL, 0.5, {}, slow), 700'000);
}
