#include <gtest/gtest.h>

#include "canvolt/engine.hpp"

using namespace canvolt;

namespace {

ScenarioConfig baseline(double duration = 60.0) {
    ScenarioConfig c;
    c.duration = duration;
    c.ecus = {{"A", EcuRole::VidsHost, 1.0, 0.0, {}}, {"B", EcuRole::Logger, 1.0, 0.0, {}},
              {"C", EcuRole::Sender, 1.0, 0.0, make_frame(0x001, {0x01})}};
    return c;
}

ScenarioConfig with_attack(AttackVariant a, double t0 = 10.0, double t1 = 30.0, double duration = 60.0) {
    auto c = baseline(duration);
    c.attack = AttackSpec{a, t0, t1, "A"};
    return c;
}

std::string indicator_string(const std::vector<int>& v) {
    std::string s;
    for (int x : v) s += x ? '1' : '0';
    return s;
}

std::string window_indicator(int n, int z0, int z1) {
    std::string s(static_cast<std::size_t>(n), '1');
    for (int k = z0; k < z1; ++k) s[static_cast<std::size_t>(k)] = '0';
    return s;
}

int count(const Trace& t, TraceKind k) {
    int n = 0;
    for (const auto& r : t.records) n += r.kind == k;
    return n;
}

}  // namespace

TEST(Engine, DamageStep) {
    EcuDamage d;
    for (int k = 0; k < 9; ++k) d = damage_step(d, 0.0583, 0.1e-6);
    EXPECT_FALSE(d.damaged);
    d = damage_step(d, 0.0583, 0.1e-6);
    EXPECT_TRUE(d.damaged);
    EcuDamage safe;
    for (int k = 0; k < 1000; ++k) safe = damage_step(safe, 0.039, 1e-3);
    EXPECT_FALSE(safe.damaged);
    EcuDamage mpc{0.020};
    for (int k = 0; k < 1000; ++k) mpc = damage_step(mpc, 0.020, 1e-3);
    EXPECT_FALSE(mpc.damaged);
}

TEST(Engine, BaselineDeliversEveryMessage) {
    const auto r = run_scenario(baseline());
    EXPECT_EQ(r.summary.frames_sent, 60);
    EXPECT_EQ(r.summary.frames_received, 60);
    EXPECT_EQ(indicator_string(r.summary.indicator), std::string(60, '1'));
    EXPECT_EQ(count(r.trace, TraceKind::FrameReceived), 60);
    EXPECT_EQ(r.summary.error_frames, 0);
    EXPECT_EQ(message_indicator(r.trace, "C", "B", 60), r.summary.indicator);
}

TEST(Engine, DosBlocksWindow) {
    const auto r = run_scenario(with_attack(attack::DoS{5.0}));
    EXPECT_EQ(indicator_string(r.summary.indicator), window_indicator(60, 10, 30));
    EXPECT_TRUE(r.summary.attack_success);
    EXPECT_TRUE(r.summary.damaged);
}

TEST(Engine, DosWithFuseIsMitigated) {
    auto c = with_attack(attack::DoS{5.0});
    c.irs.kind = DeviceKind::Fuse;
    const auto r = run_scenario(c);
    EXPECT_EQ(indicator_string(r.summary.indicator), std::string(60, '1'));
    EXPECT_FALSE(r.summary.damaged);
    EXPECT_FALSE(r.summary.attack_success);
    ASSERT_EQ(r.summary.device_events.size(), 1u);
    EXPECT_EQ(r.summary.device_events[0].line, Line::CanL);
    EXPECT_NEAR(r.summary.device_events[0].t, 10.0 + 1e-6, 1e-12);
}

TEST(Engine, FraForcesRetransmissions) {
    const auto r = run_scenario(with_attack(attack::ForcedRetransmission{5.0}));
    EXPECT_EQ(indicator_string(r.summary.indicator), std::string(60, '1'));
    EXPECT_TRUE(r.summary.attack_success);
    EXPECT_GT(r.summary.retransmissions, 20);
}

TEST(Engine, FraRetransmissionSpacing) {
    const auto r = run_scenario(with_attack(attack::ForcedRetransmission{5.0}, 1.0, 2.0, 3.0));
    std::vector<Picos> starts;
    for (const auto& rec : r.trace.records) {
        if (rec.b != 1) continue;
        if (rec.kind == TraceKind::FrameSent || rec.kind == TraceKind::Retransmission) starts.push_back(rec.t);
        if (rec.kind == TraceKind::ErrorFrame) {
            EXPECT_EQ(static_cast<DecodeError>(rec.a), DecodeError::Form);
        }
    }
    ASSERT_GT(starts.size(), 3u);
    for (std::size_t k = 1; k < 4; ++k) EXPECT_EQ(starts[k] - starts[k - 1], to_picos(132e-6));
    EXPECT_EQ(retransmission_spacing_bits(48) * 2, 132);
}

TEST(Engine, FraBelowThresholdFails) {
    const auto r = run_scenario(with_attack(attack::ForcedRetransmission{4.0}, 1.0, 2.0, 3.0));
    EXPECT_FALSE(r.summary.attack_success);
    EXPECT_EQ(r.summary.retransmissions, 0);
}

TEST(Engine, EveryWindowFrameRetransmittedUnderFra) {
    const auto r = run_scenario(with_attack(attack::ForcedRetransmission{5.0}));
    std::vector<int> per_instance(60, 0);
    for (const auto& rec : r.trace.records)
        if (rec.kind == TraceKind::Retransmission) ++per_instance[static_cast<std::size_t>(rec.b)];
    for (int k = 10; k < 30; ++k) EXPECT_GE(per_instance[static_cast<std::size_t>(k)], 1) << k;
    for (int k = 31; k < 60; ++k) EXPECT_EQ(per_instance[static_cast<std::size_t>(k)], 0) << k;
}

TEST(Engine, PulseThresholdsMatchPredictor) {
    for (Line line : {Line::CanL, Line::CanH}) {
        const Picos p_min = *min_pulse_period(line, 0.5, TransceiverParams{}, BitTiming{});
        for (Picos p : {p_min - 10'000, p_min}) {
            const auto r = run_scenario(with_attack(attack::Pulse{line, to_seconds(p), 0.5}, 1.0, 2.0, 3.0));
            EXPECT_EQ(r.summary.attack_success, p == p_min) << static_cast<int>(line) << " " << p;
        }
    }
}

TEST(Engine, FuseMitigatesVoltageAttacks) {
    const AttackVariant attacks[] = {attack::DoS{5.0}, attack::ForcedRetransmission{5.0},
                                     attack::Pulse{Line::CanL, 700e-9, 0.5}, attack::Pulse{Line::CanH, 700e-9, 0.5}};
    for (const auto& a : attacks) {
        auto c = with_attack(a);
        c.irs.kind = DeviceKind::Fuse;
        const auto r = run_scenario(c);
        EXPECT_EQ(indicator_string(r.summary.indicator), std::string(60, '1')) << attack_name(a);
        EXPECT_FALSE(r.summary.damaged) << attack_name(a);
        EXPECT_FALSE(r.summary.attack_success) << attack_name(a);
    }
}

TEST(Engine, PulseWithoutIrsBlocksWindow) {
    for (Line line : {Line::CanL, Line::CanH}) {
        const auto r = run_scenario(with_attack(attack::Pulse{line, 700e-9, 0.5}));
        EXPECT_EQ(indicator_string(r.summary.indicator), window_indicator(60, 10, 30));
    }
}

TEST(Engine, PulsePhaseLockedToBitGrid) {
    // A 1 us period divides the bit time: every bit sees the same phase.
    auto c = with_attack(attack::Pulse{Line::CanL, 1e-6, 0.5}, 1.0, 2.0, 3.0);
    EXPECT_FALSE(run_scenario(c).summary.attack_success);  // falling edge on the sample point
    std::get<attack::Pulse>(c.attack->attack).phase_offset = 0.25e-6;
    EXPECT_TRUE(run_scenario(c).summary.attack_success);  // high phase covers the sample point
}

TEST(Engine, OvercurrentDamage) {
    auto c = with_attack(attack::ActiveOvercurrent{}, 1.0, 2.0, 3.0);
    const auto none = run_scenario(c);
    ASSERT_TRUE(none.summary.damaged);
    EXPECT_LE(*none.summary.damage_time, 1.0 + c.damage.damage_time + 1e-12);
    c.irs.kind = DeviceKind::Fuse;
    EXPECT_FALSE(run_scenario(c).summary.damaged);
    c.irs.kind = DeviceKind::ResettableFuse;
    EXPECT_TRUE(run_scenario(c).summary.damaged);
    auto p = with_attack(attack::PassiveOvercurrent{}, 1.0, 2.0, 3.0);
    EXPECT_TRUE(run_scenario(p).summary.damaged);
    p.irs.kind = DeviceKind::Fuse;
    EXPECT_FALSE(run_scenario(p).summary.damaged);
}

TEST(Engine, ThermostatCycle) {
    auto c = baseline(40.0);
    c.irs.kind = DeviceKind::Thermostat;
    c.irs.coil_drive = 1.0;
    c.irs.coil_t_start = 2.0;
    c.irs.coil_t_end = 5.0;
    const auto r = run_scenario(c);
    ASSERT_EQ(r.summary.device_events.size(), 4u);  // open + close on each pin
    const double open = r.summary.device_events[0].t;
    EXPECT_EQ(r.summary.device_events[0].kind, TraceKind::ThermostatOpen);
    EXPECT_GT(open, 2.0);
    EXPECT_LT(open, 2.0 + 5.0);
    EXPECT_NEAR(open, 2.0 + 2.0 * std::log(40.0 / 25.0), 1e-9);
    const double close = r.summary.device_events[2].t;
    EXPECT_EQ(r.summary.device_events[2].kind, TraceKind::ThermostatClosed);
    EXPECT_GT(close, 5.0);
    EXPECT_LT(close, 5.0 + 30.0);
    EXPECT_EQ(indicator_string(r.summary.indicator), std::string(40, '1'));
    // Transparent while closed: frame traffic equals the run without a device.
    const auto plain = run_scenario(baseline(40.0));
    auto frames = [](const Trace& t) {
        std::vector<TraceRecord> out;
        for (const auto& rec : t.records)
            if (rec.kind == TraceKind::FrameSent || rec.kind == TraceKind::FrameReceived) out.push_back(rec);
        return out;
    };
    EXPECT_EQ(frames(r.trace), frames(plain.trace));
}

TEST(Engine, Deterministic) {
    auto c = with_attack(attack::Pulse{Line::CanH, 0.8e-6, 0.4}, 2.0, 4.0, 6.0);
    c.irs.kind = DeviceKind::Breaker;
    c.trace.sample_period = 0.25;
    const auto a = run_scenario(c), b = run_scenario(c);
    EXPECT_EQ(a.trace.records, b.trace.records);
}

TEST(Engine, AttackWindowLocality) {
    const auto base = run_scenario(baseline(20.0));
    const auto att = run_scenario(with_attack(attack::DoS{5.0}, 7.5, 12.0, 20.0));
    std::vector<TraceRecord> a, b;
    for (const auto& r : base.trace.records)
        if (r.t < to_picos(7.5)) a.push_back(r);
    for (const auto& r : att.trace.records)
        if (r.t < to_picos(7.5)) b.push_back(r);
    EXPECT_EQ(a, b);
}

TEST(Engine, TraceSortedAndConserving) {
    auto c = with_attack(attack::DoS{5.0}, 3.0, 6.0, 10.0);
    c.trace.sample_period = 0.5;
    const auto r = run_scenario(c);
    for (std::size_t k = 1; k < r.trace.records.size(); ++k) EXPECT_LE(r.trace.records[k - 1].t, r.trace.records[k].t);
    EXPECT_EQ(r.summary.frames_received + r.summary.undelivered, r.summary.frames_sent);
    EXPECT_EQ(count(r.trace, TraceKind::LineVoltageSample), 2 * 20);
}

TEST(Engine, ConfigValidation) {
    auto c = baseline();
    c.ecus.push_back({"D", EcuRole::VidsHost, 1.0, 0.0, {}});
    EXPECT_THROW(c.validate(), ConfigError);
    auto d = with_attack(attack::Pulse{Line::CanL, 1e-6, 1.5});
    try {
        d.validate();
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.path(), "attack.duty");
    }
}

TEST(Engine, SweepMatchesPredictors) {
    auto make = [](double v) { return with_attack(attack::DoS{v}, 1.0, 2.0, 3.0); };
    std::vector<double> grid;
    for (int k = 1; k <= 50; ++k) grid.push_back(k / 10.0);
    const auto rows = run_sweep(grid, make, 0);
    ASSERT_EQ(rows.size(), 50u);
    const double v_min = *min_dos_voltage(TransceiverParams{}, BusTopology{}, BitTiming{});
    EXPECT_DOUBLE_EQ(v_min, 2.2);
    for (const auto& row : rows) EXPECT_EQ(row.success, row.value >= v_min - 1e-9) << row.value;

    auto fra = [](double v) { return with_attack(attack::ForcedRetransmission{v}, 1.0, 2.0, 3.0); };
    const auto frows = run_sweep({2.5, 3.0, 3.5, 4.0, 4.5, 5.0}, fra, 2);
    for (const auto& row : frows) EXPECT_EQ(row.success, row.value >= 4.5) << row.value;
}
