#include <gtest/gtest.h>

#include <sstream>

#include "canvolt/output.hpp"

using namespace canvolt;

namespace {

ScenarioConfig baseline(double duration) {
    ScenarioConfig c;
    c.duration = duration;
    c.ecus = {{"A", EcuRole::VidsHost, 1.0, 0.0, {}},
              {"B", EcuRole::Logger, 1.0, 0.0, {}},
              {"C", EcuRole::Sender, 1.0, 0.0, make_frame(0x001, {0x01})}};
    return c;
}

std::vector<std::string> lines(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

}  // namespace

TEST(Output, BaselineTraceHasSixtyReceptions) {
    const auto r = run_scenario(baseline(60.0));
    std::ostringstream csv;
    write_trace_csv(csv, r.trace);
    const auto rows = lines(csv.str());
    ASSERT_FALSE(rows.empty());
    EXPECT_EQ(rows[0], "time_s,kind,ecu,line,value,detail");
    int received = 0;
    for (const auto& l : rows) received += l.find(",FrameReceived,B,") != std::string::npos;
    EXPECT_EQ(received, 60);
    EXPECT_EQ(rows[2], "0.000098000000,FrameReceived,B,,1,from=C id=0x001 instance=0");
}

TEST(Output, SampleRowsNameTheLine) {
    auto c = baseline(2.0);
    c.trace.sample_period = 1.0;
    std::ostringstream csv;
    write_trace_csv(csv, run_scenario(c).trace);
    // Samples at whole seconds fall in a SOF bit.
    EXPECT_NE(csv.str().find("1.000000000000,LineVoltageSample,A,canh,3.5,"), std::string::npos);
    EXPECT_NE(csv.str().find("1.000000000000,LineVoltageSample,A,canl,1.5,"), std::string::npos);
    EXPECT_NE(csv.str().find("1.000000000000,PinCurrentSample,A,canh,0,"), std::string::npos);
}

TEST(Output, SummaryJson) {
    const auto c = baseline(5.0);
    const auto j = summary_json(run_scenario(c).summary, c);
    EXPECT_EQ(j["indicator"], "11111");
    EXPECT_EQ(j["frames_sent"], 5);
    EXPECT_EQ(j["attack"], "none");
    EXPECT_TRUE(j["damage_time"].is_null());
}

TEST(Output, SweepCsvColumns) {
    std::vector<SweepRow> rows{{2.1, false, "1 of 1 frames delivered, during the attack", {}}, {2.2, true, "", {}}};
    std::ostringstream csv;
    write_sweep_csv(csv, rows);
    const auto l = lines(csv.str());
    ASSERT_EQ(l.size(), 3u);
    EXPECT_EQ(l[0], "param,success,first_failure_reason");
    EXPECT_EQ(l[1], "2.1,0,\"1 of 1 frames delivered, during the attack\"");
    EXPECT_EQ(l[2], "2.2,1,");
    EXPECT_DOUBLE_EQ(*first_success(rows), 2.2);
}

TEST(Output, TauBitTableWithinTolerance) {
    const double measured[] = {2.00e-6, 2.24e-6, 2.86e-6, 2.98e-6, 3.07e-6, 3.16e-6};
    const auto rows = tau_bit_table(TransceiverParams{}, BitTiming{});
    ASSERT_EQ(rows.size(), 6u);
    for (std::size_t k = 0; k < 6; ++k) EXPECT_NEAR(rows[k].tau_bit, measured[k], 0.12 * measured[k]) << rows[k].v_attack_h;
    EXPECT_NEAR(rows[5].tau_bit, 3.16e-6, 1e-12);
}

TEST(Output, ExpectationMismatchesAreListed) {
    Summary s;
    s.indicator = {1, 0};
    s.retransmissions = 3;
    Expectations x;
    x.indicator = "11";
    x.min_retransmissions = 5;
    x.damaged = false;
    const auto f = check_expectations(x, s);
    ASSERT_EQ(f.size(), 2u);
    EXPECT_EQ(f[0], "indicator: expected 11, got 10");
    EXPECT_TRUE(check_expectations(Expectations{}, s).empty());
}
