#include <sstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "philab/bench.hpp"
#include "philab/phil_engine.hpp"

using namespace philab;
using philab::oracle::bundled;

namespace {

Scenario source_only() {
    Scenario s = bundled("bench5_reduced");
    s.loads.clear();
    s.schedule.clear();
    return s;
}

} // namespace

TEST(Bench, PreconditionsEnforced) {
    EXPECT_THROW((void)time_per_step(source_only(), 1000, 5), Error);
    EXPECT_THROW((void)time_per_step(source_only(), 100000, 2), Error);
}

TEST(Bench, SourceOnlyBaselinePositive) {
    const TimingStats t = time_per_step(source_only(), 100000, 5);
    EXPECT_GT(t.median_ns_per_step, 0.0);
    EXPECT_GE(t.p95_ns_per_step, t.median_ns_per_step);
    EXPECT_EQ(t.ns_per_step.size(), 5u);
}

TEST(Bench, LinearInSteps) {
    const Scenario s = bundled("bench5_reduced");
    const TimingStats a = time_per_step(s, 2000000, 7);
    const TimingStats b = time_per_step(s, 4000000, 7);
    EXPECT_NEAR(b.total_ns / a.total_ns, 2.0, 0.5);
    EXPECT_NEAR(b.median_ns_per_step / a.median_ns_per_step, 1.0, 0.2);
}

TEST(Bench, IdenticalScenariosRatioNearOne) {
    const SpeedupReport r = compare(bundled("bench5"), bundled("bench5"), 1000000, 7);
    EXPECT_NEAR(r.ratio, 1.0, 0.1);
}

TEST(Bench, ReducedCostIndependentOfPower) {
    Scenario lo = bundled("bench5_reduced"), hi = lo;
    for (auto& l : lo.loads) l = with_load_power(l, 1e3);
    for (auto& l : hi.loads) l = with_load_power(l, 12e3);
    const SpeedupReport r = compare(lo, hi, 2000000, 7);
    EXPECT_NEAR(r.ratio, 1.0, 0.2);
}

TEST(Bench, MismatchRejected) {
    Scenario a = bundled("bench5"), b = bundled("bench5_reduced");
    b.solver.dt_s = 2e-6;
    try {
        (void)compare(a, b, 100000, 5);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ConfigMismatch);
    }
    EXPECT_THROW((void)compare(a, bundled("test2"), 100000, 5), Error);
}

TEST(Bench, FewerLoadsCheaperButNotProportionally) {
    Scenario one = bundled("bench5_reduced");
    one.loads.resize(1);
    one.schedule.clear();
    const SpeedupReport r = compare(bundled("bench5_reduced"), one, 2000000, 7);
    EXPECT_GT(r.ratio, 1.0);
    EXPECT_LT(r.ratio, 5.0);
}

TEST(Bench, TimingModeMatchesTraceMode) {
    for (const char* name : {"bench5", "bench5_reduced", "test1_80kw", "test2"}) {
        Scenario s = bundled(name);
        s.solver.t_end_s = 0.06;
        Engine traced(s);
        const Trace tr = traced.run();
        Engine timed(s);
        timed.advance(s.solver.steps());
        EXPECT_EQ(timed.state(), traced.state()) << name;
        EXPECT_EQ(timed.bus_voltage(), tr.v_dc_bus_v.back()) << name;
    }
}

TEST(Bench, ReportFormats) {
    SpeedupReport r;
    r.model_a = "avg_inverter";
    r.model_b = "reduced_order";
    r.n_loads = "5";
    r.dt_s = 1e-6;
    r.a.median_ns_per_step = 90.5;
    r.b.median_ns_per_step = 30.25;
    r.ratio = 2.5;
    std::ostringstream os;
    write_csv_header(os);
    write_csv_row(os, r);
    EXPECT_EQ(os.str(), "model_a,model_b,n_loads,dt_s,median_a_ns,median_b_ns,ratio\n"
                        "avg_inverter,reduced_order,5,1e-06,90.5,30.25,2.5\n");
    EXPECT_EQ(load_model_name(bundled("bench5")), "avg_inverter");
    EXPECT_EQ(load_model_name(source_only()), "none");
}
