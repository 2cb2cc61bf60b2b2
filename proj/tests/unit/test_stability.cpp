#include <cmath>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "philab/stability.hpp"

using namespace philab;
using philab::oracle::bundled;

namespace {

ReducedOrderLoadParams red(Real p, Real c = 1e-6) {
    ReducedOrderLoadParams r;
    r.p_o_w = p;
    r.c_i_f = c;
    return r;
}

const std::vector<Real> kOmegas = {0.1, 10.0, 1e3, 1e4, 8.65e4, 1e5, 1e6, 1e7};

} // namespace

TEST(OpenLoop, DegeneratesToImpedanceRatio) {
    const RationalTF zs = lc_output_impedance(LcFilterParams{});
    const RationalTF zl = reduced_order_impedance(red(40e3));
    const RationalTF t = open_loop_tf(zs, zl, RationalTF::constant(1.0), 0.0, 0.0);
    for (Real w : kOmegas) {
        const Complex ref = tf_eval(zs, w) / tf_eval(zl, w);
        EXPECT_LE(std::abs(tf_eval(t, w) - ref), 1e-12 * std::abs(ref));
    }
    const RationalTF t2 = open_loop_tf(zs, zl, RationalTF::first_order_lowpass(15e3), 5e-6, 5e-6);
    EXPECT_DOUBLE_EQ(t2.delay_s(), 10e-6);
    EXPECT_THROW((void)open_loop_tf(zs, zl, RationalTF::constant(1.0), -1e-6, 0.0), Error);
}

TEST(Parallel, IdentitiesAndErrors) {
    const RationalTF z = reduced_order_impedance(red(40e3));
    const RationalTF one = parallel_load_impedance({z});
    const RationalTF two = parallel_load_impedance({z, z});
    const RationalTF merged = reduced_order_impedance(red(80e3, 2e-6));
    for (Real w : kOmegas) {
        const Complex zw = tf_eval(z, w);
        EXPECT_LE(std::abs(tf_eval(one, w) - zw), 1e-12 * std::abs(zw));
        EXPECT_LE(std::abs(tf_eval(two, w) - 0.5 * zw), 1e-12 * std::abs(zw));
        EXPECT_LE(std::abs(tf_eval(two, w) - tf_eval(merged, w)), 1e-12 * std::abs(zw));
    }
    try {
        (void)parallel_load_impedance({z, z.scaled(-1.0)});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ZeroDenominator);
    }
    EXPECT_THROW((void)parallel_load_impedance({z.with_delay(1e-6)}), Error);
    EXPECT_THROW((void)parallel_load_impedance({}), Error);
}

TEST(Assess, TestOneFlip) {
    const Assessment ok = assess(bundled("test1_40kw"));
    EXPECT_EQ(ok.report.verdict, Verdict::Stable);
    EXPECT_EQ(ok.report.encirclements, 0);
    EXPECT_GT(ok.report.gain_margin_db, 0.0);
    EXPECT_GT(ok.report.phase_margin_deg, 0.0);
    EXPECT_FALSE(ok.sampled);

    const Assessment bad = assess(bundled("test1_80kw"));
    EXPECT_EQ(bad.report.verdict, Verdict::Unstable);
    EXPECT_NE(bad.report.encirclements, 0);
    EXPECT_EQ(bad.load_powers_w, std::vector<Real>{80e3});

    AssessOptions before;
    before.at_time_s = 0.0;
    EXPECT_EQ(assess(bundled("test1_80kw"), before).report.verdict, Verdict::Stable);
}

// Threshold sits near 50.1 kW; 50 kW grazes (-1, 0) at 0.0024 and is
// reported Marginal. Stable / not-stable flips exactly once.
TEST(Assess, SinglePowerTransition) {
    const Scenario base = bundled("test1_40kw");
    std::vector<Verdict> v;
    for (Real p : {40e3, 50e3, 60e3, 70e3, 80e3}) {
        Scenario s = base;
        s.loads[0] = with_load_power(s.loads[0], p);
        v.push_back(assess(s).report.verdict);
    }
    int transitions = 0;
    for (std::size_t i = 1; i < v.size(); ++i) transitions += (v[i] == Verdict::Stable) != (v[i - 1] == Verdict::Stable);
    EXPECT_EQ(transitions, 1);
    EXPECT_EQ(v[0], Verdict::Stable);
    EXPECT_EQ(v[1], Verdict::Marginal);
    for (std::size_t i = 2; i < v.size(); ++i) EXPECT_EQ(v[i], Verdict::Unstable);
}

TEST(Assess, GrazingLocusIsMarginalNotAnError) {
    Scenario s = bundled("test1_40kw");
    s.loads[0] = with_load_power(s.loads[0], 50e3);
    const Assessment a = assess(s);
    EXPECT_EQ(a.report.verdict, Verdict::Marginal);
    EXPECT_LT(a.report.min_distance_to_critical, 0.02);
    EXPECT_NEAR(a.report.min_distance_to_critical, 0.00235, 0.002);
    EXPECT_THROW((void)nyquist_encirclements(a.open_loop), Error);
}

TEST(Assess, GridRefinementStable) {
    for (const char* name : {"test1_40kw", "test1_80kw", "bench5"}) {
        AssessOptions a, b;
        b.grid.points_per_decade *= 2;
        EXPECT_EQ(assess(bundled(name), a).report.encirclements, assess(bundled(name), b).report.encirclements) << name;
    }
}

TEST(Assess, UniformScalingInvariant) {
    const RationalTF zs = lc_output_impedance(LcFilterParams{});
    for (Real p : {40e3, 80e3}) {
        const RationalTF zl = reduced_order_impedance(red(p));
        const RationalTF f = RationalTF::first_order_lowpass(15e3);
        const StabilityReport r0 = margins(freq_sweep(open_loop_tf(zs, zl, f, 5e-6, 5e-6), FrequencyGrid{}));
        for (Real k : {1e-3, 7.0, 1e4}) {
            const RationalTF t = open_loop_tf(zs.scaled(k), zl.scaled(k), f, 5e-6, 5e-6);
            const StabilityReport r = margins(freq_sweep(t, FrequencyGrid{}));
            EXPECT_EQ(r.encirclements, r0.encirclements);
            EXPECT_EQ(r.verdict, r0.verdict);
            for (auto [x, y] : {std::pair{r.gain_margin_db, r0.gain_margin_db}, {r.phase_margin_deg, r0.phase_margin_deg}}) {
                if (std::isinf(y)) EXPECT_EQ(x, y);
                else EXPECT_NEAR(x, y, 1e-9);
            }
        }
    }
}

TEST(Assess, TestTwoBoostSource) {
    const Scenario s = bundled("test2");
    const Assessment end = assess(s);
    EXPECT_TRUE(end.sampled);
    EXPECT_EQ(end.report.verdict, Verdict::Unstable);
    EXPECT_EQ(end.load_powers_w, (std::vector<Real>{15e3, 55e3}));
    AssessOptions start;
    start.at_time_s = 0.0;
    EXPECT_EQ(assess(s, start).report.verdict, Verdict::Stable);
}

TEST(Assess, MeasuredLoadsAgreeWithModel) {
    AssessOptions o;
    o.measured_loads = true;
    for (const char* name : {"test1_40kw", "test1_80kw"}) {
        const Assessment m = assess(bundled(name), o);
        EXPECT_TRUE(m.sampled);
        EXPECT_EQ(m.report.verdict, assess(bundled(name)).report.verdict) << name;
    }
}

TEST(Assess, VerdictMatchesSimulation) {
    for (const char* name : {"test1_40kw", "test1_80kw", "test2"}) {
        const Scenario s = bundled(name);
        const StabilityReport r = assess(s).report;
        EXPECT_EQ(r.verdict == Verdict::Stable, r.encirclements == 0) << name;
        for (LoadModel m : {LoadModel::Reduced, LoadModel::Averaged}) {
            Engine e(with_load_model(s, m));
            const TraceClass c = classify(e.run(), e.v_nom());
            EXPECT_EQ(r.verdict == Verdict::Unstable, is_unstable(c)) << name << ' ' << to_string(c);
        }
    }
}

TEST(Assess, PhaseConditionReported) {
    EXPECT_TRUE(assess(bundled("test1_40kw")).phase_condition);
    EXPECT_FALSE(assess(bundled("test1_80kw")).phase_condition);
}
