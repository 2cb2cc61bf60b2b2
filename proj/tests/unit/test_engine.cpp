#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "philab/phil_engine.hpp"
#include "philab/stability.hpp"

using namespace philab;
using philab::oracle::bundled;
using philab::oracle::with_interface;

namespace {

constexpr Real kInf = std::numeric_limits<Real>::infinity();

Scenario reduced(const char* name) { return with_load_model(bundled(name), LoadModel::Reduced); }

Scenario short_run(Scenario s, Real t_end) {
    s.solver.t_end_s = t_end;
    return s;
}

Real tail_mean(const std::vector<Real>& x, std::size_t n) {
    return std::accumulate(x.end() - static_cast<long>(n), x.end(), 0.0) / static_cast<Real>(n);
}

Trace synthetic(const std::function<Real(Real)>& v, Real t_end, Real dt = 1e-5) {
    Trace tr(dt, 0, 0);
    const auto n = static_cast<std::size_t>(std::llround(t_end / dt));
    for (std::size_t k = 0; k <= n; ++k) {
        const Real t = static_cast<Real>(k) * dt;
        tr.t_s.push_back(t);
        tr.v_dc_bus_v.push_back(v(t));
        tr.i_bus_a.push_back(0.0);
        tr.flags.push_back(0);
    }
    return tr;
}

} // namespace

TEST(Trace, RowCount) {
    Scenario s = short_run(bundled("test1_40kw"), 0.0123);
    EXPECT_EQ(Engine(s).run().rows(), 12301u);
    s.solver.t_end_s = 0.0;
    s.schedule.clear();
    const Trace tr = Engine(s).run();
    ASSERT_EQ(tr.rows(), 1u);
    EXPECT_EQ(tr.t_s[0], 0.0);
    EXPECT_NEAR(tr.v_dc_bus_v[0], 674.0658617698, 1e-6);
}

TEST(Engine, DcOperatingPointsMatchAlgebra) {
    // reduced-order load: i = v / R_load  ->  v = V_s / (1 + R_f / R_load)
    const Real r_load = 680.0 * 680.0 / 40e3;
    const Real v_red = 680.0 / (1.0 + 0.1 / r_load);
    // constant-power inverter: v^2 - V_s v + R_f P = 0
    const Real v_avg = 0.5 * (680.0 + std::sqrt(680.0 * 680.0 - 4.0 * 0.1 * 40e3));
    const Trace a = Engine(short_run(reduced("test1_40kw"), 0.05)).run();
    const Trace b = Engine(short_run(bundled("test1_40kw"), 0.05)).run();
    EXPECT_NEAR(a.v_dc_bus_v.back(), v_red, 1e-6);
    EXPECT_NEAR(b.v_dc_bus_v.back(), v_avg, 1e-6);
    EXPECT_NEAR(v_red, 674.1681, 1e-4);
    EXPECT_NEAR(b.i_bus_a.back(), 40e3 / v_avg, 1e-6);
}

TEST(Engine, Determinism) {
    for (const char* name : {"test1_80kw", "test2"}) {
        for (LoadModel m : {LoadModel::Reduced, LoadModel::Averaged}) {
            const Scenario s = short_run(with_load_model(bundled(name), m), 0.08);
            const Trace a = Engine(s).run();
            const Trace b = Engine(s).run();
            EXPECT_TRUE(a == b) << name;
            Engine e(s);
            (void)e.run();
            EXPECT_TRUE(e.run() == a) << "rerun " << name;
        }
    }
}

TEST(Engine, CopiesAreIndependent) {
    Engine a(short_run(bundled("test1_80kw"), 0.06));
    a.advance(1000);
    Engine b(a);
    a.advance(500);
    EXPECT_NE(a.state(), b.state());
    b.advance(500);
    EXPECT_EQ(a.state(), b.state());
}

TEST(Engine, ScheduleOnSampleBoundary) {
    const Scenario s = short_run(bundled("test1_80kw"), 0.06);
    const Trace tr = Engine(s).run();
    const std::size_t k = s.schedule.front().step_index(s.solver.dt_s);
    EXPECT_EQ(k, 50000u);
    EXPECT_EQ(tr.p_ref_w[0][k - 1], 40e3);
    EXPECT_EQ(tr.p_ref_w[0][k], 80e3);
}

TEST(Engine, BypassedInterfaceIsStable) {
    const Scenario s = with_interface(bundled("test1_40kw"), 0.0, kInf);
    Engine e(s);
    const Trace tr = e.run();
    EXPECT_EQ(classify(tr, e.v_nom()), TraceClass::Stable);
}

TEST(Engine, DivergenceGuard) {
    const Scenario s = reduced("test1_80kw");
    const Trace tr = Engine(s).run();
    ASSERT_TRUE(tr.diverged);
    EXPECT_LT(tr.rows(), s.solver.steps() + 1);
    EXPECT_TRUE(tr.flags.back() & kFlagDiv);
    EXPECT_GT(std::abs(tr.v_dc_bus_v.back()), 6800.0);
    EXPECT_EQ(classify(tr, 680.0), TraceClass::Diverged);
}

TEST(Engine, AcceptanceScenarioClassification) {
    for (LoadModel m : {LoadModel::Reduced, LoadModel::Averaged}) {
        const Trace ok = Engine(with_load_model(bundled("test1_40kw"), m)).run();
        EXPECT_EQ(classify(ok, 680.0), TraceClass::Stable);
        for (Real v : std::vector<Real>(ok.v_dc_bus_v.end() - 20000, ok.v_dc_bus_v.end())) {
            EXPECT_NEAR(v, 680.0, 0.05 * 680.0);
        }
        const TraceClass bad = classify(Engine(with_load_model(bundled("test1_80kw"), m)).run(), 680.0);
        EXPECT_TRUE(bad == TraceClass::Growing || bad == TraceClass::Diverged) << to_string(bad);
    }
}

// losses in R_f are nonnegative: V_s * mean(i) >= mean(v_bus * i_bus), and
// for constant-power loads the bus power equals sum p_o / eta
TEST(Engine, EnergySanity) {
    for (LoadModel m : {LoadModel::Reduced, LoadModel::Averaged}) {
        const Scenario s = with_load_model(bundled("bench5"), m);
        const Trace tr = Engine(short_run(s, 0.1)).run();
        const std::size_t n = 50000;
        std::vector<Real> p(tr.rows());
        for (std::size_t k = 0; k < tr.rows(); ++k) p[k] = tr.v_dc_bus_v[k] * tr.i_bus_a[k];
        const Real p_bus = tail_mean(p, n);
        const Real p_src = 680.0 * tail_mean(tr.i_bus_a, n);
        EXPECT_GE(p_src, p_bus);
        EXPECT_NEAR(p_src - p_bus, 0.1 * std::pow(tail_mean(tr.i_bus_a, n), 2), 1.0);
        Real demand = 0.0;
        for (const auto& l : s.loads) demand += load_power(l) / load_eta(l);
        if (m == LoadModel::Averaged) {
            EXPECT_NEAR(p_bus, demand, 1e-6 * demand);
            EXPECT_GE(p_src, demand);
        } else {
            // R_load fixed at v_nom: power scales with (v / v_nom)^2
            const Real v = tail_mean(tr.v_dc_bus_v, n);
            EXPECT_NEAR(p_bus, demand * (v / 680.0) * (v / 680.0), 1e-3 * demand);
        }
    }
}

TEST(Engine, TransparencyLimit) {
    Scenario base = short_run(reduced("test1_40kw"), 0.03);
    base.schedule = {{0.01, 0, 45e3}};
    const Trace direct = Engine(with_interface(base, 0.0, kInf)).run();
    std::vector<Real> err;
    for (auto [tau, fc] : {std::pair{5e-6, 15e3}, {2e-6, 50e3}, {1e-6, 200e3}}) {
        err.push_back(oracle::max_abs_diff(Engine(with_interface(base, tau, fc)).run().v_dc_bus_v, direct.v_dc_bus_v));
    }
    EXPECT_GT(err[0], err[1]);
    EXPECT_GT(err[1], err[2]);
    EXPECT_LT(err[2], 0.25 * err[0]);
}

TEST(Engine, SeededRunStartsFromSeed) {
    const Scenario s = short_run(bundled("test1_40kw"), 0.001);
    Engine e(s);
    Vector seed = e.state();
    e.advance(123);
    const Vector moved = e.state();
    const Trace tr = e.run(moved);
    EXPECT_EQ(tr.v_dc_bus_v[0], moved[moved.size() - 4]);
    EXPECT_THROW((void)e.run(Vector::Zero(3)), Error);
    (void)seed;
}

TEST(Classify, SyntheticTraces) {
    const Real w = kTwoPi * 200.0;
    const Trace flat = synthetic([](Real) { return 680.0; }, 0.2);
    EXPECT_EQ(classify(flat, 680.0), TraceClass::Stable);
    const Trace decaying = synthetic([&](Real t) { return 680.0 + 20.0 * std::exp(-50.0 * t) * std::sin(w * t); }, 0.2);
    EXPECT_EQ(classify(decaying, 680.0), TraceClass::Stable);
    const Trace steady = synthetic([&](Real t) { return 680.0 + 20.0 * std::sin(w * t); }, 0.2);
    EXPECT_EQ(classify(steady, 680.0), TraceClass::Oscillating);
    const Trace growing = synthetic([&](Real t) { return 680.0 + 0.5 * std::exp(20.0 * t) * std::sin(w * t); }, 0.2);
    EXPECT_EQ(classify(growing, 680.0), TraceClass::Growing);
    EXPECT_GE(longest_growth_run(cycle_amplitudes(growing, 0.068)), 35);
    const Trace offset = synthetic([](Real) { return 600.0; }, 0.2);
    EXPECT_EQ(classify(offset, 680.0), TraceClass::Oscillating);
}

TEST(Measure, ReducedOrderLoadMatchesClosedForm) {
    const ReducedOrderLoadParams p;
    const FrequencyGrid grid{500.0, 20e3, 10};
    const FreqResponse fr =
        measure_input_impedance([p] { return make_reduced_order_load(p); }, 680.0, 40e3, grid.frequencies_hz());
    const RationalTF z = reduced_order_impedance(p);
    ASSERT_EQ(fr.size(), grid.frequencies_hz().size());
    for (std::size_t i = 0; i < fr.size(); ++i) {
        const Complex r = fr.points[i].value / tf_eval(z, fr.omega(i));
        EXPECT_LT(std::abs(20.0 * std::log10(std::abs(r))), 0.5) << fr.freq_hz(i);
        EXPECT_LT(std::abs(rad_to_deg(std::arg(r))), 2.0) << fr.freq_hz(i);
    }
}

TEST(Measure, ResistorIsFlat) {
    const FreqResponse fr = measure_input_impedance([] { return make_resistor(4.7); }, 10.0, std::nullopt,
                                                    {1.0, 10.0, 100.0, 1e3, 1e4, 1e5});
    for (const auto& pt : fr.points) {
        EXPECT_NEAR(std::abs(pt.value), 4.7, 1e-9);
        EXPECT_NEAR(std::arg(pt.value), 0.0, 1e-9);
    }
}

TEST(Measure, LcOutputImpedance) {
    const LcFilterParams p;
    const FreqResponse fr =
        measure_output_impedance([p] { return make_lc_filter(p); }, 58.8, {50.0, 500.0, 1591.5, 5e3, 2e4});
    for (const auto& pt : fr.points) {
        const Complex r = pt.value / tf_eval(lc_output_impedance(p), pt.omega);
        EXPECT_NEAR(std::abs(r), 1.0, 0.01);
        EXPECT_NEAR(rad_to_deg(std::arg(r)), 0.0, 1.0);
    }
}

TEST(Measure, AveragedInverterAgainstReducedModel) {
    const AvgInverterParams a;
    const FrequencyGrid grid{10.0, 2000.0, 10};
    const FreqResponse fr =
        measure_input_impedance([a] { return make_avg_inverter(a); }, 680.0, 40e3, grid.frequencies_hz());
    const RationalTF z = reduced_order_impedance(ReducedOrderLoadParams{});
    for (std::size_t i = 0; i < fr.size(); ++i) {
        const Complex r = fr.points[i].value / tf_eval(z, fr.omega(i));
        EXPECT_LT(std::abs(20.0 * std::log10(std::abs(r))), 3.0) << fr.freq_hz(i);
        EXPECT_LT(std::abs(rad_to_deg(std::arg(r))), 15.0) << fr.freq_hz(i);
    }
}

TEST(Measure, NonSettledIsReported) {
    MeasureOptions o;
    o.settle_cycles = 0.0;
    o.tolerance = 1e-12;
    o.threads = 1;
    try {
        (void)measure_input_impedance([] { return make_reduced_order_load(ReducedOrderLoadParams{}); }, 600.0, 40e3,
                                      {20.0}, o);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NonSettled);
    }
}
