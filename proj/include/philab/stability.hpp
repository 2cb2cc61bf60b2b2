#pragma once

#include <limits>
#include <vector>

#include "philab/freqdomain.hpp"
#include "philab/phil_engine.hpp"
#include "philab/scenario.hpp"

namespace philab {

/// Z_S F e^{-s(tau1+tau2)} / Z_L
RationalTF open_loop_tf(const RationalTF& z_s, const RationalTF& z_l, const RationalTF& f_interface, Real tau1_s,
                        Real tau2_s);

/// 1/Z = sum 1/Z_k, combined over a common denominator.
RationalTF parallel_load_impedance(const std::vector<RationalTF>& impedances);

/// First-order interface F(s); unity when bypassed.
RationalTF interface_tf(const PhilParams& phil);

/// Reduced-order small-signal impedance of a load at power p_w, whatever
/// the load's simulation model. v_nom is the bus nominal voltage.
RationalTF load_impedance_model(const LoadSpec& load, Real v_nom, Real p_w);

struct AssessOptions {
    FrequencyGrid grid{};
    /// 4x refinements tried on AmbiguousCrossing.
    int max_refinements = 2;
    /// Operating point: load powers after schedule entries up to this time.
    Real at_time_s = std::numeric_limits<Real>::infinity();
    /// Use perturbation-measured load impedances instead of the
    /// reduced-order model (comparison studies).
    bool measured_loads = false;
    /// Grid for anything that has to be measured (boost Z_S, measured loads).
    FrequencyGrid measured_grid{10.0, 50e3, 50};
    MeasureOptions measure{};
    NyquistOptions nyquist{};
};

struct Assessment {
    StabilityReport report;
    FreqResponse open_loop;
    FreqResponse z_source;
    FreqResponse z_load;
    /// Where |T| >= 1, the unwrapped phase of T stays within +-180 deg.
    bool phase_condition = true;
    /// True when any impedance came from measurement.
    bool sampled = false;
    int refinements = 0;
    std::vector<Real> load_powers_w;
};

Assessment assess(const Scenario& s, const AssessOptions& opts = {});

} // namespace philab
