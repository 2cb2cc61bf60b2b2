#include <cmath>
#include <algorithm>
#include <numeric>

#include "philab/stability.hpp"

namespace philab {

RationalTF open_loop_tf(const RationalTF& z_s, const RationalTF& z_l, const RationalTF& f_interface, Real tau1_s,
                        Real tau2_s) {
    if (!(tau1_s >= 0.0) || !(tau2_s >= 0.0)) throw Error(ErrorCode::NegativeDelay, "PHIL delays must be >= 0");
    const RationalTF t = tf_ratio(tf_series(z_s, f_interface), z_l);
    return t.with_delay(t.delay_s() + tau1_s + tau2_s);
}

RationalTF parallel_load_impedance(const std::vector<RationalTF>& impedances) {
    if (impedances.empty()) throw Error(ErrorCode::DomainError, "parallel composition of nothing");
    for (const auto& z : impedances) {
        if (z.delay_s() != 0.0) throw Error(ErrorCode::DomainError, "parallel composition needs delay-free impedances");
        if (poly_degree(z.num()) < 0) throw Error(ErrorCode::ZeroDenominator, "short-circuit load in parallel set");
    }
    // Z = prod(num_k) / sum_k(den_k * prod_{j != k} num_j)
    Polynomial all_num = Polynomial::Ones(1);
    for (const auto& z : impedances) all_num = poly_mul(all_num, z.num());
    Polynomial admittance_num = Polynomial::Zero(1);
    for (std::size_t k = 0; k < impedances.size(); ++k) {
        Polynomial term = impedances[k].den();
        for (std::size_t j = 0; j < impedances.size(); ++j) {
            if (j != k) term = poly_mul(term, impedances[j].num());
        }
        admittance_num = poly_add(admittance_num, term);
    }
    if (poly_degree(admittance_num) < 0) throw Error(ErrorCode::ZeroDenominator, "load admittances cancel");
    return {all_num, admittance_num};
}

RationalTF interface_tf(const PhilParams& phil) {
    return phil.bypass_filter() ? RationalTF::constant(1.0) : RationalTF::first_order_lowpass(phil.interface_cutoff_hz);
}

RationalTF load_impedance_model(const LoadSpec& load, Real v_nom, Real p_w) {
    ReducedOrderLoadParams r;
    if (const auto* red = std::get_if<ReducedOrderLoadParams>(&load)) r = *red;
    else r.v_nom_v = v_nom;
    r.eta = load_eta(load);
    r.c_i_f = load_ci(load);
    r.p_o_w = p_w;
    return reduced_order_impedance(r);
}

namespace {

Real dc_load_current(const Scenario& s, const std::vector<Real>& p) {
    const Real v = nominal_bus_voltage(s.source);
    Real i = 0.0;
    for (std::size_t k = 0; k < s.loads.size(); ++k) i += p[k] / (load_eta(s.loads[k]) * v);
    return i;
}

bool phase_condition(const FreqResponse& t) {
    const auto mag = t.magnitude_db();
    const auto ph = t.phase_deg();
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (mag[i] >= 0.0 && std::abs(ph[i]) > 180.0) return false;
    }
    return true;
}

// Load-side impedance, sampled at the given (already snapped) frequencies.
FreqResponse sampled_load(const Scenario& s, const std::vector<Real>& p, const std::vector<Real>& f_req,
                          const std::vector<Real>& omegas, const AssessOptions& o) {
    const Real v_nom = nominal_bus_voltage(s.source);
    FreqResponse z;
    z.grid = o.measured_grid;
    std::vector<Complex> y(omegas.size(), Complex(0.0, 0.0));
    for (std::size_t k = 0; k < s.loads.size(); ++k) {
        if (o.measured_loads) {
            const LoadSpec spec = s.loads[k];
            const auto fr = measure_input_impedance([spec] { return make_load(spec); }, v_nom, p[k], f_req, o.measure);
            if (fr.size() != omegas.size()) throw Error(ErrorCode::ConfigError, "measurement grids disagree");
            for (std::size_t i = 0; i < omegas.size(); ++i) y[i] += 1.0 / fr.points[i].value;
        } else {
            const RationalTF zk = load_impedance_model(s.loads[k], v_nom, p[k]);
            for (std::size_t i = 0; i < omegas.size(); ++i) y[i] += 1.0 / tf_eval(zk, omegas[i]);
        }
    }
    for (std::size_t i = 0; i < omegas.size(); ++i) z.points.push_back({omegas[i], 1.0 / y[i]});
    return z;
}

Assessment assess_rational(const Scenario& s, const std::vector<Real>& p, const AssessOptions& o) {
    const Real v_nom = nominal_bus_voltage(s.source);
    const RationalTF z_s = lc_output_impedance(std::get<LcFilterParams>(s.source));
    std::vector<RationalTF> zs;
    for (std::size_t k = 0; k < s.loads.size(); ++k) zs.push_back(load_impedance_model(s.loads[k], v_nom, p[k]));
    const RationalTF z_l = parallel_load_impedance(zs);
    const RationalTF t = open_loop_tf(z_s, z_l, interface_tf(s.phil), s.phil.tau1_s, s.phil.tau2_s);

    Assessment a;
    FrequencyGrid grid = o.grid;
    for (;; ++a.refinements) {
        a.open_loop = freq_sweep(t, grid);
        try {
            a.report = margins(a.open_loop, o.nyquist);
            if (a.report.resolved || a.refinements >= o.max_refinements) break;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::AmbiguousCrossing || a.refinements >= o.max_refinements) throw;
        }
        grid = grid.refined(4);
    }
    a.z_source = freq_sweep(z_s, grid);
    a.z_load = freq_sweep(z_l, grid);
    return a;
}

FreqResponse sampled_source(const Scenario& s, const std::vector<Real>& p, const std::vector<Real>& f_req,
                            const AssessOptions& o) {
    if (const auto* boost = std::get_if<BoostParams>(&s.source)) {
        const BoostParams bp = *boost;
        return measure_output_impedance([bp] { return make_boost(bp); }, dc_load_current(s, p), f_req, o.measure);
    }
    const RationalTF z = lc_output_impedance(std::get<LcFilterParams>(s.source));
    FreqResponse fr;
    for (Real f : f_req) fr.points.push_back({hz_to_rad(f), tf_eval(z, hz_to_rad(f))});
    return fr;
}

// Measurements are expensive, so an unresolved crossing is refined only
// where the locus swings fast around (-1, 0): 8x denser inside each
// flagged interval.
std::vector<Real> local_refinement(const FreqResponse& t) {
    std::vector<Real> extra;
    for (std::size_t i = 0; i + 1 < t.size(); ++i) {
        const Real a = std::arg(t.value(i) + 1.0);
        const Real b = std::arg(t.value(i + 1) + 1.0);
        const Real step = std::remainder(b - a, kTwoPi);
        if (std::abs(step) <= kPi / 8.0) continue;
        const Real f0 = t.freq_hz(i), f1 = t.freq_hz(i + 1);
        for (int k = 1; k < 8; ++k) extra.push_back(f0 * std::pow(f1 / f0, k / 8.0));
    }
    return extra;
}

Assessment assess_sampled(const Scenario& s, const std::vector<Real>& p, const AssessOptions& o) {
    const RationalTF f_if = interface_tf(s.phil);
    Assessment a;
    a.sampled = true;
    std::vector<Real> f_req = o.measured_grid.frequencies_hz();
    a.z_source = sampled_source(s, p, f_req, o);
    for (;; ++a.refinements) {
        std::vector<Real> omegas;
        for (const auto& pt : a.z_source.points) omegas.push_back(pt.omega);
        a.z_load = sampled_load(s, p, f_req, omegas, o);

        a.open_loop = FreqResponse{};
        a.open_loop.grid = o.measured_grid;
        a.open_loop.delay_s = s.phil.tau1_s + s.phil.tau2_s;
        for (std::size_t i = 0; i < omegas.size(); ++i) {
            const Complex t = a.z_source.points[i].value * tf_eval(f_if, omegas[i]) / a.z_load.points[i].value;
            a.open_loop.points.push_back({omegas[i], t});
        }
        try {
            a.report = margins(a.open_loop, o.nyquist);
            if (a.report.resolved || a.refinements >= o.max_refinements) break;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::AmbiguousCrossing || a.refinements >= o.max_refinements) throw;
        }
        std::vector<Real> extra = local_refinement(a.open_loop);
        if (extra.empty()) extra = o.measured_grid.refined(4).frequencies_hz();
        const FreqResponse more = sampled_source(s, p, extra, o);
        std::vector<std::pair<Real, FreqPoint>> merged;
        for (std::size_t i = 0; i < a.z_source.size(); ++i) merged.push_back({f_req[i], a.z_source.points[i]});
        for (std::size_t i = 0; i < more.size(); ++i) merged.push_back({extra[i], more.points[i]});
        std::sort(merged.begin(), merged.end(),
                  [](const auto& x, const auto& y) { return x.second.omega < y.second.omega; });
        f_req.clear();
        a.z_source.points.clear();
        for (const auto& [f, pt] : merged) {
            if (!a.z_source.points.empty() && pt.omega <= a.z_source.points.back().omega) continue;
            f_req.push_back(f);
            a.z_source.points.push_back(pt);
        }
    }
    a.z_source.grid = o.measured_grid;
    return a;
}

} // namespace

Assessment assess(const Scenario& s, const AssessOptions& opts) {
    validate(s);
    const std::vector<Real> p = load_powers_at(s, opts.at_time_s);
    const bool sampled = opts.measured_loads || std::holds_alternative<BoostParams>(s.source);
    Assessment a = sampled ? assess_sampled(s, p, opts) : assess_rational(s, p, opts);
    a.phase_condition = phase_condition(a.open_loop);
    a.load_powers_w = p;
    return a;
}

} // namespace philab
