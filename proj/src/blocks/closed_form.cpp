#include <cmath>

#include "philab/blocks.hpp"
#include "philab/format.hpp"

namespace philab {

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::DomainError, what);
}

void check_cpl_args(Real v, Real eta, Real p) {
    require(v > 0.0 && std::isfinite(v), "voltage must be positive");
    require(p > 0.0 && std::isfinite(p), "power must be positive");
    require(eta > 0.0 && eta <= 1.0, "efficiency must lie in (0, 1]");
}

} // namespace

Real rcpl(Real v_i, Real eta, Real p_o) {
    check_cpl_args(v_i, eta, p_o);
    return -v_i * v_i * eta / p_o;
}

Real rload(Real v_dcbus, Real eta, Real p_o) {
    check_cpl_args(v_dcbus, eta, p_o);
    return v_dcbus * v_dcbus * eta / p_o;
}

void validate(const LcFilterParams& p) {
    require(p.v_source_v > 0.0, "LC filter: v_source must be positive");
    require(p.l_f_h > 0.0, "LC filter: l_f must be positive");
    require(p.r_f_ohm > 0.0, "LC filter: r_f must be positive");
    require(p.c_f_f > 0.0, "LC filter: c_f must be positive");
}

void validate(const ReducedOrderLoadParams& p) {
    check_cpl_args(p.v_nom_v, p.eta, p.p_o_w);
    require(p.c_i_f > 0.0, "reduced-order load: c_i must be positive");
    require(p.lpf_cutoff_hz > 0.0, "reduced-order load: lpf cutoff must be positive");
}

void validate(const AvgInverterParams& p) {
    require(p.c_i_f > 0.0, "inverter: c_i must be positive");
    require(p.l_o_h > 0.0, "inverter: l_o must be positive");
    require(p.r_o_ohm >= 0.0, "inverter: r_o must be nonnegative");
    require(p.v_ac_ll_rms_v > 0.0, "inverter: ac voltage must be positive");
    require(p.grid_freq_hz > 0.0, "inverter: grid frequency must be positive");
    require(p.eta > 0.0 && p.eta <= 1.0, "inverter: efficiency must lie in (0, 1]");
    require(p.pi_kp_ohm >= 0.0 && p.pi_ki_ohm_per_s >= 0.0, "inverter: PI gains must be nonnegative");
    require(p.p_ref_w >= 0.0, "inverter: p_ref must be nonnegative");
}

void validate(const BoostParams& p) {
    require(p.l_h > 0.0, "boost: l must be positive");
    require(p.c_o_f > 0.0, "boost: c_o must be positive");
    require(p.r_l_ohm >= 0.0 && p.r_co_ohm >= 0.0, "boost: resistances must be nonnegative");
    require(p.v_in_v > 0.0, "boost: v_in must be positive");
    require(p.v_out_ref_v > p.v_in_v, "boost: v_out_ref must exceed v_in");
    require(p.d_max > 0.0 && p.d_max < 1.0, "boost: d_max must lie in (0, 1)");
    require(p.current_kp_per_a >= 0.0 && p.current_ki_per_as >= 0.0 && p.voltage_kp_a_per_v >= 0.0 &&
                p.voltage_ki_a_per_vs >= 0.0,
            "boost: controller gains must be nonnegative");
}

RationalTF reduced_order_impedance(const ReducedOrderLoadParams& p) {
    validate(p);
    const Real r = rcpl(p.v_nom_v, p.eta, p.p_o_w);
    Polynomial num(1), den(2);
    num << r;
    den << 1.0, r * p.c_i_f;
    return {num, den};
}

RationalTF lc_output_impedance(const LcFilterParams& p) {
    validate(p);
    Polynomial num(2), den(3);
    num << p.r_f_ohm, p.l_f_h;
    den << 1.0, p.r_f_ohm * p.c_f_f, p.l_f_h * p.c_f_f;
    return {num, den};
}

Real grid_vd(const AvgInverterParams& p) { return p.v_ac_ll_rms_v * std::sqrt(2.0 / 3.0); }

Real inverter_id_ref(const AvgInverterParams& p, Real p_ref_w) {
    const Real vd = grid_vd(p);
    const Real iq = -2.0 * p.q_ref_var / (3.0 * vd);
    // 1.5 (vd id + R (id^2 + iq^2)) = p_ref, positive root in stable form.
    const Real c = 2.0 * p_ref_w / 3.0 - p.r_o_ohm * iq * iq;
    const Real disc = vd * vd + 4.0 * p.r_o_ohm * c;
    if (disc < 0.0) throw Error(ErrorCode::DomainError, "inverter power reference not reachable");
    return 2.0 * c / (vd + std::sqrt(disc));
}

AvgInverterParams tune_inverter(AvgInverterParams p, Real current_bw_hz) {
    const Real w = hz_to_rad(current_bw_hz);
    p.pi_kp_ohm = p.l_o_h * w;
    p.pi_ki_ohm_per_s = p.r_o_ohm * w;
    return p;
}

} // namespace philab
