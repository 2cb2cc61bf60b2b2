#pragma once

#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "philab/freqdomain.hpp"
#include "philab/types.hpp"

namespace philab {

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

struct LcFilterParams {
    Real v_source_v = 680.0;
    Real l_f_h = 100e-6;
    Real r_f_ohm = 0.1;
    Real c_f_f = 0.1e-3;

    bool operator==(const LcFilterParams&) const = default;
};

struct ReducedOrderLoadParams {
    Real v_nom_v = 680.0;
    Real eta = 1.0;
    Real p_o_w = 40e3;
    Real c_i_f = 1e-6;
    Real lpf_cutoff_hz = 5.0;

    bool operator==(const ReducedOrderLoadParams&) const = default;
};

/// Averaged two-level three-phase inverter with dq current control.
struct AvgInverterParams {
    Real c_i_f = 1e-6;
    Real l_o_h = 510e-6;
    Real r_o_ohm = 0.07;
    Real v_ac_ll_rms_v = 380.0;
    Real grid_freq_hz = 50.0;
    Real eta = 1.0;
    Real pi_kp_ohm = 510e-6 * kTwoPi * 1000.0;    // L_o * w_bw
    Real pi_ki_ohm_per_s = 0.07 * kTwoPi * 1000.0; // R_o * w_bw
    Real p_ref_w = 40e3;
    Real q_ref_var = 0.0;

    bool operator==(const AvgInverterParams&) const = default;
};

/// Averaged boost converter with cascaded inductor-current / output-voltage
/// PI control. Default gains: 500 Hz current loop, voltage loop with
/// well-damped low-frequency modes for the Table-II power stage at 400 V in.
struct BoostParams {
    Real l_h = 50e-6;
    Real r_l_ohm = 1e-9;
    Real c_o_f = 47e-6;
    Real r_co_ohm = 10e-3;
    Real v_in_v = 400.0;
    Real v_out_ref_v = 680.0;
    Real current_kp_per_a = kTwoPi * 500.0 * 50e-6 / 680.0;
    Real current_ki_per_as = current_kp_per_a * kTwoPi * 500.0 / 10.0;
    Real voltage_kp_a_per_v = 0.1;
    Real voltage_ki_a_per_vs = 3000.0;
    Real d_max = 0.95;
    /// Metadata only; the averaged model does not switch.
    Real switching_frequency_hz = 200e3;

    bool operator==(const BoostParams&) const = default;
};

/// k_p = L_o w_bw, k_i = R_o w_bw.
AvgInverterParams tune_inverter(AvgInverterParams p, Real current_bw_hz);

void validate(const LcFilterParams& p);
void validate(const ReducedOrderLoadParams& p);
void validate(const AvgInverterParams& p);
void validate(const BoostParams& p);

// ---------------------------------------------------------------------------
// Closed forms
// ---------------------------------------------------------------------------

/// Small-signal input resistance of a constant-power load, -V^2 eta / P.
Real rcpl(Real v_i, Real eta, Real p_o);
/// Steady-state load resistance, +V^2 eta / P.
Real rload(Real v_dcbus, Real eta, Real p_o);

/// R_cpl / (1 + R_cpl C_i s)
RationalTF reduced_order_impedance(const ReducedOrderLoadParams& p);
/// (R_f + s L_f) / (1 + s R_f C_f + s^2 L_f C_f)
RationalTF lc_output_impedance(const LcFilterParams& p);

/// Peak line-to-neutral grid voltage (the d-axis grid voltage).
Real grid_vd(const AvgInverterParams& p);
/// d-axis current reference that makes the converter-terminal active power
/// equal p_ref (output-filter loss included).
Real inverter_id_ref(const AvgInverterParams& p, Real p_ref_w);

// ---------------------------------------------------------------------------
// StateBlock
// ---------------------------------------------------------------------------

struct PortSpec {
    std::string_view name;
    std::string_view unit;
};

/// A discretized continuous-time subsystem. `step` advances by dt given the
/// port inputs at the end of the step and writes the outputs at that
/// instant. Deterministic; state dimension fixed at construction.
class StateBlock {
public:
    virtual ~StateBlock() = default;

    [[nodiscard]] virtual std::string_view kind() const = 0;
    [[nodiscard]] virtual std::span<const PortSpec> inputs() const = 0;
    [[nodiscard]] virtual std::span<const PortSpec> outputs() const = 0;

    virtual void step(std::span<const Real> in, std::span<Real> out, Real dt) = 0;

    /// Jump to the equilibrium reached under constant inputs `in` and
    /// write the corresponding outputs.
    virtual void settle(std::span<const Real> in, std::span<Real> out) = 0;

    [[nodiscard]] virtual Vector state() const = 0;
    virtual void set_state(const Vector& x) = 0;
    [[nodiscard]] virtual Eigen::Index state_size() const = 0;

    /// Schedulable scalar parameters (e.g. `p_ref_w`). Unknown names throw.
    virtual void set_parameter(std::string_view name, Real value);

    /// True when the last step hit an actuator limit.
    [[nodiscard]] virtual bool saturated() const { return false; }

    /// Time for internal transients to die out after a disturbance; used to
    /// size settling horizons in impedance measurement.
    [[nodiscard]] virtual Real settling_time_s() const { return 0.0; }

    [[nodiscard]] virtual std::unique_ptr<StateBlock> clone() const = 0;

    [[nodiscard]] std::size_t input_index(std::string_view name) const;
    [[nodiscard]] std::size_t output_index(std::string_view name) const;

    /// Single-port step without the span plumbing; every bundled block is
    /// single-port and overrides this as its primary update.
    virtual Real step1(Real in, Real dt);
    Real settle1(Real in);
};

std::unique_ptr<StateBlock> make_first_order_lpf(Real cutoff_hz);
/// Integer-sample delay line; ConfigError if delay_s / dt_s is not an integer.
std::unique_ptr<StateBlock> make_delay_line(Real delay_s, Real dt_s);
std::unique_ptr<StateBlock> make_lc_filter(const LcFilterParams& p);
std::unique_ptr<StateBlock> make_reduced_order_load(const ReducedOrderLoadParams& p);
std::unique_ptr<StateBlock> make_avg_inverter(const AvgInverterParams& p);
std::unique_ptr<StateBlock> make_boost(const BoostParams& p);
/// Pure resistor, input `v` volts, output `i` amps. Test fixture block.
std::unique_ptr<StateBlock> make_resistor(Real r_ohm);

/// Number of samples a delay spans; ConfigError on a non-integer ratio.
std::size_t delay_samples(Real delay_s, Real dt_s);

} // namespace philab
