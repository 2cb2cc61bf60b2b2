#include "philab/blocks.hpp"

namespace philab {

namespace {

// Steady-state / small-signal split of the terminal voltage:
//   v_bar = LPF(v),  v_hat = v - v_bar
//   i = v_bar / R_load + v_hat / R_cpl + C_i d(v_hat)/dt
// The capacitor term uses the trapezoidal companion, never a raw
// difference quotient. R_load and R_cpl follow the scheduled power at the
// nominal bus voltage, not the instantaneous one.
class ReducedOrderLoad final : public StateBlock {
public:
    explicit ReducedOrderLoad(const ReducedOrderLoadParams& p) : p_(p) {
        validate(p);
        wc_ = hz_to_rad(p.lpf_cutoff_hz);
        update_resistances();
    }

    std::string_view kind() const override { return "reduced_order_load"; }
    std::span<const PortSpec> inputs() const override { return kIn; }
    std::span<const PortSpec> outputs() const override { return kOut; }

    void step(std::span<const Real> in, std::span<Real> out, Real dt) override { out[0] = step1(in[0], dt); }

    Real step1(Real v, Real dt) override {
        if (dt != dt_) {
            dt_ = dt;
            const Real a = 0.5 * wc_ * dt;
            k_hold_ = (1.0 - a) / (1.0 + a);
            k_in_ = a / (1.0 + a);
            g_cap_ = 2.0 * p_.c_i_f / dt;
        }
        const Real v_hat_prev = v_prev_ - v_bar_;
        v_bar_ = k_hold_ * v_bar_ + k_in_ * (v + v_prev_);
        const Real v_hat = v - v_bar_;
        i_cap_ = g_cap_ * (v_hat - v_hat_prev) - i_cap_;
        v_prev_ = v;
        return v_bar_ * g_load_ + v_hat * g_cpl_ + i_cap_;
    }

    void settle(std::span<const Real> in, std::span<Real> out) override {
        v_prev_ = v_bar_ = in[0];
        i_cap_ = 0.0;
        out[0] = v_bar_ * g_load_;
    }

    Vector state() const override { return Vector{{v_prev_, v_bar_, i_cap_}}; }
    void set_state(const Vector& x) override {
        v_prev_ = x[0];
        v_bar_ = x[1];
        i_cap_ = x[2];
    }
    Eigen::Index state_size() const override { return 3; }

    void set_parameter(std::string_view name, Real value) override {
        if (name != "p_ref_w" && name != "p_o_w") {
            StateBlock::set_parameter(name, value);
            return;
        }
        p_.p_o_w = value;
        update_resistances();
    }

    Real settling_time_s() const override { return 5.0 / wc_; }
    std::unique_ptr<StateBlock> clone() const override { return std::make_unique<ReducedOrderLoad>(*this); }

private:
    void update_resistances() {
        g_load_ = 1.0 / rload(p_.v_nom_v, p_.eta, p_.p_o_w);
        g_cpl_ = 1.0 / rcpl(p_.v_nom_v, p_.eta, p_.p_o_w);
    }

    static constexpr PortSpec kIn[] = {{"v_bus", "V"}};
    static constexpr PortSpec kOut[] = {{"i_bus", "A"}};
    ReducedOrderLoadParams p_;
    Real wc_ = 0.0;
    Real g_load_ = 0.0;
    Real g_cpl_ = 0.0;
    Real dt_ = 0.0;
    Real k_hold_ = 1.0, k_in_ = 0.0, g_cap_ = 0.0;
    Real v_prev_ = 0.0, v_bar_ = 0.0, i_cap_ = 0.0;
};

} // namespace

std::unique_ptr<StateBlock> make_reduced_order_load(const ReducedOrderLoadParams& p) {
    return std::make_unique<ReducedOrderLoad>(p);
}

} // namespace philab
