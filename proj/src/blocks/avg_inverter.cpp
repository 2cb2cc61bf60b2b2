#include <cmath>

#include "philab/blocks.hpp"

namespace philab {

namespace {

// Averaged 2L-3Ph inverter on a stiff grid, synchronous dq frame aligned
// with the grid voltage (v_gq = 0, angle known exactly).
//
// AC side:  L di_d/dt = v_cd - v_gd - R i_d + w L i_q
//           L di_q/dt = v_cq        - R i_q - w L i_d
// Control:  v_c = PI(i_ref - i) + v_g -/+ w L i_(q/d)   (decoupling)
//           |v_c| <= v_dc / sqrt(3), integrators frozen while saturated
// DC side:  i_dc = 1.5 (v_cd i_d + v_cq i_q) / (v_dc eta) + C_i dv_dc/dt
//
// The controller runs once per step on the sampled currents and the
// converter voltage is held over the step.
class AvgInverter final : public StateBlock {
public:
    explicit AvgInverter(const AvgInverterParams& p) : p_(p) {
        validate(p);
        vgd_ = grid_vd(p);
        w_ = hz_to_rad(p.grid_freq_hz);
        a_ << -p.r_o_ohm / p.l_o_h, w_, -w_, -p.r_o_ohm / p.l_o_h;
        set_power(p.p_ref_w);
    }

    std::string_view kind() const override { return "avg_inverter"; }
    std::span<const PortSpec> inputs() const override { return kIn; }
    std::span<const PortSpec> outputs() const override { return kOut; }

    void step(std::span<const Real> in, std::span<Real> out, Real dt) override { out[0] = step1(in[0], dt); }

    Real step1(Real v_dc, Real dt) override {
        if (dt != dt_) discretize(dt);

        const Real e_d = id_ref_ - i_[0];
        const Real e_q = iq_ref_ - i_[1];
        Real vcd = p_.pi_kp_ohm * e_d + x_[0] + vgd_ - w_ * p_.l_o_h * i_[1];
        Real vcq = p_.pi_kp_ohm * e_q + x_[1] + w_ * p_.l_o_h * i_[0];

        const Real limit = std::max(v_dc, 0.0) * kInvSqrt3;
        const Real mag = std::hypot(vcd, vcq);
        saturated_ = mag > limit;
        if (saturated_) {
            const Real scale = mag > 0.0 ? limit / mag : 0.0;
            vcd *= scale;
            vcq *= scale;
        } else {
            x_[0] += p_.pi_ki_ohm_per_s * e_d * dt;
            x_[1] += p_.pi_ki_ohm_per_s * e_q * dt;
        }

        const Eigen::Vector2d i_old = i_;
        i_ = ad_ * i_ + bd_ * Eigen::Vector2d(vcd - vgd_, vcq);

        const Eigen::Vector2d i_avg = 0.5 * (i_old + i_);
        const Real p_conv = 1.5 * (vcd * i_avg[0] + vcq * i_avg[1]);
        const Real i_stage = v_dc > kMinDcVoltage ? p_conv / (v_dc * p_.eta) : 0.0;

        i_cap_ = g_cap_ * (v_dc - v_prev_) - i_cap_;
        v_prev_ = v_dc;
        return i_stage + i_cap_;
    }

    void settle(std::span<const Real> in, std::span<Real> out) override {
        const Real v_dc = in[0];
        i_ << id_ref_, iq_ref_;
        x_ << p_.r_o_ohm * id_ref_, p_.r_o_ohm * iq_ref_;
        i_cap_ = 0.0;
        v_prev_ = v_dc;
        saturated_ = false;
        const Real vcd = vgd_ + p_.r_o_ohm * i_[0] - w_ * p_.l_o_h * i_[1];
        const Real vcq = p_.r_o_ohm * i_[1] + w_ * p_.l_o_h * i_[0];
        const Real p_conv = 1.5 * (vcd * i_[0] + vcq * i_[1]);
        out[0] = v_dc > kMinDcVoltage ? p_conv / (v_dc * p_.eta) : 0.0;
    }

    Vector state() const override { return Vector{{i_[0], i_[1], x_[0], x_[1], v_prev_, i_cap_}}; }
    void set_state(const Vector& x) override {
        i_ << x[0], x[1];
        x_ << x[2], x[3];
        v_prev_ = x[4];
        i_cap_ = x[5];
    }
    Eigen::Index state_size() const override { return 6; }

    void set_parameter(std::string_view name, Real value) override {
        if (name == "p_ref_w") set_power(value);
        else StateBlock::set_parameter(name, value);
    }

    bool saturated() const override { return saturated_; }

    Real settling_time_s() const override {
        // Closed current loop is first order at kp / L.
        return p_.pi_kp_ohm > 0.0 ? 5.0 * p_.l_o_h / p_.pi_kp_ohm : 0.01;
    }

    std::unique_ptr<StateBlock> clone() const override { return std::make_unique<AvgInverter>(*this); }

private:
    static constexpr Real kInvSqrt3 = 0.57735026918962576451;
    static constexpr Real kMinDcVoltage = 1e-3;

    void set_power(Real p_ref_w) {
        if (!(p_ref_w >= 0.0)) throw Error(ErrorCode::DomainError, "inverter p_ref must be nonnegative");
        p_.p_ref_w = p_ref_w;
        iq_ref_ = -2.0 * p_.q_ref_var / (3.0 * vgd_);
        id_ref_ = inverter_id_ref(p_, p_ref_w);
    }

    void discretize(Real dt) {
        dt_ = dt;
        const Eigen::Matrix2d lhs_inv = (Eigen::Matrix2d::Identity() - 0.5 * dt * a_).inverse();
        ad_ = lhs_inv * (Eigen::Matrix2d::Identity() + 0.5 * dt * a_);
        bd_ = lhs_inv * (dt / p_.l_o_h);
        g_cap_ = 2.0 * p_.c_i_f / dt;
    }

    static constexpr PortSpec kIn[] = {{"v_dc", "V"}};
    static constexpr PortSpec kOut[] = {{"i_dc", "A"}};
    AvgInverterParams p_;
    Real vgd_ = 0.0, w_ = 0.0;
    Real id_ref_ = 0.0, iq_ref_ = 0.0;
    Eigen::Matrix2d a_;
    Eigen::Matrix2d ad_ = Eigen::Matrix2d::Identity(), bd_ = Eigen::Matrix2d::Zero();
    Real dt_ = 0.0, g_cap_ = 0.0;
    Eigen::Vector2d i_ = Eigen::Vector2d::Zero();
    Eigen::Vector2d x_ = Eigen::Vector2d::Zero();
    Real v_prev_ = 0.0, i_cap_ = 0.0;
    bool saturated_ = false;
};

} // namespace

std::unique_ptr<StateBlock> make_avg_inverter(const AvgInverterParams& p) { return std::make_unique<AvgInverter>(p); }

} // namespace philab
