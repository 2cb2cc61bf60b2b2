#include <algorithm>
#include <cmath>

#include "philab/blocks.hpp"

namespace philab {

namespace {

// Averaged boost, u = 1 - d:
//   L di/dt   = v_in - r_L i - u v_o
//   C dv_c/dt = u i - i_load
//   v_o       = v_c + r_co (u i - i_load)
// Control, cascaded PI with constant duty feedforward d_ff = 1 - v_in / v_ref:
//   i_ref = kpv (v_ref - v_o) + x_v
//   d     = d_ff + kpi (i_ref - i) + x_i,  clamped to [0, d_max]
// Both integrators freeze while the duty cycle is clamped.
class Boost final : public StateBlock {
public:
    explicit Boost(const BoostParams& p) : p_(p) {
        validate(p);
        d_ff_ = 1.0 - p.v_in_v / p.v_out_ref_v;
        v_o_ = p.v_out_ref_v;
        v_c_ = p.v_out_ref_v;
    }

    std::string_view kind() const override { return "boost"; }
    std::span<const PortSpec> inputs() const override { return kIn; }
    std::span<const PortSpec> outputs() const override { return kOut; }

    void step(std::span<const Real> in, std::span<Real> out, Real dt) override { out[0] = step1(in[0], dt); }

    Real step1(Real i_load, Real dt) override {
        const Real e_v = p_.v_out_ref_v - v_o_;
        const Real i_ref = p_.voltage_kp_a_per_v * e_v + x_v_;
        const Real e_i = i_ref - i_l_;
        Real d = d_ff_ + p_.current_kp_per_a * e_i + x_i_;
        saturated_ = d < 0.0 || d > p_.d_max;
        if (saturated_) {
            d = std::clamp(d, 0.0, p_.d_max);
        } else {
            x_i_ += p_.current_ki_per_as * e_i * dt;
            x_v_ += p_.voltage_ki_a_per_vs * e_v * dt;
        }
        const Real u = 1.0 - d;

        Eigen::Matrix2d a;
        a << -(p_.r_l_ohm + u * u * p_.r_co_ohm) / p_.l_h, -u / p_.l_h, u / p_.c_o_f, 0.0;
        const Real i_mid = 0.5 * (i_load_prev_ + i_load);
        const Eigen::Vector2d f((p_.v_in_v + u * p_.r_co_ohm * i_mid) / p_.l_h, -i_mid / p_.c_o_f);
        const Eigen::Vector2d x(i_l_, v_c_);
        const Eigen::Matrix2d lhs = Eigen::Matrix2d::Identity() - 0.5 * dt * a;
        const Eigen::Vector2d xn = lhs.inverse() * (x + 0.5 * dt * (a * x) + dt * f);

        i_l_ = xn[0];
        v_c_ = xn[1];
        i_load_prev_ = i_load;
        v_o_ = v_c_ + p_.r_co_ohm * (u * i_l_ - i_load);
        return v_o_;
    }

    void settle(std::span<const Real> in, std::span<Real> out) override {
        const Real i_load = in[0];
        const Real v_o = p_.v_out_ref_v;
        const Real disc = p_.v_in_v * p_.v_in_v - 4.0 * p_.r_l_ohm * v_o * i_load;
        if (disc < 0.0) throw Error(ErrorCode::DomainError, "boost cannot deliver the requested load current");
        i_l_ = 2.0 * v_o * i_load / (p_.v_in_v + std::sqrt(disc));
        const Real u = (p_.v_in_v - p_.r_l_ohm * i_l_) / v_o;
        x_i_ = (1.0 - u) - d_ff_;
        x_v_ = i_l_;
        v_c_ = v_o;
        v_o_ = v_o;
        i_load_prev_ = i_load;
        saturated_ = false;
        out[0] = v_o;
    }

    Vector state() const override { return Vector{{i_l_, v_c_, x_i_, x_v_, v_o_, i_load_prev_}}; }
    void set_state(const Vector& x) override {
        i_l_ = x[0];
        v_c_ = x[1];
        x_i_ = x[2];
        x_v_ = x[3];
        v_o_ = x[4];
        i_load_prev_ = x[5];
    }
    Eigen::Index state_size() const override { return 6; }

    bool saturated() const override { return saturated_; }

    Real settling_time_s() const override {
        // Slowest designed mode sits near 400 1/s.
        return p_.voltage_ki_a_per_vs > 0.0 ? 5.0 * p_.voltage_kp_a_per_v / p_.voltage_ki_a_per_vs + 0.01 : 0.02;
    }

    std::unique_ptr<StateBlock> clone() const override { return std::make_unique<Boost>(*this); }

private:
    static constexpr PortSpec kIn[] = {{"i_load", "A"}};
    static constexpr PortSpec kOut[] = {{"v_bus", "V"}};
    BoostParams p_;
    Real d_ff_ = 0.0;
    Real i_l_ = 0.0, v_c_ = 0.0, x_i_ = 0.0, x_v_ = 0.0, v_o_ = 0.0, i_load_prev_ = 0.0;
    bool saturated_ = false;
};

} // namespace

std::unique_ptr<StateBlock> make_boost(const BoostParams& p) { return std::make_unique<Boost>(p); }

} // namespace philab
