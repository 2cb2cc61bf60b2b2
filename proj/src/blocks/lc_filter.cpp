#include "philab/blocks.hpp"

namespace philab {

namespace {

// x = [i_L, v_C], u = [V_s, i_load]
//   L di/dt = V_s - R i - v_C
//   C dv/dt = i - i_load
class LcFilter final : public StateBlock {
public:
    explicit LcFilter(const LcFilterParams& p) : p_(p) {
        validate(p);
        a_ << -p.r_f_ohm / p.l_f_h, -1.0 / p.l_f_h, 1.0 / p.c_f_f, 0.0;
        b_ << 1.0 / p.l_f_h, 0.0, 0.0, -1.0 / p.c_f_f;
        u_prev_ << p.v_source_v, 0.0;
    }

    std::string_view kind() const override { return "lc_filter"; }
    std::span<const PortSpec> inputs() const override { return kIn; }
    std::span<const PortSpec> outputs() const override { return kOut; }

    void step(std::span<const Real> in, std::span<Real> out, Real dt) override { out[0] = step1(in[0], dt); }

    Real step1(Real i_load, Real dt) override {
        if (dt != dt_) discretize(dt);
        const Eigen::Vector2d u_now(p_.v_source_v, i_load);
        x_ = ad_ * x_ + bd_ * (u_prev_ + u_now);
        u_prev_ = u_now;
        return x_[1];
    }

    void settle(std::span<const Real> in, std::span<Real> out) override {
        x_ << in[0], p_.v_source_v - p_.r_f_ohm * in[0];
        u_prev_ << p_.v_source_v, in[0];
        out[0] = x_[1];
    }

    Vector state() const override { return Vector{{x_[0], x_[1], u_prev_[1]}}; }
    void set_state(const Vector& x) override {
        x_ << x[0], x[1];
        u_prev_ << p_.v_source_v, x[2];
    }
    Eigen::Index state_size() const override { return 3; }
    std::unique_ptr<StateBlock> clone() const override { return std::make_unique<LcFilter>(*this); }

private:
    void discretize(Real dt) {
        dt_ = dt;
        const Eigen::Matrix2d lhs = Eigen::Matrix2d::Identity() - 0.5 * dt * a_;
        const Eigen::Matrix2d lhs_inv = lhs.inverse();
        ad_ = lhs_inv * (Eigen::Matrix2d::Identity() + 0.5 * dt * a_);
        bd_ = lhs_inv * (0.5 * dt * b_);
    }

    static constexpr PortSpec kIn[] = {{"i_load", "A"}};
    static constexpr PortSpec kOut[] = {{"v_bus", "V"}};
    LcFilterParams p_;
    Eigen::Matrix2d a_, b_;
    Eigen::Matrix2d ad_ = Eigen::Matrix2d::Identity(), bd_ = Eigen::Matrix2d::Zero();
    Real dt_ = 0.0;
    Eigen::Vector2d x_ = Eigen::Vector2d::Zero();
    Eigen::Vector2d u_prev_ = Eigen::Vector2d::Zero();
};

} // namespace

std::unique_ptr<StateBlock> make_lc_filter(const LcFilterParams& p) { return std::make_unique<LcFilter>(p); }

} // namespace philab
