#include <cmath>
#include <vector>

#include "philab/blocks.hpp"

namespace philab {

namespace {

/// y' = w_c (u - y), trapezoidal.
class FirstOrderLpf final : public StateBlock {
public:
    explicit FirstOrderLpf(Real cutoff_hz) : wc_(hz_to_rad(cutoff_hz)) {
        if (!(cutoff_hz > 0.0)) throw Error(ErrorCode::DomainError, "low-pass cutoff must be > 0");
    }

    std::string_view kind() const override { return "first_order_lpf"; }
    std::span<const PortSpec> inputs() const override { return kIn; }
    std::span<const PortSpec> outputs() const override { return kOut; }

    void step(std::span<const Real> in, std::span<Real> out, Real dt) override { out[0] = step1(in[0], dt); }

    Real step1(Real u, Real dt) override {
        if (dt != dt_) {
            dt_ = dt;
            const Real a = 0.5 * wc_ * dt;
            k_hold_ = (1.0 - a) / (1.0 + a);
            k_in_ = a / (1.0 + a);
        }
        y_ = k_hold_ * y_ + k_in_ * (u + u_prev_);
        u_prev_ = u;
        return y_;
    }

    void settle(std::span<const Real> in, std::span<Real> out) override {
        y_ = u_prev_ = in[0];
        out[0] = y_;
    }

    Vector state() const override { return Vector{{y_, u_prev_}}; }
    void set_state(const Vector& x) override {
        y_ = x[0];
        u_prev_ = x[1];
    }
    Eigen::Index state_size() const override { return 2; }
    Real settling_time_s() const override { return 5.0 / wc_; }
    std::unique_ptr<StateBlock> clone() const override { return std::make_unique<FirstOrderLpf>(*this); }

private:
    static constexpr PortSpec kIn[] = {{"u", "-"}};
    static constexpr PortSpec kOut[] = {{"y", "-"}};
    Real wc_;
    Real dt_ = 0.0;
    Real k_hold_ = 1.0;
    Real k_in_ = 0.0;
    Real y_ = 0.0;
    Real u_prev_ = 0.0;
};

/// Ring buffer; y[n] = u[n - N].
class DelayLine final : public StateBlock {
public:
    DelayLine(std::size_t n, Real dt) : buf_(n, 0.0), dt_(dt) {}

    std::string_view kind() const override { return "delay_line"; }
    std::span<const PortSpec> inputs() const override { return kIn; }
    std::span<const PortSpec> outputs() const override { return kOut; }

    void step(std::span<const Real> in, std::span<Real> out, Real dt) override { out[0] = step1(in[0], dt); }

    Real step1(Real u, Real dt) override {
        if (dt != dt_ && std::abs(dt - dt_) > 1e-9 * dt_) {
            throw Error(ErrorCode::ConfigError, "delay line stepped with a foreign dt");
        }
        if (buf_.empty()) return u;
        const Real y = buf_[head_];
        buf_[head_] = u;
        head_ = (head_ + 1 == buf_.size()) ? 0 : head_ + 1;
        return y;
    }

    void settle(std::span<const Real> in, std::span<Real> out) override {
        std::fill(buf_.begin(), buf_.end(), in[0]);
        head_ = 0;
        out[0] = in[0];
    }

    /// Oldest sample first.
    Vector state() const override {
        Vector x(static_cast<Eigen::Index>(buf_.size()));
        for (std::size_t k = 0; k < buf_.size(); ++k) x[static_cast<Eigen::Index>(k)] = buf_[(head_ + k) % buf_.size()];
        return x;
    }
    void set_state(const Vector& x) override {
        for (std::size_t k = 0; k < buf_.size(); ++k) buf_[k] = x[static_cast<Eigen::Index>(k)];
        head_ = 0;
    }
    Eigen::Index state_size() const override { return static_cast<Eigen::Index>(buf_.size()); }
    std::unique_ptr<StateBlock> clone() const override { return std::make_unique<DelayLine>(*this); }

private:
    static constexpr PortSpec kIn[] = {{"in", "-"}};
    static constexpr PortSpec kOut[] = {{"out", "-"}};
    std::vector<Real> buf_;
    std::size_t head_ = 0;
    Real dt_;
};

} // namespace

std::unique_ptr<StateBlock> make_first_order_lpf(Real cutoff_hz) { return std::make_unique<FirstOrderLpf>(cutoff_hz); }

std::unique_ptr<StateBlock> make_delay_line(Real delay_s, Real dt_s) {
    return std::make_unique<DelayLine>(delay_samples(delay_s, dt_s), dt_s);
}

} // namespace philab
