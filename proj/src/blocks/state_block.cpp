#include <cmath>
#include <string>

#include "philab/blocks.hpp"
#include "philab/format.hpp"

namespace philab {

void StateBlock::set_parameter(std::string_view name, Real) {
    throw Error(ErrorCode::ConfigError, std::string(kind()) + " has no parameter '" + std::string(name) + "'");
}

std::size_t StateBlock::input_index(std::string_view name) const {
    const auto ports = inputs();
    for (std::size_t i = 0; i < ports.size(); ++i) {
        if (ports[i].name == name) return i;
    }
    throw Error(ErrorCode::ConfigError, std::string(kind()) + " has no input port '" + std::string(name) + "'");
}

std::size_t StateBlock::output_index(std::string_view name) const {
    const auto ports = outputs();
    for (std::size_t i = 0; i < ports.size(); ++i) {
        if (ports[i].name == name) return i;
    }
    throw Error(ErrorCode::ConfigError, std::string(kind()) + " has no output port '" + std::string(name) + "'");
}

Real StateBlock::step1(Real in, Real dt) {
    Real out = 0.0;
    step(std::span<const Real>(&in, 1), std::span<Real>(&out, 1), dt);
    return out;
}

Real StateBlock::settle1(Real in) {
    Real out = 0.0;
    settle(std::span<const Real>(&in, 1), std::span<Real>(&out, 1));
    return out;
}

std::size_t delay_samples(Real delay_s, Real dt_s) {
    if (!(dt_s > 0.0)) throw Error(ErrorCode::ConfigError, "time step must be positive");
    if (!(delay_s >= 0.0)) throw Error(ErrorCode::ConfigError, "delay must be nonnegative");
    const Real ratio = delay_s / dt_s;
    const Real n = std::round(ratio);
    if (std::abs(ratio - n) > 1e-6 * std::max(1.0, std::abs(ratio))) {
        throw Error(ErrorCode::ConfigError, "delay " + format_real(delay_s) + " s is not an integer multiple of dt " +
                                                format_real(dt_s) + " s");
    }
    return static_cast<std::size_t>(n);
}

namespace {

class Resistor final : public StateBlock {
public:
    explicit Resistor(Real r) : r_(r) {
        if (!(r > 0.0)) throw Error(ErrorCode::DomainError, "resistance must be positive");
    }

    std::string_view kind() const override { return "resistor"; }
    std::span<const PortSpec> inputs() const override { return kIn; }
    std::span<const PortSpec> outputs() const override { return kOut; }

    void step(std::span<const Real> in, std::span<Real> out, Real) override { out[0] = in[0] / r_; }
    Real step1(Real v, Real) override { return v / r_; }
    void settle(std::span<const Real> in, std::span<Real> out) override { out[0] = in[0] / r_; }

    Vector state() const override { return Vector(0); }
    void set_state(const Vector&) override {}
    Eigen::Index state_size() const override { return 0; }
    std::unique_ptr<StateBlock> clone() const override { return std::make_unique<Resistor>(*this); }

private:
    static constexpr PortSpec kIn[] = {{"v", "V"}};
    static constexpr PortSpec kOut[] = {{"i", "A"}};
    Real r_;
};

} // namespace

std::unique_ptr<StateBlock> make_resistor(Real r_ohm) { return std::make_unique<Resistor>(r_ohm); }

} // namespace philab
