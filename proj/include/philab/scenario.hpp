#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "philab/blocks.hpp"

namespace philab {

struct PhilParams {
    Real tau1_s = 5e-6;
    Real tau2_s = 5e-6;
    /// +inf bypasses the interface filter.
    Real interface_cutoff_hz = 15e3;

    [[nodiscard]] bool bypass_filter() const { return interface_cutoff_hz == std::numeric_limits<Real>::infinity(); }
    bool operator==(const PhilParams&) const = default;
};

struct SolverSettings {
    Real dt_s = 1e-6;
    Real t_end_s = 0.2;

    /// floor(t_end / dt), tolerant to representation error in the ratio.
    [[nodiscard]] std::size_t steps() const;
    bool operator==(const SolverSettings&) const = default;
};

struct ScheduleEntry {
    Real t_s = 0.0;
    std::size_t load = 0;
    Real p_ref_w = 0.0;

    /// First step index at which the new power is in effect.
    [[nodiscard]] std::size_t step_index(Real dt_s) const;
    bool operator==(const ScheduleEntry&) const = default;
};

using SourceSpec = std::variant<LcFilterParams, BoostParams>;
using LoadSpec = std::variant<ReducedOrderLoadParams, AvgInverterParams>;

struct Scenario {
    std::string name;
    std::string description;
    SourceSpec source;
    std::vector<LoadSpec> loads;
    PhilParams phil;
    SolverSettings solver;
    std::vector<ScheduleEntry> schedule;

    bool operator==(const Scenario&) const = default;
};

/// ValidationError naming the first violated invariant. `require_load`
/// is relaxed only for source-only benchmark baselines.
void validate(const Scenario& s, bool require_load = true);

/// Regulated / open-circuit bus voltage of the source.
Real nominal_bus_voltage(const SourceSpec& src);
Real load_power(const LoadSpec& load);
Real load_eta(const LoadSpec& load);
Real load_ci(const LoadSpec& load);
LoadSpec with_load_power(LoadSpec load, Real p_w);

/// Load powers after every schedule entry with t_s <= at_time_s.
std::vector<Real> load_powers_at(const Scenario& s, Real at_time_s);

enum class LoadModel { Reduced, Averaged };

/// Replace every load by the other model with matching v_nom, eta, C_i, p_o.
/// Parameters the target model has and the source model lacks take their
/// defaults.
Scenario with_load_model(Scenario s, LoadModel model);

std::unique_ptr<StateBlock> make_source(const SourceSpec& src);
std::unique_ptr<StateBlock> make_load(const LoadSpec& load);

} // namespace philab
