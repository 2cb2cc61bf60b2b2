#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "philab/scenario.hpp"

namespace philab {

struct TimingStats {
    std::size_t n_steps = 0;
    std::size_t n_repeats = 0;
    Real median_ns_per_step = 0.0;
    Real p95_ns_per_step = 0.0;
    /// Wall time of all timed repeats together.
    Real total_ns = 0.0;
    std::vector<Real> ns_per_step; ///< one entry per repeat
};

/// Untraced stepping cost of a scenario's engine. One untimed warm-up
/// repeat precedes the timed ones; every repeat starts from the same
/// warmed-up state.
TimingStats time_per_step(const Scenario& s, std::size_t n_steps, std::size_t n_repeats);

struct SpeedupReport {
    std::string model_a;
    std::string model_b;
    std::string n_loads;
    Real dt_s = 0.0;
    TimingStats a;
    TimingStats b;
    /// median_a / median_b
    Real ratio = 0.0;
};

/// ConfigMismatch unless dt and source agree.
SpeedupReport compare(const Scenario& a, const Scenario& b, std::size_t n_steps, std::size_t n_repeats);

/// "reduced_order", "avg_inverter", "mixed" or "none".
std::string load_model_name(const Scenario& s);

inline constexpr std::size_t kMinBenchSteps = 100000;
inline constexpr std::size_t kMinBenchRepeats = 5;

void write_kv(std::ostream& os, const SpeedupReport& r);
/// `model_a,model_b,n_loads,dt_s,median_a_ns,median_b_ns,ratio`
void write_csv_header(std::ostream& os);
void write_csv_row(std::ostream& os, const SpeedupReport& r);

} // namespace philab
