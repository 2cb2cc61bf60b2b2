#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "philab/freqdomain.hpp"
#include "philab/scenario.hpp"

namespace philab {

enum TraceFlag : std::uint8_t {
    kFlagDiv = 1u << 0,
    kFlagSat = 1u << 1,
};

/// Column-major simulation record, one row per step (row 0 = initial
/// conditions).
struct Trace {
    Real dt_s = 0.0;
    std::vector<Real> t_s;
    std::vector<Real> v_dc_bus_v;
    std::vector<Real> i_bus_a;
    std::vector<std::vector<Real>> i_load_a; ///< [load][row]
    std::vector<std::vector<Real>> p_ref_w;  ///< [load][row]
    std::vector<std::uint8_t> flags;
    bool diverged = false;

    Trace() = default;
    Trace(Real dt, std::size_t n_loads, std::size_t reserve_rows);

    [[nodiscard]] std::size_t rows() const { return t_s.size(); }
    [[nodiscard]] std::size_t n_loads() const { return i_load_a.size(); }
    bool operator==(const Trace&) const = default;
};

enum class TraceClass { Stable, Oscillating, Growing, Diverged };
std::string_view to_string(TraceClass c);
inline bool is_unstable(TraceClass c) { return c != TraceClass::Stable; }

struct ClassifyOptions {
    /// Settled band around nominal, fraction of v_nom.
    Real band = 0.05;
    /// Final window peak-to-peak below this fraction of v_nom counts as settled.
    Real settled_ripple = 0.01;
    /// Final-window length, fraction of the trace.
    Real final_fraction = 0.1;
    int growth_cycles = 20;
    /// Extremum detection hysteresis, fraction of v_nom.
    Real hysteresis = 1e-4;
};

/// Peak-to-peak bus-voltage amplitude of each detected oscillation cycle
/// from row `from` on.
std::vector<Real> cycle_amplitudes(const Trace& tr, Real hysteresis_v, std::size_t from = 0);
/// Longest run of strictly increasing consecutive cycle amplitudes.
int longest_growth_run(const std::vector<Real>& amplitudes);
TraceClass classify(const Trace& tr, Real v_nom, const ClassifyOptions& opts = {});

/// The ITM loop of a scenario, stepped once per dt in the fixed order
///   tau1 -> source -> tau2 -> F -> loads -> sum.
/// Holds its full state; copies are independent.
class Engine {
public:
    explicit Engine(const Scenario& s);
    Engine(const Engine& other);
    Engine& operator=(const Engine& other);
    Engine(Engine&&) noexcept = default;
    Engine& operator=(Engine&&) noexcept = default;
    ~Engine();

    /// Jump to the directly-coupled DC operating point at the current load
    /// powers and fill the delay lines with it.
    void warm_up();

    /// Full trace from the current state (warm_up() runs on construction;
    /// pass a seed to start elsewhere). Rewinds the schedule to t = 0.
    Trace run();
    Trace run(const Vector& seed_state);

    /// Untraced stepping from the current state and step counter; returns
    /// the steps actually taken (fewer on divergence).
    std::size_t advance(std::size_t n_steps);

    /// Back to the warmed-up state at t = 0.
    void reset();

    [[nodiscard]] Vector state() const;
    void set_state(const Vector& x);

    [[nodiscard]] const Scenario& scenario() const { return scenario_; }
    [[nodiscard]] Real v_nom() const { return v_nom_; }
    [[nodiscard]] Real bus_voltage() const { return v_bus_; }
    [[nodiscard]] Real bus_current() const { return i_meas_; }
    [[nodiscard]] const StateBlock& source() const { return *source_; }
    [[nodiscard]] const StateBlock& load(std::size_t k) const { return *loads_[k]; }
    [[nodiscard]] std::size_t n_loads() const { return loads_.size(); }

private:
    void step();
    void rewind();
    void apply_schedule(std::size_t k);
    [[nodiscard]] bool diverged() const;
    void record(Trace& tr, std::size_t k, Real t, std::uint8_t flags) const;

    Scenario scenario_;
    Real v_nom_ = 0.0;
    Real dt_ = 0.0;
    std::vector<ScheduleEntry> schedule_;
    std::size_t next_event_ = 0;
    std::size_t k_ = 0;
    std::vector<Real> p_ref_;

    std::unique_ptr<StateBlock> source_;
    std::unique_ptr<StateBlock> delay1_;
    std::unique_ptr<StateBlock> delay2_;
    std::unique_ptr<StateBlock> filter_; ///< null when bypassed
    std::vector<std::unique_ptr<StateBlock>> loads_;
    std::vector<Real> i_loads_;
    Real v_bus_ = 0.0;
    Real v_load_ = 0.0;
    Real i_meas_ = 0.0;
    Vector initial_state_;
};

Engine build_phil_loop(const Scenario& s);

// ---------------------------------------------------------------------------
// Perturbation measurement
// ---------------------------------------------------------------------------

using BlockFactory = std::function<std::unique_ptr<StateBlock>()>;

struct MeasureOptions {
    Real dt_s = 1e-6;
    /// Injection amplitude; 0 selects 1% of the bias.
    Real amplitude = 0.0;
    Real settle_cycles = 20.0;
    /// Minimum samples per correlation window.
    std::size_t min_window_samples = 2000;
    /// Relative cycle-to-cycle phasor change tolerated after settling.
    Real tolerance = 0.01;
    /// Worker threads; 0 = hardware concurrency.
    unsigned threads = 0;
};

/// Drive the block's voltage port with v_dc + a sin(2 pi f t) and return
/// Z = V/I at each frequency (frequencies snapped so the correlation window
/// holds an integer number of cycles). `p_ref_w`, when given, is applied
/// through set_parameter before biasing.
FreqResponse measure_input_impedance(const BlockFactory& factory, Real v_dc_v, std::optional<Real> p_ref_w,
                                     const std::vector<Real>& f_hz, const MeasureOptions& opts = {});

/// Source-side dual: drive the block's current port with
/// i_dc + a sin(2 pi f t) and return Z_out = -V/I (so that v = V0 - Z_out i).
FreqResponse measure_output_impedance(const BlockFactory& factory, Real i_dc_a, const std::vector<Real>& f_hz,
                                      const MeasureOptions& opts = {});

} // namespace philab
