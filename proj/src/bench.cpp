#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>

#ifdef __linux__
#include <sched.h>
#endif

#include "philab/bench.hpp"
#include "philab/format.hpp"
#include "philab/phil_engine.hpp"

namespace philab {

namespace {

// Keeps the timed thread on whichever core it is on now; the previous
// mask comes back on scope exit so threads spawned later are unaffected.
class CpuPin {
public:
    CpuPin() {
#ifdef __linux__
        CPU_ZERO(&saved_);
        if (sched_getaffinity(0, sizeof(saved_), &saved_) != 0) return;
        const int cpu = sched_getcpu();
        if (cpu < 0) return;
        cpu_set_t set;
        CPU_ZERO(&set);
        CPU_SET(cpu, &set);
        pinned_ = sched_setaffinity(0, sizeof(set), &set) == 0;
#endif
    }
    ~CpuPin() {
#ifdef __linux__
        if (pinned_) sched_setaffinity(0, sizeof(saved_), &saved_);
#endif
    }
    CpuPin(const CpuPin&) = delete;
    CpuPin& operator=(const CpuPin&) = delete;

private:
#ifdef __linux__
    cpu_set_t saved_;
    bool pinned_ = false;
#endif
};

Real quantile(std::vector<Real> v, Real q) {
    std::sort(v.begin(), v.end());
    // Nearest-rank.
    const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<Real>(v.size())));
    return v[std::clamp<std::size_t>(rank, 1, v.size()) - 1];
}

Real median(std::vector<Real> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace

TimingStats time_per_step(const Scenario& s, std::size_t n_steps, std::size_t n_repeats) {
    if (n_steps < kMinBenchSteps) throw Error(ErrorCode::ConfigError, "bench needs at least 1e5 steps");
    if (n_repeats < kMinBenchRepeats) throw Error(ErrorCode::ConfigError, "bench needs at least 5 repeats");
    validate(s, false);
    const CpuPin pin;

    Engine engine(s);
    engine.advance(n_steps);

    TimingStats st;
    st.n_steps = n_steps;
    st.n_repeats = n_repeats;
    using clock = std::chrono::steady_clock;
    for (std::size_t r = 0; r < n_repeats; ++r) {
        engine.reset();
        const auto t0 = clock::now();
        const std::size_t done = engine.advance(n_steps);
        const auto t1 = clock::now();
        const Real ns = std::chrono::duration<Real, std::nano>(t1 - t0).count();
        st.total_ns += ns;
        st.ns_per_step.push_back(ns / static_cast<Real>(std::max<std::size_t>(done, 1)));
    }
    st.median_ns_per_step = median(st.ns_per_step);
    st.p95_ns_per_step = quantile(st.ns_per_step, 0.95);
    return st;
}

std::string load_model_name(const Scenario& s) {
    if (s.loads.empty()) return "none";
    const bool first_reduced = std::holds_alternative<ReducedOrderLoadParams>(s.loads.front());
    for (const auto& l : s.loads) {
        if (std::holds_alternative<ReducedOrderLoadParams>(l) != first_reduced) return "mixed";
    }
    return first_reduced ? "reduced_order" : "avg_inverter";
}

SpeedupReport compare(const Scenario& a, const Scenario& b, std::size_t n_steps, std::size_t n_repeats) {
    if (a.solver.dt_s != b.solver.dt_s) throw Error(ErrorCode::ConfigMismatch, "scenarios use different dt");
    if (!(a.source == b.source)) throw Error(ErrorCode::ConfigMismatch, "scenarios use different sources");
    SpeedupReport r;
    r.model_a = load_model_name(a);
    r.model_b = load_model_name(b);
    r.n_loads = a.loads.size() == b.loads.size()
                    ? std::to_string(a.loads.size())
                    : std::to_string(a.loads.size()) + "/" + std::to_string(b.loads.size());
    r.dt_s = a.solver.dt_s;
    r.a = time_per_step(a, n_steps, n_repeats);
    r.b = time_per_step(b, n_steps, n_repeats);
    r.ratio = r.a.median_ns_per_step / r.b.median_ns_per_step;
    return r;
}

void write_kv(std::ostream& os, const SpeedupReport& r) {
    os << "model_a: " << r.model_a << '\n'
       << "model_b: " << r.model_b << '\n'
       << "n_loads: " << r.n_loads << '\n'
       << "dt_s: " << format_real(r.dt_s) << '\n'
       << "n_steps: " << r.a.n_steps << '\n'
       << "n_repeats: " << r.a.n_repeats << '\n'
       << "median_a_ns: " << format_real(r.a.median_ns_per_step) << '\n'
       << "p95_a_ns: " << format_real(r.a.p95_ns_per_step) << '\n'
       << "median_b_ns: " << format_real(r.b.median_ns_per_step) << '\n'
       << "p95_b_ns: " << format_real(r.b.p95_ns_per_step) << '\n'
       << "ratio: " << format_real(r.ratio) << '\n';
}

void write_csv_header(std::ostream& os) { os << "model_a,model_b,n_loads,dt_s,median_a_ns,median_b_ns,ratio\n"; }

void write_csv_row(std::ostream& os, const SpeedupReport& r) {
    os << r.model_a << ',' << r.model_b << ',' << r.n_loads << ',' << format_real(r.dt_s) << ','
       << format_real(r.a.median_ns_per_step) << ',' << format_real(r.b.median_ns_per_step) << ','
       << format_real(r.ratio) << '\n';
}

} // namespace philab
