#include <algorithm>
#include <cmath>

#include "philab/phil_engine.hpp"

namespace philab {

Trace::Trace(Real dt, std::size_t n_loads, std::size_t reserve_rows)
    : dt_s(dt), i_load_a(n_loads), p_ref_w(n_loads) {
    t_s.reserve(reserve_rows);
    v_dc_bus_v.reserve(reserve_rows);
    i_bus_a.reserve(reserve_rows);
    flags.reserve(reserve_rows);
    for (auto& c : i_load_a) c.reserve(reserve_rows);
    for (auto& c : p_ref_w) c.reserve(reserve_rows);
}

std::string_view to_string(TraceClass c) {
    switch (c) {
    case TraceClass::Stable: return "Stable";
    case TraceClass::Oscillating: return "Oscillating";
    case TraceClass::Growing: return "Growing";
    case TraceClass::Diverged: return "Diverged";
    }
    return "?";
}

std::vector<Real> cycle_amplitudes(const Trace& tr, Real hysteresis_v, std::size_t from) {
    // Alternating extrema with hysteresis; one cycle = a maximum followed
    // by the next minimum.
    const auto& v = tr.v_dc_bus_v;
    std::vector<Real> amps;
    if (from >= v.size()) return amps;
    int dir = 0;
    Real ext = v[from];
    Real last_max = 0.0;
    bool have_max = false;
    for (std::size_t k = from + 1; k < v.size(); ++k) {
        const Real x = v[k];
        if (dir == 0) {
            if (std::abs(x - v[from]) > hysteresis_v) {
                dir = x > v[from] ? 1 : -1;
                ext = x;
            }
        } else if (dir > 0) {
            if (x > ext) {
                ext = x;
            } else if (x < ext - hysteresis_v) {
                last_max = ext;
                have_max = true;
                dir = -1;
                ext = x;
            }
        } else {
            if (x < ext) {
                ext = x;
            } else if (x > ext + hysteresis_v) {
                if (have_max) amps.push_back(last_max - ext);
                dir = 1;
                ext = x;
            }
        }
    }
    return amps;
}

int longest_growth_run(const std::vector<Real>& amplitudes) {
    int best = 0, run = 0;
    for (std::size_t k = 1; k < amplitudes.size(); ++k) {
        run = amplitudes[k] > amplitudes[k - 1] ? run + 1 : 0;
        best = std::max(best, run);
    }
    return best;
}

TraceClass classify(const Trace& tr, Real v_nom, const ClassifyOptions& opts) {
    if (tr.diverged) return TraceClass::Diverged;
    const auto amps = cycle_amplitudes(tr, opts.hysteresis * std::abs(v_nom));
    if (longest_growth_run(amps) >= opts.growth_cycles) return TraceClass::Growing;

    const std::size_t n = tr.rows();
    if (n == 0) return TraceClass::Stable;
    const auto w = std::max<std::size_t>(1, static_cast<std::size_t>(opts.final_fraction * static_cast<Real>(n)));
    const auto first = tr.v_dc_bus_v.end() - static_cast<std::ptrdiff_t>(w);
    const auto [lo, hi] = std::minmax_element(first, tr.v_dc_bus_v.end());
    const Real band = opts.band * std::abs(v_nom);
    const bool in_band = std::abs(*lo - v_nom) <= band && std::abs(*hi - v_nom) <= band;
    const bool quiet = (*hi - *lo) <= opts.settled_ripple * std::abs(v_nom);
    return in_band && quiet ? TraceClass::Stable : TraceClass::Oscillating;
}

} // namespace philab
