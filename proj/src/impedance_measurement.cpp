#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "philab/format.hpp"
#include "philab/phil_engine.hpp"

namespace philab {

namespace {

struct Probe {
    Real f_hz;
    Complex z;
};

// One frequency: bias, settle, then correlate two consecutive windows of an
// integer number of cycles. The drive is on the block's single input port;
// `voltage_drive` picks the sign convention of the returned impedance.
Probe probe_one(const BlockFactory& factory, Real bias, std::optional<Real> p_ref_w, Real f_req, bool voltage_drive,
                const MeasureOptions& o) {
    auto blk = factory();
    if (p_ref_w) blk->set_parameter("p_ref_w", *p_ref_w);
    blk->settle1(bias);

    const Real dt = o.dt_s;
    const Real amp = o.amplitude > 0.0 ? o.amplitude : 0.01 * std::max(std::abs(bias), 1.0);
    const Real cycles = std::max(1.0, std::ceil(static_cast<Real>(o.min_window_samples) * f_req * dt));
    const auto n_win = static_cast<std::size_t>(std::llround(cycles / (f_req * dt)));
    if (n_win < 4) throw Error(ErrorCode::ConfigError, "probe frequency too close to Nyquist");
    const Real f = cycles / (static_cast<Real>(n_win) * dt);
    const Real w = hz_to_rad(f);
    const auto n_settle =
        static_cast<std::size_t>(std::ceil((o.settle_cycles / f + blk->settling_time_s()) / dt));

    // Phase is tracked by index modulo the window so that long settling
    // runs keep the sinusoid exactly periodic.
    std::vector<Complex> rot(n_win);
    for (std::size_t k = 0; k < n_win; ++k) rot[k] = std::polar(1.0, w * static_cast<Real>(k) * dt);

    std::size_t phase = 0;
    auto drive = [&](Real& x) {
        x = bias + amp * rot[phase].imag();
        phase = phase + 1 == n_win ? 0 : phase + 1;
    };
    for (std::size_t k = 0; k < n_settle; ++k) {
        Real x;
        drive(x);
        blk->step1(x, dt);
    }
    auto window = [&]() {
        Complex sx{0.0, 0.0}, sy{0.0, 0.0};
        for (std::size_t k = 0; k < n_win; ++k) {
            const Complex c = std::conj(rot[phase]);
            Real x;
            drive(x);
            const Real y = blk->step1(x, dt);
            sx += x * c;
            sy += y * c;
        }
        return voltage_drive ? sx / sy : -sy / sx;
    };
    const Complex z1 = window();
    const Complex z2 = window();
    if (!(std::abs(z2 - z1) <= o.tolerance * std::abs(z2))) {
        throw Error(ErrorCode::NonSettled, "phasor still moving at " + format_real(f) + " Hz");
    }
    return {f, z2};
}

FreqResponse sweep(const BlockFactory& factory, Real bias, std::optional<Real> p_ref_w,
                   const std::vector<Real>& f_hz, bool voltage_drive, const MeasureOptions& o) {
    std::vector<Probe> out(f_hz.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&]() {
        for (std::size_t i = next++; i < f_hz.size(); i = next++) {
            try {
                out[i] = probe_one(factory, bias, p_ref_w, f_hz[i], voltage_drive, o);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    unsigned n_threads = o.threads ? o.threads : std::max(1u, std::thread::hardware_concurrency());
    n_threads = static_cast<unsigned>(std::min<std::size_t>(n_threads, f_hz.size()));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);

    FreqResponse fr;
    // One point per request, in request order; snapping never reorders
    // requests spaced wider than the window resolution (~1/2000).
    for (const auto& p : out) fr.points.push_back({hz_to_rad(p.f_hz), p.z});
    if (!f_hz.empty()) {
        fr.grid.f_min_hz = f_hz.front();
        fr.grid.f_max_hz = f_hz.back();
        const Real decades = std::log10(f_hz.back() / f_hz.front());
        fr.grid.points_per_decade =
            decades > 0.0 ? static_cast<int>(std::lround(static_cast<Real>(f_hz.size() - 1) / decades)) : 1;
    }
    return fr;
}

} // namespace

FreqResponse measure_input_impedance(const BlockFactory& factory, Real v_dc_v, std::optional<Real> p_ref_w,
                                     const std::vector<Real>& f_hz, const MeasureOptions& opts) {
    return sweep(factory, v_dc_v, p_ref_w, f_hz, true, opts);
}

FreqResponse measure_output_impedance(const BlockFactory& factory, Real i_dc_a, const std::vector<Real>& f_hz,
                                      const MeasureOptions& opts) {
    return sweep(factory, i_dc_a, std::nullopt, f_hz, false, opts);
}

} // namespace philab
