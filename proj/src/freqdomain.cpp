#include "philab/freqdomain.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "philab/format.hpp"

namespace philab {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::PoleOnAxis: return "PoleOnAxis";
    case ErrorCode::NegativeDelay: return "NegativeDelay";
    case ErrorCode::ZeroDenominator: return "ZeroDenominator";
    case ErrorCode::InsufficientCoverage: return "InsufficientCoverage";
    case ErrorCode::AmbiguousCrossing: return "AmbiguousCrossing";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::NonSettled: return "NonSettled";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::ConfigMismatch: return "ConfigMismatch";
    }
    return "Error";
}

std::string_view to_string(Verdict v) {
    switch (v) {
    case Verdict::Stable: return "Stable";
    case Verdict::Unstable: return "Unstable";
    case Verdict::Marginal: return "Marginal";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Polynomials
// ---------------------------------------------------------------------------

Eigen::Index poly_degree(const Polynomial& p) {
    for (Eigen::Index k = p.size() - 1; k >= 0; --k) {
        if (p[k] != 0.0) return k;
    }
    return -1;
}

Polynomial poly_trim(const Polynomial& p) {
    const Eigen::Index deg = poly_degree(p);
    if (deg < 0) return Polynomial::Zero(1);
    return p.head(deg + 1);
}

Polynomial poly_mul(const Polynomial& a, const Polynomial& b) {
    if (a.size() == 0 || b.size() == 0) return Polynomial::Zero(1);
    Polynomial out = Polynomial::Zero(a.size() + b.size() - 1);
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        out.segment(i, b.size()) += a[i] * b;
    }
    return poly_trim(out);
}

Polynomial poly_add(const Polynomial& a, const Polynomial& b) {
    Polynomial out = Polynomial::Zero(std::max(a.size(), b.size()));
    out.head(a.size()) += a;
    out.head(b.size()) += b;
    return poly_trim(out);
}

namespace {

// Sum of |c_k| w^k: the scale against which cancellation in p(jw) is judged.
Real poly_abs_scale(const Polynomial& c, Real omega) {
    Real acc = 0.0;
    for (Eigen::Index k = c.size() - 1; k >= 0; --k) acc = acc * std::abs(omega) + std::abs(c[k]);
    return acc;
}

bool is_zero_poly(const Polynomial& p) { return poly_degree(p) < 0; }

} // namespace

// ---------------------------------------------------------------------------
// RationalTF
// ---------------------------------------------------------------------------

RationalTF::RationalTF(Polynomial num, Polynomial den, Real delay_s)
    : num_(poly_trim(num)), den_(poly_trim(den)), delay_s_(delay_s) {
    if (is_zero_poly(den_)) throw Error(ErrorCode::ZeroDenominator, "denominator polynomial is identically zero");
    if (!(delay_s_ >= 0.0) || !std::isfinite(delay_s_)) {
        throw Error(ErrorCode::NegativeDelay, "transport delay must be finite and >= 0");
    }
}

RationalTF RationalTF::constant(Real k) { return {Polynomial::Constant(1, k), Polynomial::Ones(1)}; }

RationalTF RationalTF::pure_delay(Real delay_s) {
    return {Polynomial::Ones(1), Polynomial::Ones(1), delay_s};
}

RationalTF RationalTF::first_order_lowpass(Real cutoff_hz) {
    if (!(cutoff_hz > 0.0)) throw Error(ErrorCode::DomainError, "low-pass cutoff must be > 0");
    Polynomial den(2);
    den << 1.0, 1.0 / hz_to_rad(cutoff_hz);
    return {Polynomial::Ones(1), den};
}

RationalTF RationalTF::with_delay(Real delay_s) const { return {num_, den_, delay_s}; }

RationalTF RationalTF::scaled(Real k) const { return {num_ * k, den_, delay_s_}; }

Complex tf_eval_rational(const RationalTF& tf, Real omega) {
    if (!std::isfinite(omega)) throw Error(ErrorCode::DomainError, "omega must be finite");
    const Complex s(0.0, omega);
    const Complex den = polyval(tf.den(), s);
    const Real scale = poly_abs_scale(tf.den(), omega);
    if (std::abs(den) <= 64.0 * std::numeric_limits<Real>::epsilon() * scale) {
        throw Error(ErrorCode::PoleOnAxis, "denominator vanishes at w=" + format_real(omega) + " rad/s");
    }
    return polyval(tf.num(), s) / den;
}

Complex tf_eval(const RationalTF& tf, Real omega) {
    return tf_eval_rational(tf, omega) * std::polar(1.0, -omega * tf.delay_s());
}

RationalTF tf_series(const RationalTF& a, const RationalTF& b) {
    return {poly_mul(a.num(), b.num()), poly_mul(a.den(), b.den()), a.delay_s() + b.delay_s()};
}

RationalTF tf_ratio(const RationalTF& numer, const RationalTF& denom) {
    if (is_zero_poly(denom.num())) throw Error(ErrorCode::ZeroDenominator, "ratio by an identically zero transfer function");
    const Real delay = numer.delay_s() - denom.delay_s();
    if (delay < 0.0) throw Error(ErrorCode::NegativeDelay, "ratio would carry a negative delay");
    return {poly_mul(numer.num(), denom.den()), poly_mul(numer.den(), denom.num()), delay};
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

std::vector<Real> FrequencyGrid::frequencies_hz() const {
    if (!(f_min_hz > 0.0) || !(f_max_hz > f_min_hz)) {
        throw Error(ErrorCode::DomainError, "frequency grid requires 0 < f_min < f_max");
    }
    if (points_per_decade < 1) throw Error(ErrorCode::DomainError, "points_per_decade must be >= 1");
    const Real decades = std::log10(f_max_hz / f_min_hz);
    const auto n = static_cast<long>(std::ceil(decades * points_per_decade - 1e-9));
    std::vector<Real> out;
    out.reserve(static_cast<std::size_t>(n) + 1);
    for (long k = 0; k <= n; ++k) {
        out.push_back(f_min_hz * std::pow(10.0, static_cast<Real>(k) / points_per_decade));
    }
    return out;
}

FrequencyGrid FrequencyGrid::refined(int factor) const {
    return {f_min_hz, f_max_hz, points_per_decade * factor};
}

Complex FreqResponse::value(std::size_t i) const {
    return points[i].value * std::polar(1.0, -points[i].omega * delay_s);
}

std::vector<Real> FreqResponse::magnitude_db() const {
    std::vector<Real> out(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) out[i] = 20.0 * std::log10(std::abs(points[i].value));
    return out;
}

std::vector<Real> FreqResponse::phase_deg() const {
    std::vector<Real> out(points.size());
    Real prev = 0.0;
    Real offset = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const Real raw = std::arg(points[i].value);
        if (i > 0) {
            const Real jump = raw + offset - prev;
            if (jump > kPi) offset -= kTwoPi * std::round(jump / kTwoPi);
            else if (jump < -kPi) offset -= kTwoPi * std::round(jump / kTwoPi);
        }
        prev = raw + offset;
        out[i] = rad_to_deg(prev - points[i].omega * delay_s);
    }
    return out;
}

FreqResponse freq_sweep(const RationalTF& tf, const FrequencyGrid& grid) {
    FreqResponse fr;
    fr.grid = grid;
    fr.delay_s = tf.delay_s();
    for (Real f : grid.frequencies_hz()) {
        const Real w = hz_to_rad(f);
        try {
            fr.points.push_back({w, tf_eval_rational(tf, w)});
        } catch (const Error& e) {
            if (e.code() != ErrorCode::PoleOnAxis) throw;
            fr.gaps.push_back(w);
        }
    }
    return fr;
}

FreqResponse freq_sweep(const RationalTF& tf, Real f_min_hz, Real f_max_hz, int points_per_decade) {
    return freq_sweep(tf, FrequencyGrid{f_min_hz, f_max_hz, points_per_decade});
}

FreqResponse multiply(const FreqResponse& fr, const RationalTF& tf) {
    FreqResponse out = fr;
    out.delay_s = fr.delay_s + tf.delay_s();
    for (auto& p : out.points) p.value *= tf_eval_rational(tf, p.omega);
    return out;
}

FreqResponse divide(const FreqResponse& fr, const RationalTF& tf) {
    const Real delay = fr.delay_s - tf.delay_s();
    if (delay < 0.0) throw Error(ErrorCode::NegativeDelay, "quotient would carry a negative delay");
    FreqResponse out = fr;
    out.delay_s = delay;
    for (auto& p : out.points) p.value /= tf_eval_rational(tf, p.omega);
    return out;
}

// ---------------------------------------------------------------------------
// Nyquist
// ---------------------------------------------------------------------------

namespace {

Real wrap_pi(Real a) {
    a = std::remainder(a, kTwoPi);
    if (a <= -kPi) a += kTwoPi;
    return a;
}

Real wrap_180(Real deg) {
    deg = std::remainder(deg, 360.0);
    if (deg <= -180.0) deg += 360.0;
    return deg;
}

// Distance from p to segment ab.
Real segment_distance(Complex p, Complex a, Complex b) {
    const Complex ab = b - a;
    const Real len2 = std::norm(ab);
    if (len2 == 0.0) return std::abs(p - a);
    const Real t = std::clamp(((p - a) * std::conj(ab)).real() / len2, 0.0, 1.0);
    return std::abs(p - (a + t * ab));
}

struct Winding {
    int clockwise;
    Real min_distance;
    bool resolved;
};

Winding wind(const FreqResponse& fr, const NyquistOptions& opts, bool tolerate_grazing) {
    if (fr.points.size() < 2) throw Error(ErrorCode::InsufficientCoverage, "need at least two samples");
    const Complex critical(-1.0, 0.0);
    const std::size_t n = fr.points.size();

    const Complex lo = fr.value(0);
    const Complex hi = fr.value(n - 1);

    if (!(std::abs(hi) <= opts.coverage_ratio * std::abs(hi + 1.0))) {
        throw Error(ErrorCode::InsufficientCoverage,
                    "locus has not approached the origin at the highest frequency (|T|=" +
                        format_real(std::abs(hi)) + ")");
    }

    // Low-end closure, from conj(T(w_min)) back to T(w_min).
    Real low_closure = 0.0;
    if (std::abs(lo.imag()) <= opts.coverage_ratio * std::abs(lo + 1.0)) {
        // Finite DC gain: short vertical chord near the real axis.
        low_closure = 2.0 * std::arg(lo + 1.0);
    } else if (std::abs(lo) >= opts.integrator_magnitude) {
        // Pole(s) at the origin: indentation maps to a clockwise arc at
        // infinity; seen from (-1,0) it sweeps twice the low-end angle.
        low_closure = -2.0 * std::abs(std::arg(lo));
    } else {
        throw Error(ErrorCode::InsufficientCoverage,
                    "locus is neither near the real axis nor large at the lowest frequency");
    }
    const Real high_closure = -2.0 * std::arg(hi + 1.0);

    bool resolved = true;
    Real sweep = 0.0;
    Real min_dist = std::abs(lo - critical);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const Complex a = fr.value(i);
        const Complex b = fr.value(i + 1);
        const Real step = wrap_pi(std::arg(b + 1.0) - std::arg(a + 1.0));
        const Real d = segment_distance(critical, a, b);
        min_dist = std::min(min_dist, d);
        if (std::abs(step) > opts.max_step_angle_rad) {
            // Grazing (-1,0) closer than the marginal band: the count cannot
            // be pinned down, but the verdict (Marginal) can.
            if (tolerate_grazing && d < opts.marginal_epsilon) {
                resolved = false;
            } else {
                throw Error(ErrorCode::AmbiguousCrossing,
                            "locus passes close to (-1,0) between " + format_real(fr.freq_hz(i)) + " Hz and " +
                                format_real(fr.freq_hz(i + 1)) + " Hz; refine the grid");
            }
        }
        sweep += step;
    }

    const Real total = 2.0 * sweep + low_closure + high_closure;
    const Real turns = total / kTwoPi;
    const Real rounded = std::round(turns);
    if (resolved && std::abs(turns - rounded) > 0.05) {
        throw Error(ErrorCode::AmbiguousCrossing, "winding number did not resolve to an integer (" +
                                                      format_real(turns) + ")");
    }
    return {-static_cast<int>(rounded), min_dist, resolved};
}

} // namespace

int nyquist_encirclements(const FreqResponse& fr, const NyquistOptions& opts) {
    return wind(fr, opts, false).clockwise;
}

namespace {
constexpr Real kUnityTolDb = 1e-5;
}

StabilityReport margins(const FreqResponse& fr, const NyquistOptions& opts) {
    const Winding w = wind(fr, opts, true);
    StabilityReport rep;
    rep.encirclements = w.clockwise;
    rep.resolved = w.resolved;
    rep.min_distance_to_critical = w.min_distance;

    const std::vector<Real> mag_db = fr.magnitude_db();
    const std::vector<Real> phase = fr.phase_deg();
    const auto log_w = [&](std::size_t i) { return std::log(fr.omega(i)); };

    for (std::size_t i = 0; i + 1 < fr.size(); ++i) {
        const Real m0 = mag_db[i], m1 = mag_db[i + 1];
        const Real p0 = phase[i], p1 = phase[i + 1];

        // |T| within kUnityTolDb of 1 counts as on the circle, so a locus
        // that starts on it (1/(s+1)) still reports its crossover.
        if ((m0 < -kUnityTolDb) != (m1 < -kUnityTolDb)) {
            const Real t = std::clamp(m0 / (m0 - m1), 0.0, 1.0);
            const Real p = p0 + t * (p1 - p0);
            const Real pm = wrap_180(180.0 + p);
            if (pm < rep.phase_margin_deg) {
                rep.phase_margin_deg = pm;
                rep.gain_crossover_hz = rad_to_hz(std::exp(log_w(i) + t * (log_w(i + 1) - log_w(i))));
            }
        }

        // Crossings of any odd multiple of 180 degrees, half-open along the
        // direction of travel.
        if (p0 == p1) continue;
        const Real lo = std::min(p0, p1), hi = std::max(p0, p1);
        const auto first = static_cast<long>(std::ceil((lo - 180.0) / 360.0));
        const auto last = static_cast<long>(std::floor((hi - 180.0) / 360.0));
        for (long k = first; k <= last; ++k) {
            const Real target = 180.0 + 360.0 * static_cast<Real>(k);
            if (target == p0) continue;
            const Real t = (target - p0) / (p1 - p0);
            const Real m = m0 + t * (m1 - m0);
            const Real gm = -m;
            if (gm < rep.gain_margin_db) {
                rep.gain_margin_db = gm;
                rep.phase_crossover_hz = rad_to_hz(std::exp(log_w(i) + t * (log_w(i + 1) - log_w(i))));
            }
        }
    }

    if (w.min_distance < opts.marginal_epsilon) rep.verdict = Verdict::Marginal;
    else rep.verdict = (w.clockwise == 0) ? Verdict::Stable : Verdict::Unstable;
    return rep;
}

void write_csv(std::ostream& os, const FreqResponse& fr) {
    os << "freq_hz,re,im,mag_db,phase_deg\n";
    const std::vector<Real> mag = fr.magnitude_db();
    const std::vector<Real> ph = fr.phase_deg();
    for (std::size_t i = 0; i < fr.size(); ++i) {
        const Complex v = fr.value(i);
        os << format_real(fr.freq_hz(i)) << ',' << format_real(v.real()) << ',' << format_real(v.imag()) << ','
           << format_real(mag[i]) << ',' << format_real(ph[i]) << '\n';
    }
}

} // namespace philab
