#pragma once

#include <iosfwd>
#include <limits>
#include <optional>
#include <vector>

#include "philab/types.hpp"

namespace philab {

/// Real polynomial in s, ascending powers: c[0] + c[1] s + c[2] s^2 + ...
using Polynomial = Vector;

/// Horner evaluation; Scalar may be real or complex.
template <typename Scalar>
Scalar polyval(const Polynomial& coeffs, const Scalar& x) {
    Scalar acc(0);
    for (Eigen::Index k = coeffs.size() - 1; k >= 0; --k) {
        acc = acc * x + Scalar(coeffs[k]);
    }
    return acc;
}

Polynomial poly_mul(const Polynomial& a, const Polynomial& b);
Polynomial poly_add(const Polynomial& a, const Polynomial& b);
/// Index of the highest nonzero coefficient, -1 for the zero polynomial.
Eigen::Index poly_degree(const Polynomial& p);
Polynomial poly_trim(const Polynomial& p);

/// Rational transfer function with a transport delay e^{-s*delay_s}.
/// Immutable once built.
class RationalTF {
public:
    RationalTF(Polynomial num, Polynomial den, Real delay_s = 0.0);

    static RationalTF constant(Real k);
    static RationalTF pure_delay(Real delay_s);
    /// 1 / (1 + s / (2 pi f_c))
    static RationalTF first_order_lowpass(Real cutoff_hz);

    [[nodiscard]] const Polynomial& num() const { return num_; }
    [[nodiscard]] const Polynomial& den() const { return den_; }
    [[nodiscard]] Real delay_s() const { return delay_s_; }
    [[nodiscard]] Eigen::Index num_degree() const { return poly_degree(num_); }
    [[nodiscard]] Eigen::Index den_degree() const { return poly_degree(den_); }

    /// Same polynomials, different delay.
    [[nodiscard]] RationalTF with_delay(Real delay_s) const;
    /// Multiply numerator by a positive or negative constant.
    [[nodiscard]] RationalTF scaled(Real k) const;

private:
    Polynomial num_;
    Polynomial den_;
    Real delay_s_;
};

/// num(jw)/den(jw) * exp(-j w delay). Throws PoleOnAxis when the
/// denominator vanishes at jw relative to its coefficient scale.
Complex tf_eval(const RationalTF& tf, Real omega);
/// Rational part only (no delay factor).
Complex tf_eval_rational(const RationalTF& tf, Real omega);

RationalTF tf_series(const RationalTF& a, const RationalTF& b);
/// numer / denom. Delays subtract and must stay nonnegative.
RationalTF tf_ratio(const RationalTF& numer, const RationalTF& denom);

inline RationalTF operator*(const RationalTF& a, const RationalTF& b) { return tf_series(a, b); }
inline RationalTF operator/(const RationalTF& a, const RationalTF& b) { return tf_ratio(a, b); }

struct FrequencyGrid {
    Real f_min_hz = 1.0;
    Real f_max_hz = 1e6;
    int points_per_decade = 200;

    /// Log-spaced, first point f_min, last point >= f_max.
    [[nodiscard]] std::vector<Real> frequencies_hz() const;
    [[nodiscard]] FrequencyGrid refined(int factor) const;
};

struct FreqPoint {
    Real omega;    ///< rad/s
    Complex value; ///< rational part, delay excluded
};

/// Sampled frequency response. The transport delay is carried
/// analytically so that phase unwrapping never has to chase it.
struct FreqResponse {
    std::vector<FreqPoint> points;
    Real delay_s = 0.0;
    FrequencyGrid grid;
    /// Grid frequencies (rad/s) skipped because of PoleOnAxis.
    std::vector<Real> gaps;

    [[nodiscard]] std::size_t size() const { return points.size(); }
    [[nodiscard]] Real omega(std::size_t i) const { return points[i].omega; }
    [[nodiscard]] Real freq_hz(std::size_t i) const { return rad_to_hz(points[i].omega); }
    /// Full value including the delay factor.
    [[nodiscard]] Complex value(std::size_t i) const;
    [[nodiscard]] std::vector<Real> magnitude_db() const;
    /// Unwrapped phase in degrees, delay phase added analytically.
    [[nodiscard]] std::vector<Real> phase_deg() const;
};

FreqResponse freq_sweep(const RationalTF& tf, Real f_min_hz, Real f_max_hz, int points_per_decade);
FreqResponse freq_sweep(const RationalTF& tf, const FrequencyGrid& grid);
/// Pointwise product of a sampled response with a rational TF evaluated
/// at the same frequencies. Delays add.
FreqResponse multiply(const FreqResponse& fr, const RationalTF& tf);
/// Pointwise quotient fr / tf.
FreqResponse divide(const FreqResponse& fr, const RationalTF& tf);

enum class Verdict { Stable, Unstable, Marginal };
std::string_view to_string(Verdict v);

struct StabilityReport {
    /// Clockwise encirclements of (-1, 0). With no open-loop RHP poles
    /// this equals the number of closed-loop RHP poles.
    int encirclements = 0;
    Real gain_margin_db = std::numeric_limits<Real>::infinity();
    Real phase_margin_deg = std::numeric_limits<Real>::infinity();
    std::optional<Real> gain_crossover_hz;
    std::optional<Real> phase_crossover_hz;
    Real min_distance_to_critical = std::numeric_limits<Real>::infinity();
    Verdict verdict = Verdict::Stable;
    /// False when the locus grazes (-1, 0) inside the marginal band between
    /// two samples; `encirclements` is then a best guess and the verdict is
    /// Marginal.
    bool resolved = true;
};

struct NyquistOptions {
    /// Endpoint heuristic: |T| <= ratio * |T + 1| at the high end (and
    /// |Im T| <= ratio * |T + 1| at a finite-gain low end).
    Real coverage_ratio = 0.1;
    /// Low-end magnitude above which the locus is taken to come from a
    /// pole at the origin and is closed by a clockwise arc at infinity.
    Real integrator_magnitude = 10.0;
    /// Angle swept around (-1, 0) between consecutive samples above
    /// which the crossing is considered unresolved.
    Real max_step_angle_rad = kPi / 2.0;
    /// Locus closer than this to (-1, 0) is reported Marginal.
    Real marginal_epsilon = 0.02;
};

/// AmbiguousCrossing whenever a step sweeps more than max_step_angle_rad.
int nyquist_encirclements(const FreqResponse& fr, const NyquistOptions& opts = {});
/// Like nyquist_encirclements, except that an unresolved step passing
/// within marginal_epsilon of (-1, 0) yields Marginal instead of throwing.
StabilityReport margins(const FreqResponse& fr, const NyquistOptions& opts = {});

/// CSV with header `freq_hz,re,im,mag_db,phase_deg`.
void write_csv(std::ostream& os, const FreqResponse& fr);

} // namespace philab
