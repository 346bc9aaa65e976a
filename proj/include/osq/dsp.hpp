#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "osq/model.hpp"
#include "osq/synth.hpp"

namespace osq {

struct HeterodyneRecord {
    TimeTrace trace;
    double nominal_beat_freq = 0.0;

    /// Throws PreconditionError unless 0 < beat < Nyquist.
    void validate() const;
};

/// Digital Butterworth low-pass (bilinear transform, prewarped corner) as a
/// cascade of second-order sections with unit DC gain.
class ButterworthLowpass {
public:
    ButterworthLowpass(int order, double corner_hz, double sample_rate);

    /// Forward-backward filtering in place. Zero phase; the magnitude
    /// response is the square of the single-pass one. Section states start
    /// at the steady state of the first sample to limit edge transients.
    void filtfilt(std::span<double> x) const;
    /// Single causal pass (tests, diagnostics).
    void filter(std::span<double> x) const;

    /// Single-pass power response |H(f)|^2.
    double power_response(double f_hz) const;
    int order() const { return order_; }

private:
    struct Section {
        double b0, b1, b2, a1, a2;
    };
    void run(std::span<double> x, bool reverse) const;

    int order_;
    double sample_rate_;
    std::vector<Section> sections_;
};

inline constexpr int default_lockin_order = 4;

/// Numerical lock-in: mixes with 2 cos(phi_b - lo_phase) and
/// 2 sin(phi_b - lo_phase), phi_b the beat phase, then zero-phase low-pass.
/// On a modulate_beat record with lo_phase = 0 this returns (q, p); for a
/// pure tone cos(phi_b) and lo_phase = pi/2 it returns (0, -1). In general
/// (Q_m, P_m) is (q, p) rotated by -lo_phase.
QuadraturePair lock_in_demodulate(const HeterodyneRecord& r, double lo_phase, double lp_corner,
                                  int order = default_lockin_order);
/// Same, reusing the record buffer for P_m.
QuadraturePair lock_in_demodulate(HeterodyneRecord&& r, double lo_phase, double lp_corner,
                                  int order = default_lockin_order);

struct TrackedQuadratures {
    TimeTrace q;
    TimeTrace p;
    TimeTrace theta;  ///< estimated beat phase, sampled at the tracker block rate
    double carrier_magnitude = 0.0;
    double residual_phase_variance = 0.0;
};

struct TrackerConfig {
    double tracking_bandwidth = 1.0;
    double lp_corner = 0.0;           ///< lock-in corner, Hz
    double carrier_floor = 1e-3;      ///< minimum baseband carrier magnitude
    double block_rate_factor = 100.0; ///< tracker block rate / tracking bandwidth
    int order = 2;
};

/// Estimates the slowly varying beat phase as the argument of the low-passed
/// complex baseband Q_m + i P_m and re-rotates the quadratures so that the
/// residual mean phase is zero. Throws ConvergenceError when the carrier is
/// below the floor.
TrackedQuadratures track_phase(const HeterodyneRecord& r, const TrackerConfig& c);

enum class Window { hann, rectangular, flattop };

struct WelchConfig {
    std::size_t segment_length = 32768;
    double overlap_fraction = 0.5;
    Window window = Window::hann;
    std::size_t discard_edges = 0;
    /// Standard errors come from the scatter of this many batch means of
    /// consecutive segments, which stays honest when neighbouring segments
    /// are correlated (window overlap, slow phase jitter).
    std::size_t n_batches = 48;

    void validate() const;
};

/// Largest power of two not exceeding sample_rate / rbw_hz.
std::size_t segment_length_for_resolution(double sample_rate, double rbw_hz);

struct EstimatedCovariance {
    SpectralTriple spectra;
    std::vector<double> stderr_qq;
    std::vector<double> stderr_pp;
    std::vector<double> stderr_qp;
    /// Mean imaginary part of the cross-periodogram (diagnostic only).
    std::vector<double> imag_qp;
    std::size_t n_segments = 0;
    /// Per-batch mean spectra, when produced by the estimator.
    std::vector<SpectralTriple> batches;

    std::size_t size() const { return spectra.size(); }
};

/// Windowed, overlapped periodogram averages. Densities are normalized so
/// unit-variance white samples give 1. s_qp is the real part of the mean
/// cross-periodogram conj(X_q) X_p.
EstimatedCovariance welch_cross_spectra(const TimeTrace& q, const TimeTrace& p, const WelchConfig& c);

/// Keeps only bins with f_low <= f <= f_high (Hz).
EstimatedCovariance restrict_band(const EstimatedCovariance& e, double f_low_hz, double f_high_hz);

inline constexpr std::size_t default_calibration_smoothing = 65;

/// Divides by the moving-average-smoothed reference diagonal:
/// s_qq / g_q, s_pp / g_p, s_qp / sqrt(g_q g_p). The reference uncertainty
/// is propagated into the standard errors. Grids must match.
EstimatedCovariance calibrate_shot_noise(const EstimatedCovariance& raw, const EstimatedCovariance& reference,
                                         std::size_t smoothing_bins = default_calibration_smoothing);

/// Rotates the estimated covariance by a fixed angle (phase-reference alignment).
EstimatedCovariance rotate_estimate(const EstimatedCovariance& e, double theta);

}  // namespace osq
