#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "osq/params.hpp"

namespace osq {

/// Parameters of a synthetic detection record.
///
/// Quadratures are synthesized with support |f| <= band_limit; the beat tone
/// must sit above that support and the modulated record below Nyquist:
///   band_limit < beat_freq,  beat_freq + band_limit < sample_rate / 2.
/// beat_freq = 0 means a baseband-only record (no modulate_beat).
struct SynthConfig {
    double sample_rate = 1.2e6;
    double duration = 1.0;
    std::uint64_t seed = 1;
    double beat_freq = 400e3;
    double band_limit = 180e3;
    double jitter_sigma_sq = 0.0;
    double jitter_bandwidth = 1.0;
    /// Mean field along Q (coherent carrier used by the phase tracker).
    double carrier_amplitude = 0.0;

    std::size_t n_samples() const;
    /// Throws ConfigError on any violated invariant.
    void validate() const;
};

struct TimeTrace {
    std::vector<double> samples;
    double sample_rate = 0.0;
    std::string label;
    /// One-sided support of the content in Hz; sample_rate/2 for white data.
    double bandwidth = 0.0;

    std::size_t size() const { return samples.size(); }
    double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
};

struct QuadraturePair {
    TimeTrace q;
    TimeTrace p;
};

/// Gaussian surrogate of the output quadratures at unit efficiency.
///
/// One complex white draw per physical input channel (two thermal forces,
/// optical input at +f and at -f) is filtered through the output transfer
/// functions, so the optical input drives both quadratures coherently. The
/// half spectrum is inverted with a single real FFT, which makes the traces
/// exactly real and periodic over the record. DC and bins above band_limit
/// are zero. Spectra use the convention that unit-variance white samples
/// have density 1, so shot noise is unit-variance white noise.
QuadraturePair synthesize_quadrature_traces(const SystemParams& p, const SynthConfig& c);

/// sqrt(e) signal + sqrt(1 - e) independent unit white noise per quadrature,
/// e = p.effective_eta(). The added noise shares each trace's band limit.
QuadraturePair apply_detection(QuadraturePair in, const SystemParams& p, std::uint64_t seed);
QuadraturePair apply_detection(QuadraturePair in, double eta_eff, std::uint64_t seed);

/// Stationary Ornstein-Uhlenbeck phase process, exactly discretized:
/// variance sigma_sq, corner bandwidth_hz.
std::vector<double> jitter_process(std::size_t n, double sample_rate, double sigma_sq, double bandwidth_hz,
                                   std::uint64_t seed);

/// Instantaneous rotation by theta(t) ~ jitter_process(...). Requires the
/// slow-jitter regime: jitter_bandwidth <= 1e-3 * kappa / 2pi.
QuadraturePair apply_phase_jitter(QuadraturePair in, const SynthConfig& c, const SystemParams& p);

/// Rotation by a fixed angle: (q, p) -> (q cos t - p sin t, q sin t + p cos t).
QuadraturePair rotate_traces(QuadraturePair in, double theta);
/// Rotation by a sample-wise angle trace.
QuadraturePair rotate_traces(QuadraturePair in, const std::vector<double>& theta);

/// Beat-tone phase 2 pi f_beat t at sample index n, reduced mod 2 pi.
double beat_phase(std::size_t n, double beat_freq, double sample_rate);

/// v(t) = q(t) cos(2 pi f_b t) + p(t) sin(2 pi f_b t).
TimeTrace modulate_beat(const QuadraturePair& in, const SynthConfig& c);
/// Same, reusing the q buffer.
TimeTrace modulate_beat(QuadraturePair&& in, const SynthConfig& c);

/// Binary trace file: "OSQT", u16 version, u16 reserved, f64 sample rate,
/// then f64 samples; all little-endian.
inline constexpr std::uint16_t trace_format_version = 1;
void write_trace(const std::string& path, const TimeTrace& t);
TimeTrace read_trace(const std::string& path);
/// Two-column CSV (time_s,value). Meant for short traces.
void write_trace_csv(const std::string& path, const TimeTrace& t);

}  // namespace osq
