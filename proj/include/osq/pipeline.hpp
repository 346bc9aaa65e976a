#pragma once

#include <cstdint>

#include "osq/dsp.hpp"
#include "osq/fit.hpp"
#include "osq/synth.hpp"

namespace osq {

/// Synthesis, detection loss, slow phase jitter and beat modulation in one
/// pass; buffers are reused so the peak footprint stays near three traces.
HeterodyneRecord simulate_record(const SystemParams& p, const SynthConfig& c);

struct AnalysisConfig {
    WelchConfig welch;
    double lp_corner = 195e3;
    int lp_order = default_lockin_order;
    double lo_phase = 0.0;
    double band_low = 50e3;
    double band_high = 170e3;
    std::size_t smoothing_bins = default_calibration_smoothing;

    void validate() const;
};

/// Lock-in demodulation followed by the Welch estimate, restricted to the
/// analysis band. The record is consumed.
EstimatedCovariance analyze_record(HeterodyneRecord&& r, const AnalysisConfig& a);

/// A record with no coupling (pure shot noise after the same detection
/// chain), for calibrating the demodulator gain.
SynthConfig reference_config(const SynthConfig& c, double duration);
SystemParams vacuum_params(SystemParams p);

struct ReproductionResult {
    EstimatedCovariance calibrated;
    SpectralTriple model;  ///< efficiency applied, no phase noise
    FitResult fit;
};

/// Signal and reference record, calibration, and phase-noise fit.
ReproductionResult run_reproduction(const SystemParams& p, const SynthConfig& c, double reference_duration,
                                    const AnalysisConfig& a, const FitConfig& f);

}  // namespace osq
