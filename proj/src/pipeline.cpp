#include "osq/pipeline.hpp"

#include "osq/errors.hpp"
#include "osq/model.hpp"

namespace osq {

HeterodyneRecord simulate_record(const SystemParams& p, const SynthConfig& c) {
    c.validate();
    if (!(c.beat_freq > 0)) throw ConfigError("simulate_record needs a beat frequency");
    QuadraturePair pair = synthesize_quadrature_traces(p, c);
    pair = apply_detection(std::move(pair), p, c.seed);
    if (c.jitter_sigma_sq > 0) pair = apply_phase_jitter(std::move(pair), c, p);
    HeterodyneRecord r;
    r.trace = modulate_beat(std::move(pair), c);
    r.nominal_beat_freq = c.beat_freq;
    return r;
}

void AnalysisConfig::validate() const {
    welch.validate();
    if (!(band_high > band_low) || !(band_low >= 0)) throw ConfigError("analysis band needs 0 <= low < high");
    if (!(band_high < lp_corner)) throw ConfigError("analysis band must sit below the lock-in corner");
    if (smoothing_bins == 0) throw ConfigError("smoothing window must be at least one bin");
}

EstimatedCovariance analyze_record(HeterodyneRecord&& r, const AnalysisConfig& a) {
    a.validate();
    QuadraturePair bb = lock_in_demodulate(std::move(r), a.lo_phase, a.lp_corner, a.lp_order);
    const EstimatedCovariance e = welch_cross_spectra(bb.q, bb.p, a.welch);
    return restrict_band(e, a.band_low, a.band_high);
}

SynthConfig reference_config(const SynthConfig& c, double duration) {
    SynthConfig r = c;
    r.duration = duration;
    r.seed = c.seed ^ 0x5245'4645'5245'4e43ULL;
    r.jitter_sigma_sq = 0.0;  // shot noise is phase invariant
    return r;
}

SystemParams vacuum_params(SystemParams p) {
    p.g_x = 0.0;
    p.g_y = 0.0;
    return p;
}

ReproductionResult run_reproduction(const SystemParams& p, const SynthConfig& c, double reference_duration,
                                    const AnalysisConfig& a, const FitConfig& f) {
    EstimatedCovariance raw = analyze_record(simulate_record(p, c), a);
    const EstimatedCovariance ref =
        analyze_record(simulate_record(vacuum_params(p), reference_config(c, reference_duration)), a);
    ReproductionResult out;
    out.calibrated = calibrate_shot_noise(raw, ref, a.smoothing_bins);
    out.model = apply_efficiency(output_spectra(out.calibrated.spectra.grid.avoiding_poles(p), p), p);
    out.model.grid = out.calibrated.spectra.grid;
    out.fit = fit_phase_noise(out.calibrated, out.model, f);
    return out;
}

}  // namespace osq
