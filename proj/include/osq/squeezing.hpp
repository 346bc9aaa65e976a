#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "osq/model.hpp"

namespace osq {

/// Congruence R V R^T per bin with R = [[cos t, -sin t], [sin t, cos t]].
SpectralTriple rotate_covariance(const SpectralTriple& s, double theta);

/// Average of rotate_covariance over theta ~ N(0, sigma_sq), in closed form.
/// Diagonals mix toward their mean by (1 - e^{-2 sigma_sq})/2, the
/// off-diagonal contracts by e^{-2 sigma_sq}; the trace is unchanged.
SpectralTriple dephase_covariance(const SpectralTriple& s, double sigma_sq);

/// Spectrum of the quadrature at detection phase phi, including phase noise:
///   (S_QQ+S_PP)/2 + (S_QQ-S_PP)/2 e^{-2 s2} cos 2phi + S_QP e^{-2 s2} sin 2phi.
/// At sigma_sq = 0 this is the (0,0) element of rotate_covariance(s, -phi).
std::vector<double> quadrature_spectrum(const SpectralTriple& s, double phi, double sigma_sq);

struct OptimalSpectrum {
    std::vector<double> value;  ///< min over phi of quadrature_spectrum
    std::vector<double> phase;  ///< argmin phase in [0, pi)
};

OptimalSpectrum optimal_spectrum(const SpectralTriple& s, double sigma_sq);

/// Quadrature spectrum sampled on a uniform phase grid over [0, pi).
struct SqueezingMap {
    FrequencyGrid grid;
    std::vector<double> phases;
    std::vector<double> values;  ///< row-major, rows = phases, columns = frequencies

    double at(std::size_t phase_index, std::size_t freq_index) const {
        return values[phase_index * grid.size() + freq_index];
    }
};

inline constexpr std::size_t default_map_phases = 181;

SqueezingMap build_map(const SpectralTriple& s, double sigma_sq, std::size_t n_phases = default_map_phases);

struct SqueezingBand {
    double f_low_hz = 0.0;
    double f_high_hz = 0.0;
    double min_value = 0.0;
    double argmin_hz = 0.0;
    double argmin_phase = 0.0;  ///< NaN when no phase information was supplied
};

struct BandReport {
    std::vector<SqueezingBand> bands;
    double threshold = 1.0;
};

/// Maximal contiguous runs of bins strictly below threshold.
BandReport find_squeezing_bands(const OptimalSpectrum& opt, const FrequencyGrid& grid, double threshold = 1.0);
BandReport find_squeezing_bands(std::span<const double> values, const FrequencyGrid& grid, double threshold = 1.0);

/// Distance between two phases modulo pi, in [0, pi/2].
double phase_separation(double a, double b);

}  // namespace osq
