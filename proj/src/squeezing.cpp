#include "osq/squeezing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "osq/errors.hpp"

namespace osq {

namespace {

constexpr double pi = std::numbers::pi;

double wrap_half_turn(double phi) {
    double r = std::fmod(phi, pi);
    if (r < 0) r += pi;
    if (r >= pi) r -= pi;
    return r;
}

}  // namespace

SpectralTriple rotate_covariance(const SpectralTriple& s, double theta) {
    s.check_shape();
    const double c = std::cos(theta);
    const double sn = std::sin(theta);
    SpectralTriple out(s.grid);
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double a = s.s_qq[i];
        const double b = s.s_pp[i];
        const double x = s.s_qp[i];
        out.s_qq[i] = c * c * a - 2.0 * c * sn * x + sn * sn * b;
        out.s_pp[i] = sn * sn * a + 2.0 * c * sn * x + c * c * b;
        out.s_qp[i] = c * sn * (a - b) + (c * c - sn * sn) * x;
    }
    return out;
}

SpectralTriple dephase_covariance(const SpectralTriple& s, double sigma_sq) {
    if (!(sigma_sq >= 0)) throw PreconditionError("phase-noise variance must be >= 0");
    s.check_shape();
    if (sigma_sq == 0) return s;
    // e^{-s}(cosh s, sinh s) = ((1 + e^{-2s})/2, (1 - e^{-2s})/2)
    const double contrast = std::exp(-2.0 * sigma_sq);
    SpectralTriple out(s.grid);
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double mean = 0.5 * (s.s_qq[i] + s.s_pp[i]);
        const double half_diff = 0.5 * (s.s_qq[i] - s.s_pp[i]) * contrast;
        out.s_qq[i] = mean + half_diff;
        out.s_pp[i] = mean - half_diff;
        out.s_qp[i] = contrast * s.s_qp[i];
    }
    return out;
}

std::vector<double> quadrature_spectrum(const SpectralTriple& s, double phi, double sigma_sq) {
    if (!(sigma_sq >= 0)) throw PreconditionError("phase-noise variance must be >= 0");
    s.check_shape();
    const double two_phi = 2.0 * wrap_half_turn(phi);
    const double contrast = std::exp(-2.0 * sigma_sq);
    const double kc = contrast * std::cos(two_phi);
    const double ks = contrast * std::sin(two_phi);
    std::vector<double> out(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        out[i] = 0.5 * (s.s_qq[i] + s.s_pp[i]) + 0.5 * (s.s_qq[i] - s.s_pp[i]) * kc + s.s_qp[i] * ks;
    }
    return out;
}

OptimalSpectrum optimal_spectrum(const SpectralTriple& s, double sigma_sq) {
    if (!(sigma_sq >= 0)) throw PreconditionError("phase-noise variance must be >= 0");
    s.check_shape();
    const double contrast = std::exp(-2.0 * sigma_sq);
    OptimalSpectrum out{std::vector<double>(s.size()), std::vector<double>(s.size())};
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double d = s.s_qq[i] - s.s_pp[i];
        const double x = s.s_qp[i];
        out.value[i] = 0.5 * (s.s_qq[i] + s.s_pp[i]) - 0.5 * contrast * std::hypot(d, 2.0 * x);
        out.phase[i] = wrap_half_turn(0.5 * std::atan2(2.0 * x, d) + 0.5 * pi);
    }
    return out;
}

SqueezingMap build_map(const SpectralTriple& s, double sigma_sq, std::size_t n_phases) {
    if (n_phases < 2) throw PreconditionError("a squeezing map needs at least two phases");
    SqueezingMap map;
    map.grid = s.grid;
    map.phases.resize(n_phases);
    map.values.reserve(n_phases * s.size());
    for (std::size_t k = 0; k < n_phases; ++k) {
        map.phases[k] = pi * static_cast<double>(k) / static_cast<double>(n_phases);
        const auto row = quadrature_spectrum(s, map.phases[k], sigma_sq);
        map.values.insert(map.values.end(), row.begin(), row.end());
    }
    return map;
}

BandReport find_squeezing_bands(std::span<const double> values, const FrequencyGrid& grid, double threshold) {
    return find_squeezing_bands(OptimalSpectrum{{values.begin(), values.end()}, {}}, grid, threshold);
}

BandReport find_squeezing_bands(const OptimalSpectrum& opt, const FrequencyGrid& grid, double threshold) {
    if (opt.value.size() != grid.size()) throw PreconditionError("spectrum and grid lengths differ");
    const bool have_phase = opt.phase.size() == opt.value.size();
    BandReport report;
    report.threshold = threshold;
    std::size_t i = 0;
    const std::size_t n = grid.size();
    while (i < n) {
        if (!(opt.value[i] < threshold)) {
            ++i;
            continue;
        }
        std::size_t j = i;
        std::size_t best = i;
        while (j < n && opt.value[j] < threshold) {
            if (opt.value[j] < opt.value[best]) best = j;
            ++j;
        }
        report.bands.push_back({grid.hz(i), grid.hz(j - 1), opt.value[best], grid.hz(best),
                                have_phase ? opt.phase[best] : std::numeric_limits<double>::quiet_NaN()});
        i = j;
    }
    return report;
}

double phase_separation(double a, double b) {
    const double d = wrap_half_turn(a - b);
    return std::min(d, pi - d);
}

}  // namespace osq
