#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "osq/params.hpp"

namespace osq {

using cplx = std::complex<double>;

/// Strictly increasing angular frequencies (rad/s). Negative values allowed.
class FrequencyGrid {
public:
    FrequencyGrid() = default;
    explicit FrequencyGrid(std::vector<double> omega);

    /// n points from f_start to f_stop inclusive, given in Hz.
    static FrequencyGrid linear_hz(double f_start_hz, double f_stop_hz, std::size_t n);

    std::span<const double> omega() const { return omega_; }
    double operator[](std::size_t i) const { return omega_[i]; }
    double hz(std::size_t i) const { return rad_to_hz(omega_[i]); }
    std::size_t size() const { return omega_.size(); }
    bool empty() const { return omega_.empty(); }

    /// Throws PoleError if any point sits on +-omega_x or +-omega_y.
    void check_poles(const SystemParams& p) const;

    /// Copy with any point lying on a bare pole shifted by a relative 1e-9.
    /// The full transfer functions are continuous there; only the decoupled
    /// susceptibilities diverge.
    FrequencyGrid avoiding_poles(const SystemParams& p) const;

    friend bool operator==(const FrequencyGrid&, const FrequencyGrid&) = default;

private:
    std::vector<double> omega_;
};

/// Output-field transfer functions at one frequency. The `_neg` members are
/// the same functions evaluated at -omega.
struct TransferSet {
    cplx a_q;
    cplx b_q_pos;
    cplx b_q_neg;
    cplx a_p;
    cplx b_p_pos;
    cplx b_p_neg;
};

/// Symmetrized 2x2 spectral covariance [[s_qq, s_qp], [s_qp, s_pp]] per bin,
/// in shot-noise units (vacuum = 1).
struct SpectralTriple {
    FrequencyGrid grid;
    std::vector<double> s_qq;
    std::vector<double> s_pp;
    std::vector<double> s_qp;

    SpectralTriple() = default;
    explicit SpectralTriple(FrequencyGrid g)
        : grid(std::move(g)), s_qq(grid.size()), s_pp(grid.size()), s_qp(grid.size()) {}

    std::size_t size() const { return grid.size(); }
    /// Throws PreconditionError on length mismatch.
    void check_shape() const;
};

/// omega, shifted by a relative 1e-9 if it sits on +-omega_x or +-omega_y.
double off_pole(double omega, const SystemParams& p);

/// Omega_j / (Omega_j^2 - omega^2). Throws PoleError at |omega| == omega_j.
double mech_susceptibility(double omega, double omega_j);

/// 1 / (-i(delta + omega) + kappa/2).
cplx cavity_susceptibility(double omega, double delta, double kappa);

/// 4 (g_x^2 chi_x^2 Gamma_x + g_y^2 chi_y^2 Gamma_y): the spectral weight of
/// the thermal force combination that multiplies |A_Q|^2, |A_P|^2.
double mechanical_forcing_weight(double omega, const SystemParams& p);

TransferSet transfer_functions(double omega, const SystemParams& p);

/// Ideal (unit-efficiency) symmetrized output quadrature spectra.
SpectralTriple output_spectra(const FrequencyGrid& grid, const SystemParams& p);

/// Vacuum admixture for finite detection efficiency:
/// S_QQ -> e S_QQ + (1 - e), S_PP likewise, S_QP -> e S_QP, with
/// e = p.effective_eta().
SpectralTriple apply_efficiency(SpectralTriple s, const SystemParams& p);
/// Same map with an explicit efficiency.
SpectralTriple apply_efficiency(SpectralTriple s, double eta_eff);

/// Symmetrized displacement spectra in zero-point units.
struct MechanicalSpectra {
    FrequencyGrid grid;
    std::vector<double> s_xx;
    std::vector<double> s_yy;
};

MechanicalSpectra mechanical_spectra(const FrequencyGrid& grid, const SystemParams& p);

enum class Mode { x, y };

struct Occupancy {
    double n = 0.0;               ///< mean phonon number (<x^2> - 1) / 2
    double variance = 0.0;        ///< <x^2> in zero-point units
    double boundary_ratio = 0.0;  ///< S at the upper grid edge / peak S
    bool truncation_warning = false;
};

/// Integrates the displacement spectrum over the grid (trapezoid rule).
/// A grid with front() >= 0 is treated as one-sided and doubled; the gap
/// between 0 and the first point is filled with the first sample value.
/// The warning flag is raised when the density at the upper edge exceeds
/// `warn_fraction` of the peak.
Occupancy occupancy(const FrequencyGrid& grid, const SystemParams& p, Mode mode,
                    double warn_fraction = 1e-6);

/// One-sided midpoint grid suitable for occupancy(): step h_hz up to
/// span_factor * max(omega_x, omega_y, |delta|, kappa). Points that would
/// land on a bare pole are nudged by a thousandth of a step.
FrequencyGrid occupancy_grid(const SystemParams& p, double h_hz = 2.0, double span_factor = 20.0);

}  // namespace osq
