#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "osq/dsp.hpp"
#include "osq/model.hpp"

namespace osq {

enum class Weighting { inverse_variance, uniform };

struct FitConfig {
    double lower = 0.0;  ///< bounds on sigma_theta^2 (rad^2)
    double upper = 1.0;
    double tolerance = 1e-9;
    int max_iterations = 200;
    Weighting weighting = Weighting::inverse_variance;
    std::size_t n_bootstrap = 200;
    std::uint64_t seed = 1;

    void validate() const;
};

struct FitResult {
    double sigma_theta_sq = 0.0;
    double ci_low = 0.0;   ///< one-sigma interval
    double ci_high = 0.0;
    double chi2 = 0.0;
    std::size_t dof = 0;
    int iterations = 0;
    bool converged = false;
    bool at_bound = false;
    std::string ci_method;
};

struct MinimizeResult {
    double x = 0.0;
    double fx = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Bounded scalar minimization (golden section with parabolic steps).
MinimizeResult minimize_bounded(const std::function<double(double)>& f, double lo, double hi, double tol,
                                int max_iterations);

/// Weighted distance between a measured covariance and
/// dephase_covariance(model, sigma_sq). The cross term enters twice, once
/// per off-diagonal element.
double phase_noise_chi2(const EstimatedCovariance& measured, const SpectralTriple& model, double sigma_sq,
                        Weighting w);

/// Fits the residual phase-noise variance of a calibrated measurement
/// against the jitter-free model (efficiency already applied). With
/// inverse-variance weights the interval is where chi^2 rises by one; with
/// uniform weights it is a batch bootstrap when batches are present, else
/// the curvature scaled by chi^2/dof.
FitResult fit_phase_noise(const EstimatedCovariance& measured, const SpectralTriple& model, const FitConfig& c);

/// Angle theta such that rotate_estimate(measured, theta) best matches the
/// model in the least-squares sense over all three spectra.
double fit_alignment(const EstimatedCovariance& measured, const SpectralTriple& model);

}  // namespace osq
