#include "osq/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "osq/errors.hpp"
#include "osq/squeezing.hpp"
#include "rng.hpp"

namespace osq {

void FitConfig::validate() const {
    if (!(lower >= 0) || !(upper > lower)) throw PreconditionError("fit bounds need 0 <= lower < upper");
    if (!(tolerance > 0) || max_iterations < 1) throw PreconditionError("fit tolerance/iterations invalid");
}

MinimizeResult minimize_bounded(const std::function<double(double)>& f, double lo, double hi, double tol,
                                int max_iterations) {
    if (!(hi > lo)) throw PreconditionError("minimize_bounded needs hi > lo");
    const double golden = 0.5 * (3.0 - std::sqrt(5.0));
    const double eps = std::sqrt(std::numeric_limits<double>::epsilon());
    double a = lo, b = hi;
    double x = a + golden * (b - a), w = x, v = x;
    double fx = f(x), fw = fx, fv = fx;
    double d = 0.0, e = 0.0;
    MinimizeResult r;
    for (int it = 1; it <= max_iterations; ++it) {
        r.iterations = it;
        const double m = 0.5 * (a + b);
        const double t1 = eps * std::abs(x) + tol / 3.0;
        const double t2 = 2.0 * t1;
        if (std::abs(x - m) <= t2 - 0.5 * (b - a)) {
            r.converged = true;
            break;
        }
        bool golden_step = true;
        if (std::abs(e) > t1) {
            double rr = (x - w) * (fx - fv);
            double q = (x - v) * (fx - fw);
            double p = (x - v) * q - (x - w) * rr;
            q = 2.0 * (q - rr);
            if (q > 0) p = -p;
            q = std::abs(q);
            const double etemp = e;
            e = d;
            if (std::abs(p) < std::abs(0.5 * q * etemp) && p > q * (a - x) && p < q * (b - x)) {
                d = p / q;
                const double u = x + d;
                if (u - a < t2 || b - u < t2) d = x < m ? t1 : -t1;
                golden_step = false;
            }
        }
        if (golden_step) {
            e = (x < m ? b : a) - x;
            d = golden * e;
        }
        const double u = x + (std::abs(d) >= t1 ? d : (d > 0 ? t1 : -t1));
        const double fu = f(u);
        if (fu <= fx) {
            (u < x ? b : a) = x;
            v = w, fv = fw;
            w = x, fw = fx;
            x = u, fx = fu;
        } else {
            (u < x ? a : b) = u;
            if (fu <= fw || w == x) {
                v = w, fv = fw;
                w = u, fw = fu;
            } else if (fu <= fv || v == x || v == w) {
                v = u, fv = fu;
            }
        }
    }
    // The interior search never evaluates the end points; a minimum on the
    // boundary shows up as x converging onto it.
    for (double edge : {lo, hi}) {
        const double fe = f(edge);
        if (fe < fx) x = edge, fx = fe;
    }
    r.x = x;
    r.fx = fx;
    return r;
}

namespace {

void check_inputs(const EstimatedCovariance& m, const SpectralTriple& model) {
    m.spectra.check_shape();
    model.check_shape();
    if (m.size() != model.size()) throw PreconditionError("measurement and model lengths differ");
    for (std::size_t i = 0; i < m.size(); ++i) {
        const double a = m.spectra.grid[i], b = model.grid[i];
        if (std::abs(a - b) > 1e-9 * std::max(std::abs(a), 1.0)) {
            throw PreconditionError("measurement and model grids differ");
        }
    }
    if (m.stderr_qq.size() != m.size() || m.stderr_pp.size() != m.size() || m.stderr_qp.size() != m.size()) {
        throw PreconditionError("standard errors missing or mis-sized");
    }
}

double chi2_of(const SpectralTriple& data, const EstimatedCovariance& se, const SpectralTriple& model,
               double sigma_sq, Weighting w) {
    const double k = std::exp(-2.0 * sigma_sq);
    double acc = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double mean = 0.5 * (model.s_qq[i] + model.s_pp[i]);
        const double half = 0.5 * (model.s_qq[i] - model.s_pp[i]) * k;
        const double rq = data.s_qq[i] - (mean + half);
        const double rp = data.s_pp[i] - (mean - half);
        const double rc = data.s_qp[i] - model.s_qp[i] * k;
        if (w == Weighting::uniform) {
            acc += rq * rq + rp * rp + 2.0 * rc * rc;
        } else {
            acc += rq * rq / (se.stderr_qq[i] * se.stderr_qq[i]) + rp * rp / (se.stderr_pp[i] * se.stderr_pp[i]) +
                   2.0 * rc * rc / (se.stderr_qp[i] * se.stderr_qp[i]);
        }
    }
    return acc;
}

// Counting S_QP twice makes chi2 curvature J = sum(a^2 + b^2 + 2c^2) while
// the estimator variance is K / J^2 with K = sum(a^2 + b^2 + 4c^2). The
// interval is chi2 <= min + K/J, which reduces to +1 when S_QP carries no
// information.
double interval_level(const EstimatedCovariance& se, const SpectralTriple& model, double sigma_sq) {
    const double k = std::exp(-2.0 * sigma_sq);
    double j = 0.0, kk = 0.0;
    for (std::size_t i = 0; i < model.size(); ++i) {
        const double half = (model.s_qq[i] - model.s_pp[i]) * k;  // d/ds of the diagonals, up to sign
        const double a = half / se.stderr_qq[i];
        const double b = half / se.stderr_pp[i];
        const double c = 2.0 * k * model.s_qp[i] / se.stderr_qp[i];
        j += a * a + b * b + 2.0 * c * c;
        kk += a * a + b * b + 4.0 * c * c;
    }
    return j > 0 ? kk / j : 1.0;
}

// Crossing of f = level between a (f below level) and b, by bisection.
double crossing(const std::function<double(double)>& f, double a, double b, double level) {
    for (int i = 0; i < 100 && std::abs(b - a) > 1e-12 * std::max(1.0, std::abs(a)); ++i) {
        const double mid = 0.5 * (a + b);
        (f(mid) < level ? a : b) = mid;
    }
    return 0.5 * (a + b);
}

}  // namespace

double phase_noise_chi2(const EstimatedCovariance& measured, const SpectralTriple& model, double sigma_sq,
                        Weighting w) {
    check_inputs(measured, model);
    return chi2_of(measured.spectra, measured, model, sigma_sq, w);
}

FitResult fit_phase_noise(const EstimatedCovariance& measured, const SpectralTriple& model, const FitConfig& c) {
    c.validate();
    check_inputs(measured, model);
    if (measured.size() < 2) throw PreconditionError("fit needs at least two frequency bins");

    auto fit_data = [&](const SpectralTriple& data) {
        auto f = [&](double s) { return chi2_of(data, measured, model, s, c.weighting); };
        return minimize_bounded(f, c.lower, c.upper, c.tolerance, c.max_iterations);
    };
    const MinimizeResult best = fit_data(measured.spectra);
    auto chi2 = [&](double s) { return chi2_of(measured.spectra, measured, model, s, c.weighting); };

    FitResult r;
    r.sigma_theta_sq = best.x;
    r.chi2 = best.fx;
    r.dof = 4 * measured.size() - 1;  // S_QQ, S_PP, S_QP, S_PQ
    r.iterations = best.iterations;
    r.converged = best.converged;
    const double span = c.upper - c.lower;
    r.at_bound = best.x - c.lower <= 1e-6 * span || c.upper - best.x <= 1e-6 * span;

    if (c.weighting == Weighting::inverse_variance) {
        const double level = best.fx + interval_level(measured, model, best.x);
        r.ci_low = chi2(c.lower) < level ? c.lower : crossing(chi2, best.x, c.lower, level);
        r.ci_high = chi2(c.upper) < level ? c.upper : crossing(chi2, best.x, c.upper, level);
        r.ci_method = "delta-chi2";
        return r;
    }

    if (measured.batches.size() >= 2) {
        const std::size_t nb = measured.batches.size();
        std::mt19937_64 rng(detail::derive_seed(c.seed, 0xB007));
        std::uniform_int_distribution<std::size_t> pick(0, nb - 1);
        std::vector<double> est;
        est.reserve(c.n_bootstrap);
        SpectralTriple avg(measured.spectra.grid);
        for (std::size_t b = 0; b < c.n_bootstrap; ++b) {
            std::fill(avg.s_qq.begin(), avg.s_qq.end(), 0.0);
            std::fill(avg.s_pp.begin(), avg.s_pp.end(), 0.0);
            std::fill(avg.s_qp.begin(), avg.s_qp.end(), 0.0);
            for (std::size_t j = 0; j < nb; ++j) {
                const SpectralTriple& s = measured.batches[pick(rng)];
                for (std::size_t i = 0; i < avg.size(); ++i) {
                    avg.s_qq[i] += s.s_qq[i];
                    avg.s_pp[i] += s.s_pp[i];
                    avg.s_qp[i] += s.s_qp[i];
                }
            }
            for (std::size_t i = 0; i < avg.size(); ++i) {
                avg.s_qq[i] /= static_cast<double>(nb);
                avg.s_pp[i] /= static_cast<double>(nb);
                avg.s_qp[i] /= static_cast<double>(nb);
            }
            est.push_back(fit_data(avg).x);
        }
        std::sort(est.begin(), est.end());
        auto quant = [&](double q) {
            const double pos = q * static_cast<double>(est.size() - 1);
            const auto i = static_cast<std::size_t>(pos);
            const double f = pos - static_cast<double>(i);
            return i + 1 < est.size() ? est[i] + f * (est[i + 1] - est[i]) : est.back();
        };
        r.ci_low = quant(0.158655);
        r.ci_high = quant(0.841345);
        r.ci_method = "bootstrap";
        return r;
    }

    const double h = std::max(1e-6, 1e-3 * std::abs(best.x));
    const double x0 = std::clamp(best.x, c.lower + h, c.upper - h);
    const double curv = (chi2(x0 + h) - 2.0 * chi2(x0) + chi2(x0 - h)) / (h * h);
    const double scale = r.dof > 0 ? best.fx / static_cast<double>(r.dof) : 1.0;
    const double sd = curv > 0 ? std::sqrt(2.0 * scale / curv) : std::numeric_limits<double>::infinity();
    r.ci_low = std::max(c.lower, best.x - sd);
    r.ci_high = std::min(c.upper, best.x + sd);
    r.ci_method = "curvature";
    return r;
}

double fit_alignment(const EstimatedCovariance& measured, const SpectralTriple& model) {
    check_inputs(measured, model);
    auto cost = [&](double theta) {
        const SpectralTriple r = rotate_covariance(measured.spectra, theta);
        double acc = 0.0;
        for (std::size_t i = 0; i < r.size(); ++i) {
            const double a = r.s_qq[i] - model.s_qq[i];
            const double b = r.s_pp[i] - model.s_pp[i];
            const double d = r.s_qp[i] - model.s_qp[i];
            acc += a * a + b * b + 2.0 * d * d;
        }
        return acc;
    };
    // Covariance rotations are pi-periodic; scan coarsely then refine.
    constexpr int n_scan = 360;
    const double pi = std::numbers::pi;
    double best_t = 0.0, best_f = std::numeric_limits<double>::infinity();
    for (int k = 0; k < n_scan; ++k) {
        const double t = -0.5 * pi + pi * k / n_scan;
        const double f = cost(t);
        if (f < best_f) best_f = f, best_t = t;
    }
    const double step = pi / n_scan;
    return minimize_bounded(cost, best_t - step, best_t + step, 1e-10, 200).x;
}

}  // namespace osq
