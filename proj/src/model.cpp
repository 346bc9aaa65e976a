#include "osq/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "osq/errors.hpp"

namespace osq {

namespace {

bool on_pole(double omega, double omega_j) {
    return std::abs(std::abs(omega) - omega_j) <= 4.0 * std::numeric_limits<double>::epsilon() * omega_j;
}

// g_x^2 chi_x + g_y^2 chi_y, even in omega.
double coupling_sum(double omega, const SystemParams& p) {
    return p.g_x * p.g_x * mech_susceptibility(omega, p.omega_x) +
           p.g_y * p.g_y * mech_susceptibility(omega, p.omega_y);
}

}  // namespace

FrequencyGrid::FrequencyGrid(std::vector<double> omega) : omega_(std::move(omega)) {
    for (std::size_t i = 0; i < omega_.size(); ++i) {
        if (!std::isfinite(omega_[i])) throw PreconditionError("frequency grid contains a non-finite value");
        if (i > 0 && !(omega_[i] > omega_[i - 1])) {
            throw PreconditionError("frequency grid must be strictly increasing");
        }
    }
}

FrequencyGrid FrequencyGrid::linear_hz(double f_start_hz, double f_stop_hz, std::size_t n) {
    if (n < 2 || !(f_stop_hz > f_start_hz)) {
        throw PreconditionError("linear grid needs n >= 2 and f_stop > f_start");
    }
    std::vector<double> w(n);
    const double step = (f_stop_hz - f_start_hz) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) w[i] = hz_to_rad(f_start_hz + step * static_cast<double>(i));
    return FrequencyGrid(std::move(w));
}

void FrequencyGrid::check_poles(const SystemParams& p) const {
    for (double w : omega_) {
        if (on_pole(w, p.omega_x) || on_pole(w, p.omega_y)) {
            std::ostringstream os;
            os << "frequency grid hits a bare mechanical resonance at " << rad_to_hz(w) << " Hz";
            throw PoleError(os.str());
        }
    }
}

FrequencyGrid FrequencyGrid::avoiding_poles(const SystemParams& p) const {
    std::vector<double> w = omega_;
    for (double& v : w) v = off_pole(v, p);
    return FrequencyGrid(std::move(w));
}

double off_pole(double omega, const SystemParams& p) {
    if (on_pole(omega, p.omega_x) || on_pole(omega, p.omega_y)) return omega + 1e-9 * std::abs(omega);
    return omega;
}

void SpectralTriple::check_shape() const {
    const auto n = grid.size();
    if (s_qq.size() != n || s_pp.size() != n || s_qp.size() != n) {
        throw PreconditionError("spectral triple columns do not match the grid length");
    }
}

double mech_susceptibility(double omega, double omega_j) {
    if (on_pole(omega, omega_j)) {
        std::ostringstream os;
        os << "mechanical susceptibility pole at " << rad_to_hz(omega) << " Hz";
        throw PoleError(os.str());
    }
    return omega_j / ((omega_j - omega) * (omega_j + omega));
}

cplx cavity_susceptibility(double omega, double delta, double kappa) {
    return 1.0 / cplx(0.5 * kappa, -(delta + omega));
}

double mechanical_forcing_weight(double omega, const SystemParams& p) {
    const double cx = mech_susceptibility(omega, p.omega_x);
    const double cy = mech_susceptibility(omega, p.omega_y);
    return 4.0 * (p.g_x * p.g_x * cx * cx * p.gamma_x + p.g_y * p.g_y * cy * cy * p.gamma_y);
}

TransferSet transfer_functions(double omega, const SystemParams& p) {
    // The denominator D(w) = 1 - 2i (chi_c(w) - chi_c*(-w)) G(w) satisfies
    // D*(-w) = D(w) because G is real and even, so one evaluation per sign
    // of omega covers both the +w and -w members.
    struct Half {
        cplx a_q, b_q, a_p, b_p;
    };
    const double root_kappa = std::sqrt(p.kappa);
    const double g_sum = coupling_sum(omega, p);
    auto half = [&](double w) {
        const cplx chi = cavity_susceptibility(w, p.delta, p.kappa);
        const cplx chi_mirror = std::conj(cavity_susceptibility(-w, p.delta, p.kappa));
        const cplx diff = chi - chi_mirror;
        const cplx sum = chi + chi_mirror;
        const cplx denom = 1.0 - 2.0 * cplx(0, 1) * diff * g_sum;
        Half h;
        h.a_q = cplx(0, 1) * root_kappa * diff / denom;
        h.a_p = root_kappa * sum / denom;
        h.b_q = p.kappa * chi / denom - 1.0;
        h.b_p = -cplx(0, 1) * (p.kappa * chi * (1.0 + 4.0 * cplx(0, 1) * chi_mirror * g_sum) / denom - 1.0);
        return h;
    };
    const Half pos = half(omega);
    const Half neg = half(-omega);
    return TransferSet{pos.a_q, pos.b_q, neg.b_q, pos.a_p, pos.b_p, neg.b_p};
}

SpectralTriple output_spectra(const FrequencyGrid& grid, const SystemParams& p) {
    p.validate();
    grid.check_poles(p);
    SpectralTriple s(grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double w = grid[i];
        const TransferSet t = transfer_functions(w, p);
        const double force = mechanical_forcing_weight(w, p);
        s.s_qq[i] = force * std::norm(t.a_q) + 0.5 * (std::norm(t.b_q_neg) + std::norm(t.b_q_pos));
        s.s_pp[i] = force * std::norm(t.a_p) + 0.5 * (std::norm(t.b_p_neg) + std::norm(t.b_p_pos));
        s.s_qp[i] = force * std::real(std::conj(t.a_q) * t.a_p) +
                    0.5 * std::real(std::conj(t.b_q_neg) * t.b_p_neg + std::conj(t.b_q_pos) * t.b_p_pos);
    }
    return s;
}

SpectralTriple apply_efficiency(SpectralTriple s, double eta_eff) {
    if (!(eta_eff > 0 && eta_eff <= 1)) throw PreconditionError("efficiency must lie in (0, 1]");
    s.check_shape();
    const double vac = 1.0 - eta_eff;
    for (std::size_t i = 0; i < s.size(); ++i) {
        s.s_qq[i] = eta_eff * s.s_qq[i] + vac;
        s.s_pp[i] = eta_eff * s.s_pp[i] + vac;
        s.s_qp[i] = eta_eff * s.s_qp[i];
    }
    return s;
}

SpectralTriple apply_efficiency(SpectralTriple s, const SystemParams& p) {
    return apply_efficiency(std::move(s), p.effective_eta());
}

MechanicalSpectra mechanical_spectra(const FrequencyGrid& grid, const SystemParams& p) {
    p.validate();
    grid.check_poles(p);
    MechanicalSpectra out{grid, std::vector<double>(grid.size()), std::vector<double>(grid.size())};
    const double root_kappa = std::sqrt(p.kappa);
    const double rg_x = std::sqrt(p.gamma_x);
    const double rg_y = std::sqrt(p.gamma_y);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double w = grid[i];
        const double chi_x = mech_susceptibility(w, p.omega_x);
        const double chi_y = mech_susceptibility(w, p.omega_y);
        const double g_sum = p.g_x * p.g_x * chi_x + p.g_y * p.g_y * chi_y;
        const cplx chi = cavity_susceptibility(w, p.delta, p.kappa);
        const cplx chi_mirror = std::conj(cavity_susceptibility(-w, p.delta, p.kappa));
        // Intracavity amplitude quadrature: Q_c = (C N + sqrt(k)(chi a + chi_mirror a^+)) / D
        const cplx c = cplx(0, 1) * (chi - chi_mirror);
        const cplx denom = 1.0 - 2.0 * c * g_sum;
        // Response of Q_c to each input channel.
        const cplx qc_xi_x = c * 2.0 * p.g_x * chi_x * rg_x / denom;
        const cplx qc_xi_y = c * 2.0 * p.g_y * chi_y * rg_y / denom;
        const cplx qc_a = root_kappa * chi / denom;
        const cplx qc_ad = root_kappa * chi_mirror / denom;

        auto spectrum = [&](double chi_j, double g_j, bool is_x) {
            // j(w) = 2 chi_j (g_j Q_c + sqrt(Gamma_j) xi_j)
            const double k = 2.0 * chi_j;
            const cplx xi_x = k * (g_j * qc_xi_x + (is_x ? rg_x : 0.0));
            const cplx xi_y = k * (g_j * qc_xi_y + (is_x ? 0.0 : rg_y));
            const cplx a = k * g_j * qc_a;
            const cplx ad = k * g_j * qc_ad;
            return std::norm(xi_x) + std::norm(xi_y) + 0.5 * (std::norm(a) + std::norm(ad));
        };
        out.s_xx[i] = spectrum(chi_x, p.g_x, true);
        out.s_yy[i] = spectrum(chi_y, p.g_y, false);
    }
    return out;
}

Occupancy occupancy(const FrequencyGrid& grid, const SystemParams& p, Mode mode, double warn_fraction) {
    if (grid.size() < 2) throw PreconditionError("occupancy needs at least two grid points");
    const MechanicalSpectra ms = mechanical_spectra(grid, p);
    const auto& s = mode == Mode::x ? ms.s_xx : ms.s_yy;
    const auto w = grid.omega();

    double integral = 0.0;
    for (std::size_t i = 1; i < s.size(); ++i) integral += 0.5 * (s[i] + s[i - 1]) * (w[i] - w[i - 1]);
    const bool one_sided = w.front() >= 0.0;
    if (one_sided) integral = 2.0 * (integral + s.front() * w.front());

    Occupancy occ;
    occ.variance = integral / two_pi;
    occ.n = 0.5 * (occ.variance - 1.0);
    const double peak = *std::max_element(s.begin(), s.end());
    double edge = s.back();
    if (!one_sided) edge = std::max(edge, s.front());
    occ.boundary_ratio = peak > 0 ? edge / peak : 0.0;
    occ.truncation_warning = occ.boundary_ratio > warn_fraction;
    return occ;
}

FrequencyGrid occupancy_grid(const SystemParams& p, double h_hz, double span_factor) {
    if (!(h_hz > 0) || !(span_factor > 1)) throw PreconditionError("occupancy grid needs h > 0, span > 1");
    const double top = span_factor * rad_to_hz(std::max({p.omega_x, p.omega_y, std::abs(p.delta), p.kappa}));
    const auto n = static_cast<std::size_t>(std::ceil(top / h_hz));
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) {
        double f = (static_cast<double>(i) + 0.5) * h_hz;
        // nudge off a bare pole; the integrand is regular there anyway
        for (double pole : {rad_to_hz(p.omega_x), rad_to_hz(p.omega_y)}) {
            if (std::abs(f - pole) < 1e-9 * pole) f += 1e-3 * h_hz;
        }
        w[i] = hz_to_rad(f);
    }
    return FrequencyGrid(std::move(w));
}

}  // namespace osq
