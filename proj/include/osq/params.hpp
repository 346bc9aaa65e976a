#pragma once

#include <iosfwd>
#include <numbers>
#include <string>

namespace osq {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

inline constexpr double hz_to_rad(double f_hz) { return two_pi * f_hz; }
inline constexpr double rad_to_hz(double omega) { return omega / two_pi; }

/// Physical rates of the two-mode model plus detection parameters.
///
/// All rates and frequencies are angular (rad/s). Config files carry the
/// ordinary-frequency values (X/2pi, in Hz) and are converted on load.
/// The detuning is signed; the cooling regime has delta < 0.
struct SystemParams {
    double omega_x = 0.0;
    double omega_y = 0.0;
    double g_x = 0.0;
    double g_y = 0.0;
    double gamma_x = 0.0;
    double gamma_y = 0.0;
    double kappa = 0.0;
    double delta = 0.0;
    double eta = 1.0;
    bool heterodyne_penalty = false;
    double sigma_theta_sq = 0.0;

    /// eta/2 when the simultaneous-quadrature penalty applies, eta otherwise.
    double effective_eta() const { return heterodyne_penalty ? 0.5 * eta : eta; }

    /// Throws ConfigError when an invariant is violated.
    void validate() const;
};

/// Parses the flat `key = value` config format. Lines starting with '#' and
/// blank lines are ignored. Unknown or duplicate keys are errors.
///
/// Required keys: omega_x_hz omega_y_hz g_x_hz g_y_hz gamma_x_hz gamma_y_hz
/// kappa_hz delta_hz eta. Optional: heterodyne_penalty (default false),
/// sigma_theta_sq (default 0).
SystemParams parse_config(std::istream& in);
SystemParams load_config(const std::string& path);

/// Serializes back to the config format with round-trip precision.
std::string to_config_text(const SystemParams& p);

}  // namespace osq
