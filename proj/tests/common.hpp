#pragma once

#include <sstream>
#include <string>

#include "osq/params.hpp"

namespace osq::test {

inline const char* reproduction_text =
    "omega_x_hz = 121e3\n"
    "omega_y_hz = 109e3\n"
    "g_x_hz = 14.13e3\n"
    "g_y_hz = 10.37e3\n"
    "gamma_x_hz = 4.03e3\n"
    "gamma_y_hz = 3.05e3\n"
    "kappa_hz = 57e3\n"
    "delta_hz = -115e3\n"
    "eta = 0.32\n"
    "heterodyne_penalty = true\n"
    "sigma_theta_sq = 0.062\n";

inline SystemParams reproduction_params() {
    std::istringstream in(reproduction_text);
    return parse_config(in);
}

inline SystemParams with_delta_hz(SystemParams p, double delta_hz) {
    p.delta = hz_to_rad(delta_hz);
    return p;
}

}  // namespace osq::test
