#include "osq/params.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "osq/errors.hpp"

namespace osq {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

double parse_number(const std::string& key, const std::string& text) {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (end == text.c_str() || *end != '\0' || errno == ERANGE || !std::isfinite(v)) {
        throw ConfigError("config key '" + key + "': not a finite number: '" + text + "'");
    }
    return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
    if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
    if (text == "false" || text == "0" || text == "no" || text == "off") return false;
    throw ConfigError("config key '" + key + "': not a boolean: '" + text + "'");
}

}  // namespace

void SystemParams::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw ConfigError(what);
    };
    require(std::isfinite(omega_x) && omega_x > 0, "omega_x must be > 0");
    require(std::isfinite(omega_y) && omega_y > 0, "omega_y must be > 0");
    require(std::isfinite(kappa) && kappa > 0, "kappa must be > 0");
    // Zero coupling and zero heating are legitimate limits (shot-noise and
    // backaction-only checks), so only negative values are rejected.
    require(std::isfinite(g_x) && g_x >= 0, "g_x must be >= 0");
    require(std::isfinite(g_y) && g_y >= 0, "g_y must be >= 0");
    require(std::isfinite(gamma_x) && gamma_x >= 0, "gamma_x must be >= 0");
    require(std::isfinite(gamma_y) && gamma_y >= 0, "gamma_y must be >= 0");
    require(std::isfinite(delta), "delta must be finite");
    require(std::isfinite(eta) && eta > 0 && eta <= 1, "eta must lie in (0, 1]");
    require(std::isfinite(sigma_theta_sq) && sigma_theta_sq >= 0, "sigma_theta_sq must be >= 0");
}

SystemParams parse_config(std::istream& in) {
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
        }
        auto key = trim(line.substr(0, eq));
        auto value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) {
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key or value");
        }
        if (!kv.emplace(key, value).second) {
            throw ConfigError("config key '" + key + "' given twice");
        }
    }

    SystemParams p;
    auto take = [&](const char* key, bool required) -> const std::string* {
        auto it = kv.find(key);
        if (it == kv.end()) {
            if (required) throw ConfigError(std::string("config key '") + key + "' is required");
            return nullptr;
        }
        return &it->second;
    };
    auto hz = [&](const char* key) { return hz_to_rad(parse_number(key, *take(key, true))); };

    p.omega_x = hz("omega_x_hz");
    p.omega_y = hz("omega_y_hz");
    p.g_x = hz("g_x_hz");
    p.g_y = hz("g_y_hz");
    p.gamma_x = hz("gamma_x_hz");
    p.gamma_y = hz("gamma_y_hz");
    p.kappa = hz("kappa_hz");
    p.delta = hz("delta_hz");
    p.eta = parse_number("eta", *take("eta", true));
    if (auto* v = take("heterodyne_penalty", false)) p.heterodyne_penalty = parse_bool("heterodyne_penalty", *v);
    if (auto* v = take("sigma_theta_sq", false)) p.sigma_theta_sq = parse_number("sigma_theta_sq", *v);

    static const char* known[] = {"omega_x_hz", "omega_y_hz", "g_x_hz",   "g_y_hz",
                                  "gamma_x_hz", "gamma_y_hz", "kappa_hz", "delta_hz",
                                  "eta",        "heterodyne_penalty",     "sigma_theta_sq"};
    for (const auto& [key, _] : kv) {
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) throw ConfigError("unknown config key '" + key + "'");
    }

    p.validate();
    return p;
}

SystemParams load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    return parse_config(in);
}

std::string to_config_text(const SystemParams& p) {
    std::ostringstream os;
    os.precision(17);
    os << "omega_x_hz = " << rad_to_hz(p.omega_x) << '\n'
       << "omega_y_hz = " << rad_to_hz(p.omega_y) << '\n'
       << "g_x_hz = " << rad_to_hz(p.g_x) << '\n'
       << "g_y_hz = " << rad_to_hz(p.g_y) << '\n'
       << "gamma_x_hz = " << rad_to_hz(p.gamma_x) << '\n'
       << "gamma_y_hz = " << rad_to_hz(p.gamma_y) << '\n'
       << "kappa_hz = " << rad_to_hz(p.kappa) << '\n'
       << "delta_hz = " << rad_to_hz(p.delta) << '\n'
       << "eta = " << p.eta << '\n'
       << "heterodyne_penalty = " << (p.heterodyne_penalty ? "true" : "false") << '\n'
       << "sigma_theta_sq = " << p.sigma_theta_sq << '\n';
    return os.str();
}

}  // namespace osq
