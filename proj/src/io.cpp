#include "osq/io.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "osq/errors.hpp"
#include "osq/params.hpp"

namespace osq {

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path);
    if (!f) throw Error("cannot open " + path + " for writing");
    return f;
}

std::vector<std::vector<double>> read_table(const std::string& path, const std::string& header,
                                            std::size_t min_cols) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open " + path);
    std::string line;
    if (!std::getline(f, line) || line.rfind(header, 0) != 0) {
        throw ConfigError(path + ": expected header starting with '" + header + "'");
    }
    std::vector<std::vector<double>> rows;
    std::size_t lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
            } catch (const std::exception&) {
                throw ConfigError(fmt::format("{}:{}: bad number '{}'", path, lineno, cell));
            }
        }
        if (row.size() < min_cols) throw ConfigError(fmt::format("{}:{}: too few columns", path, lineno));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ConfigError(path + ": no data rows");
    return rows;
}

SpectralTriple triple_from(const std::vector<std::vector<double>>& rows) {
    std::vector<double> w;
    for (const auto& r : rows) w.push_back(hz_to_rad(r[0]));
    SpectralTriple s{FrequencyGrid(std::move(w))};
    for (std::size_t i = 0; i < rows.size(); ++i) {
        s.s_qq[i] = rows[i][1];
        s.s_pp[i] = rows[i][2];
        s.s_qp[i] = rows[i][3];
    }
    return s;
}

}  // namespace

void write_spectra_csv(const std::string& path, const SpectralTriple& s) {
    s.check_shape();
    auto f = open_out(path);
    f << "freq_hz,s_qq,s_pp,s_qp\n";
    for (std::size_t i = 0; i < s.size(); ++i) {
        f << fmt::format("{:.12g},{:.12g},{:.12g},{:.12g}\n", s.grid.hz(i), s.s_qq[i], s.s_pp[i], s.s_qp[i]);
    }
}

SpectralTriple read_spectra_csv(const std::string& path) {
    return triple_from(read_table(path, "freq_hz,s_qq,s_pp,s_qp", 4));
}

void write_covariance_csv(const std::string& path, const EstimatedCovariance& e) {
    e.spectra.check_shape();
    auto f = open_out(path);
    f << "freq_hz,s_qq,s_pp,s_qp,se_qq,se_pp,se_qp\n";
    for (std::size_t i = 0; i < e.size(); ++i) {
        f << fmt::format("{:.12g},{:.12g},{:.12g},{:.12g},{:.12g},{:.12g},{:.12g}\n", e.spectra.grid.hz(i),
                         e.spectra.s_qq[i], e.spectra.s_pp[i], e.spectra.s_qp[i], e.stderr_qq[i], e.stderr_pp[i],
                         e.stderr_qp[i]);
    }
}

EstimatedCovariance read_covariance_csv(const std::string& path) {
    const auto rows = read_table(path, "freq_hz,s_qq,s_pp,s_qp,se_qq,se_pp,se_qp", 7);
    EstimatedCovariance e;
    e.spectra = triple_from(rows);
    for (const auto& r : rows) {
        e.stderr_qq.push_back(r[4]);
        e.stderr_pp.push_back(r[5]);
        e.stderr_qp.push_back(r[6]);
    }
    return e;
}

void write_optimal_csv(const std::string& path, const FrequencyGrid& g, const OptimalSpectrum& o) {
    auto f = open_out(path);
    f << "freq_hz,s_opt,phase_rad\n";
    for (std::size_t i = 0; i < g.size(); ++i) {
        f << fmt::format("{:.12g},{:.12g},{:.12g}\n", g.hz(i), o.value[i], o.phase[i]);
    }
}

void write_map_csv(const std::string& path, const SqueezingMap& m) {
    auto f = open_out(path);
    f << "freq_hz,phase_rad,value\n";
    for (std::size_t j = 0; j < m.phases.size(); ++j) {
        for (std::size_t i = 0; i < m.grid.size(); ++i) {
            f << fmt::format("{:.12g},{:.12g},{:.12g}\n", m.grid.hz(i), m.phases[j], m.at(j, i));
        }
    }
}

nlohmann::json bands_to_json(const BandReport& r) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& b : r.bands) {
        nlohmann::json j = {{"f_low_hz", b.f_low_hz},
                            {"f_high_hz", b.f_high_hz},
                            {"min_value", b.min_value},
                            {"argmin_hz", b.argmin_hz}};
        j["argmin_phase"] = std::isnan(b.argmin_phase) ? nlohmann::json() : nlohmann::json(b.argmin_phase);
        out.push_back(j);
    }
    return out;
}

namespace {

constexpr double plot_w = 800, plot_h = 500, margin_l = 80, margin_r = 20, margin_t = 40, margin_b = 60;
const char* const palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"};

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            default: out += c;
        }
    }
    return out;
}

void axes(std::ostream& f, const std::string& title, const std::string& xl, const std::string& yl, double x0,
          double x1, double y0, double y1) {
    const double iw = plot_w - margin_l - margin_r, ih = plot_h - margin_t - margin_b;
    f << fmt::format(R"(<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>)", margin_l,
                     margin_t, iw, ih)
      << '\n';
    f << fmt::format(R"(<text x="{}" y="25" text-anchor="middle" font-size="16">{}</text>)", plot_w / 2,
                     escape(title))
      << '\n';
    f << fmt::format(R"(<text x="{}" y="{}" text-anchor="middle" font-size="13">{}</text>)",
                     margin_l + iw / 2, plot_h - 15, escape(xl))
      << '\n';
    f << fmt::format(R"svg(<text x="18" y="{}" text-anchor="middle" font-size="13" transform="rotate(-90 18 {})">{}</text>)svg",
                     margin_t + ih / 2, margin_t + ih / 2, escape(yl))
      << '\n';
    for (int k = 0; k <= 4; ++k) {
        const double fx = x0 + (x1 - x0) * k / 4, fy = y0 + (y1 - y0) * k / 4;
        const double px = margin_l + iw * k / 4, py = margin_t + ih - ih * k / 4;
        f << fmt::format(R"(<text x="{}" y="{}" text-anchor="middle" font-size="11">{:.4g}</text>)", px,
                         margin_t + ih + 16, fx)
          << '\n';
        f << fmt::format(R"(<text x="{}" y="{}" text-anchor="end" font-size="11">{:.4g}</text>)", margin_l - 5,
                         py + 4, fy)
          << '\n';
    }
}

}  // namespace

void write_line_plot_svg(const std::string& path, const std::string& title, const std::string& x_label,
                         const std::string& y_label, const std::vector<PlotSeries>& series, double reference_line) {
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size()) throw PreconditionError("plot series x/y lengths differ");
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            x0 = std::min(x0, s.x[i]), x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.y[i]), y1 = std::max(y1, s.y[i]);
        }
    }
    if (!(x1 > x0)) throw PreconditionError("nothing to plot");
    if (std::isfinite(reference_line)) y0 = std::min(y0, reference_line), y1 = std::max(y1, reference_line);
    if (!(y1 > y0)) y0 -= 0.5, y1 += 0.5;
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad, y1 += pad;
    const double iw = plot_w - margin_l - margin_r, ih = plot_h - margin_t - margin_b;
    auto px = [&](double x) { return margin_l + iw * (x - x0) / (x1 - x0); };
    auto py = [&](double y) { return margin_t + ih * (1.0 - (y - y0) / (y1 - y0)); };

    auto f = open_out(path);
    f << fmt::format(R"(<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" font-family="sans-serif">)",
                     plot_w, plot_h)
      << '\n';
    axes(f, title, x_label, y_label, x0, x1, y0, y1);
    if (std::isfinite(reference_line)) {
        f << fmt::format(R"(<line x1="{}" x2="{}" y1="{:.2f}" y2="{:.2f}" stroke="gray" stroke-dasharray="4 3"/>)",
                         margin_l, margin_l + iw, py(reference_line), py(reference_line))
          << '\n';
    }
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const char* color = palette[k % std::size(palette)];
        f << R"(<polyline fill="none" stroke-width="1.5" stroke=")" << color << R"(" points=")";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (std::isfinite(s.y[i])) f << fmt::format("{:.2f},{:.2f} ", px(s.x[i]), py(s.y[i]));
        }
        f << "\"/>\n";
        f << fmt::format(R"(<text x="{}" y="{}" font-size="12" fill="{}">{}</text>)", margin_l + 10,
                         margin_t + 16 + 15 * k, color, escape(s.name))
          << '\n';
    }
    f << "</svg>\n";
}

void write_map_svg(const std::string& path, const SqueezingMap& m, const std::string& title) {
    const std::size_t nf = m.grid.size(), np = m.phases.size();
    if (nf < 2 || np < 1) throw PreconditionError("map too small to plot");
    double lo = 1.0, hi = 1.0;
    for (double v : m.values) lo = std::min(lo, v), hi = std::max(hi, v);
    const double iw = plot_w - margin_l - margin_r, ih = plot_h - margin_t - margin_b;
    auto color = [&](double v) {
        // white at 1, saturated blue at the minimum and red at the maximum
        double t = 0.0;
        int r = 255, g = 255, b = 255;
        if (v < 1.0 && lo < 1.0) {
            t = (1.0 - v) / (1.0 - lo);
            r = g = static_cast<int>(255 * (1 - t));
        } else if (v > 1.0 && hi > 1.0) {
            t = (v - 1.0) / (hi - 1.0);
            g = b = static_cast<int>(255 * (1 - t));
        }
        return fmt::format("#{:02x}{:02x}{:02x}", r, g, b);
    };
    auto f = open_out(path);
    f << fmt::format(R"(<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" font-family="sans-serif">)",
                     plot_w, plot_h)
      << '\n';
    // Columns are decimated for display; each cell shows the extreme (furthest from 1) value it covers.
    constexpr std::size_t max_cols = 512;
    const std::size_t stride = (nf + max_cols - 1) / max_cols;
    const std::size_t ncols = (nf + stride - 1) / stride;
    const double cw = iw / static_cast<double>(ncols), ch = ih / static_cast<double>(np);
    for (std::size_t j = 0; j < np; ++j) {
        for (std::size_t c = 0; c < ncols; ++c) {
            double v = 1.0;
            for (std::size_t i = c * stride; i < std::min(nf, (c + 1) * stride); ++i) {
                if (std::abs(m.at(j, i) - 1.0) > std::abs(v - 1.0)) v = m.at(j, i);
            }
            f << fmt::format(R"(<rect x="{:.1f}" y="{:.1f}" width="{:.1f}" height="{:.1f}" fill="{}"/>)",
                             margin_l + cw * c, margin_t + ih - ch * (j + 1), cw + 0.3, ch + 0.3, color(v))
              << '\n';
        }
    }
    axes(f, fmt::format("{} (min {:.4g}, max {:.4g})", title, lo, hi), "frequency (Hz)", "phase (rad)",
         m.grid.hz(0), m.grid.hz(nf - 1), m.phases.front(), m.phases.back());
    f << "</svg>\n";
}

void RunManifest::write(const std::string& path) const {
    nlohmann::json j;
    j["command"] = command;
    j["version"] = version;
    j["argv"] = argv;
    j["seeds"] = seeds;
    j["config"] = config_text;
    j["outputs"] = outputs;
    j["results"] = results;
    j["timings_s"] = timings;
    auto f = open_out(path);
    f << j.dump(2) << '\n';
}

}  // namespace osq
