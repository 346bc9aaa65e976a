#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "osq/dsp.hpp"
#include "osq/model.hpp"
#include "osq/squeezing.hpp"

namespace osq {

/// freq_hz,s_qq,s_pp,s_qp with %.12g values.
void write_spectra_csv(const std::string& path, const SpectralTriple& s);
SpectralTriple read_spectra_csv(const std::string& path);

/// freq_hz,s_qq,s_pp,s_qp,se_qq,se_pp,se_qp
void write_covariance_csv(const std::string& path, const EstimatedCovariance& e);
EstimatedCovariance read_covariance_csv(const std::string& path);

/// freq_hz,s_opt,phase_rad
void write_optimal_csv(const std::string& path, const FrequencyGrid& g, const OptimalSpectrum& o);
/// Long format: freq_hz,phase_rad,value
void write_map_csv(const std::string& path, const SqueezingMap& m);

nlohmann::json bands_to_json(const BandReport& r);

struct PlotSeries {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

/// Minimal SVG line chart.
void write_line_plot_svg(const std::string& path, const std::string& title, const std::string& x_label,
                         const std::string& y_label, const std::vector<PlotSeries>& series,
                         double reference_line = 1.0);
/// Diverging heatmap of a squeezing map, blue below 1 and red above.
void write_map_svg(const std::string& path, const SqueezingMap& m, const std::string& title);

/// Written last by every CLI command.
struct RunManifest {
    std::string command;
    std::string version;
    std::vector<std::string> argv;
    std::vector<std::uint64_t> seeds;
    std::string config_text;
    std::vector<std::string> outputs;
    nlohmann::json results = nlohmann::json::object();
    nlohmann::json timings = nlohmann::json::object();

    void write(const std::string& path) const;
};

}  // namespace osq
