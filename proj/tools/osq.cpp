// Command-line front end: model spectra, squeezing maps, synthetic records,
// record analysis, phase-noise fits and optimal-quadrature reports.

#include <CLI11.hpp>
#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "osq/errors.hpp"
#include "osq/fit.hpp"
#include "osq/io.hpp"
#include "osq/params.hpp"
#include "osq/pipeline.hpp"
#include "osq/squeezing.hpp"

#ifndef OSQ_VERSION
#define OSQ_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using namespace osq;

namespace {

struct GridSpec {
    double f_start = 50e3;
    double f_stop = 170e3;
    std::size_t n = 2048;
};

GridSpec parse_grid(const std::string& s) {
    GridSpec g;
    char c1 = 0, c2 = 0;
    std::istringstream in(s);
    long long n = 0;
    if (!(in >> g.f_start >> c1 >> g.f_stop >> c2 >> n) || c1 != ':' || c2 != ':' || !in.eof() || n < 2) {
        throw ConfigError("--grid expects F_START:F_STOP:N with N >= 2, got '" + s + "'");
    }
    g.n = static_cast<std::size_t>(n);
    if (!(g.f_stop > g.f_start) || !(g.f_start >= 0)) throw ConfigError("--grid needs 0 <= F_START < F_STOP");
    return g;
}

std::pair<double, double> parse_band(const std::string& s) {
    double lo = 0, hi = 0;
    char c = 0;
    std::istringstream in(s);
    if (!(in >> lo >> c >> hi) || c != ':' || !in.eof() || !(hi > lo) || lo < 0) {
        throw ConfigError("--band expects F_LOW:F_HIGH with 0 <= F_LOW < F_HIGH, got '" + s + "'");
    }
    return {lo, hi};
}

class Run {
public:
    Run(std::string command, const std::string& out_dir, int argc, char** argv) : dir_(out_dir) {
        fs::create_directories(dir_);
        manifest_.command = std::move(command);
        manifest_.version = OSQ_VERSION;
        for (int i = 0; i < argc; ++i) manifest_.argv.emplace_back(argv[i]);
        start_ = std::chrono::steady_clock::now();
    }

    std::string path(const std::string& name) {
        manifest_.outputs.push_back(name);
        return (dir_ / name).string();
    }
    void lap(const std::string& what) {
        const auto now = std::chrono::steady_clock::now();
        manifest_.timings[what] = std::chrono::duration<double>(now - start_).count();
    }
    RunManifest& manifest() { return manifest_; }
    void finish() {
        lap("total");
        manifest_.write((dir_ / "manifest.json").string());
    }

private:
    fs::path dir_;
    RunManifest manifest_;
    std::chrono::steady_clock::time_point start_;
};

SpectralTriple model_triple(const SystemParams& p, const GridSpec& g, bool phase_noise) {
    const FrequencyGrid grid = FrequencyGrid::linear_hz(g.f_start, g.f_stop, g.n);
    SpectralTriple s = apply_efficiency(output_spectra(grid, p), p);
    return phase_noise ? dephase_covariance(s, p.sigma_theta_sq) : s;
}

std::vector<double> hz_axis(const FrequencyGrid& g) {
    std::vector<double> x(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) x[i] = g.hz(i) * 1e-3;
    return x;
}

nlohmann::json params_json(const SystemParams& p) {
    return {{"omega_x_hz", rad_to_hz(p.omega_x)},   {"omega_y_hz", rad_to_hz(p.omega_y)},
            {"g_x_hz", rad_to_hz(p.g_x)},           {"g_y_hz", rad_to_hz(p.g_y)},
            {"gamma_x_hz", rad_to_hz(p.gamma_x)},   {"gamma_y_hz", rad_to_hz(p.gamma_y)},
            {"kappa_hz", rad_to_hz(p.kappa)},       {"delta_hz", rad_to_hz(p.delta)},
            {"eta", p.eta},                         {"heterodyne_penalty", p.heterodyne_penalty},
            {"effective_eta", p.effective_eta()},   {"sigma_theta_sq", p.sigma_theta_sq}};
}

void write_json(const std::string& path, const nlohmann::json& j) {
    std::ofstream f(path);
    if (!f) throw Error("cannot open " + path + " for writing");
    f << j.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-mode levitated optomechanics: squeezing spectra, synthetic records and analysis"};
    app.require_subcommand(1);
    app.set_version_flag("--version", OSQ_VERSION);

    std::string config_path, out_dir = "out", grid_text = "50000:170000:2048", band_text = "50000:170000";
    std::string data_path, trace_path, reference_path;
    std::size_t n_phases = default_map_phases;
    std::uint64_t seed = 1;
    bool no_phase_noise = false;
    SynthConfig synth;
    double reference_duration = 0.0;
    AnalysisConfig analysis;
    double rbw = 0.0;
    FitConfig fit_cfg;
    bool uniform = false, align = false;

    auto add_config = [&](CLI::App* s, bool required) {
        auto* o = s->add_option("--config", config_path, "system parameter file")->check(CLI::ExistingFile);
        if (required) o->required();
        s->add_option("--out", out_dir, "output directory")->capture_default_str();
    };

    auto* model = app.add_subcommand("model-spectra", "analytic output spectra on a frequency grid");
    add_config(model, true);
    model->add_option("--grid", grid_text, "F_START:F_STOP:N in Hz")->capture_default_str();
    model->add_flag("--no-phase-noise", no_phase_noise, "omit phase-noise dephasing");

    auto* map = app.add_subcommand("map", "quadrature spectrum over detection phase and frequency");
    add_config(map, true);
    map->add_option("--grid", grid_text, "F_START:F_STOP:N in Hz")->capture_default_str();
    map->add_option("--phases", n_phases, "phase samples over [0, pi)")->capture_default_str()->check(
        CLI::Range(2, 100000));
    map->add_flag("--no-phase-noise", no_phase_noise, "omit phase-noise dephasing");

    auto* sim = app.add_subcommand("simulate", "synthetic heterodyne record");
    add_config(sim, true);
    sim->add_option("--seed", seed, "random seed")->capture_default_str();
    sim->add_option("--duration", synth.duration, "record length, s")->capture_default_str();
    sim->add_option("--sample-rate", synth.sample_rate, "Hz")->capture_default_str();
    sim->add_option("--beat", synth.beat_freq, "beat frequency, Hz")->capture_default_str();
    sim->add_option("--band-limit", synth.band_limit, "quadrature support, Hz")->capture_default_str();
    sim->add_option("--jitter-bandwidth", synth.jitter_bandwidth, "phase jitter corner, Hz")->capture_default_str();
    sim->add_option("--reference-duration", reference_duration, "also write a vacuum reference record, s");
    sim->add_flag("--no-phase-noise", no_phase_noise, "no phase jitter");

    auto* ana = app.add_subcommand("analyze", "lock-in demodulation and Welch covariance estimate");
    ana->add_option("--trace", trace_path, "heterodyne record")->required()->check(CLI::ExistingFile);
    ana->add_option("--reference", reference_path, "vacuum reference record")->check(CLI::ExistingFile);
    ana->add_option("--out", out_dir, "output directory")->capture_default_str();
    ana->add_option("--beat", synth.beat_freq, "beat frequency, Hz")->capture_default_str();
    ana->add_option("--band", band_text, "F_LOW:F_HIGH kept in the output, Hz")->capture_default_str();
    ana->add_option("--lp-corner", analysis.lp_corner, "lock-in low-pass corner, Hz")->capture_default_str();
    ana->add_option("--segment", analysis.welch.segment_length, "Welch segment length")->capture_default_str();
    ana->add_option("--rbw", rbw, "resolution bandwidth, Hz (overrides --segment)");
    ana->add_option("--batches", analysis.welch.n_batches, "batches for standard errors")->capture_default_str();
    ana->add_option("--smoothing", analysis.smoothing_bins, "reference smoothing, bins")->capture_default_str();

    auto* fitc = app.add_subcommand("fit-phase-noise", "fit the phase-noise variance to measured spectra");
    add_config(fitc, true);
    fitc->add_option("--data", data_path, "covariance CSV from analyze")->required()->check(CLI::ExistingFile);
    fitc->add_option("--lower", fit_cfg.lower, "lower bound, rad^2")->capture_default_str();
    fitc->add_option("--upper", fit_cfg.upper, "upper bound, rad^2")->capture_default_str();
    fitc->add_option("--seed", seed, "bootstrap seed")->capture_default_str();
    fitc->add_flag("--uniform", uniform, "unweighted least squares");
    fitc->add_flag("--align", align, "fit a global phase-reference rotation first");

    auto* opt = app.add_subcommand("optimal", "optimal quadrature spectrum and squeezing bands");
    add_config(opt, false);
    opt->add_option("--data", data_path, "covariance CSV instead of the model")->check(CLI::ExistingFile);
    opt->add_option("--grid", grid_text, "F_START:F_STOP:N in Hz")->capture_default_str();
    opt->add_flag("--no-phase-noise", no_phase_noise, "omit phase-noise dephasing");

    CLI11_PARSE(app, argc, argv);

    try {
        if (model->parsed()) {
            Run run("model-spectra", out_dir, argc, argv);
            const SystemParams p = load_config(config_path);
            run.manifest().config_text = to_config_text(p);
            const GridSpec g = parse_grid(grid_text);
            const SpectralTriple s = model_triple(p, g, !no_phase_noise);
            write_spectra_csv(run.path("spectra.csv"), s);
            write_json(run.path("params.json"), params_json(p));
            const auto x = hz_axis(s.grid);
            write_line_plot_svg(run.path("spectra.svg"), "Output spectra", "frequency (kHz)", "shot-noise units",
                                {{"S_QQ", x, s.s_qq}, {"S_PP", x, s.s_pp}, {"S_QP", x, s.s_qp}}, 1.0);
            run.finish();
        } else if (map->parsed()) {
            Run run("map", out_dir, argc, argv);
            const SystemParams p = load_config(config_path);
            run.manifest().config_text = to_config_text(p);
            const GridSpec g = parse_grid(grid_text);
            const SpectralTriple s = model_triple(p, g, false);
            const SqueezingMap m = build_map(s, no_phase_noise ? 0.0 : p.sigma_theta_sq, n_phases);
            write_map_csv(run.path("map.csv"), m);
            write_map_svg(run.path("map.svg"), m, "Quadrature spectrum");
            run.lap("map");
            run.finish();
        } else if (sim->parsed()) {
            Run run("simulate", out_dir, argc, argv);
            const SystemParams p = load_config(config_path);
            run.manifest().config_text = to_config_text(p);
            synth.seed = seed;
            synth.jitter_sigma_sq = no_phase_noise ? 0.0 : p.sigma_theta_sq;
            run.manifest().seeds = {seed};
            run.manifest().results["synth"] = {{"sample_rate", synth.sample_rate},
                                               {"duration", synth.duration},
                                               {"beat_freq", synth.beat_freq},
                                               {"band_limit", synth.band_limit},
                                               {"jitter_sigma_sq", synth.jitter_sigma_sq},
                                               {"jitter_bandwidth", synth.jitter_bandwidth}};
            {
                HeterodyneRecord r = simulate_record(p, synth);
                write_trace(run.path("record.osqt"), r.trace);
            }
            run.lap("record");
            if (reference_duration > 0) {
                const SynthConfig rc = reference_config(synth, reference_duration);
                const HeterodyneRecord r = simulate_record(vacuum_params(p), rc);
                write_trace(run.path("reference.osqt"), r.trace);
                run.lap("reference");
            }
            run.finish();
        } else if (ana->parsed()) {
            Run run("analyze", out_dir, argc, argv);
            std::tie(analysis.band_low, analysis.band_high) = parse_band(band_text);
            auto load = [&](const std::string& path) {
                HeterodyneRecord r;
                r.trace = read_trace(path);
                r.nominal_beat_freq = synth.beat_freq;
                if (rbw > 0) analysis.welch.segment_length = segment_length_for_resolution(r.trace.sample_rate, rbw);
                return r;
            };
            EstimatedCovariance est = analyze_record(load(trace_path), analysis);
            run.lap("record");
            if (!reference_path.empty()) {
                const EstimatedCovariance ref = analyze_record(load(reference_path), analysis);
                est = calibrate_shot_noise(est, ref, analysis.smoothing_bins);
                run.manifest().results["calibration"] = "reference";
                run.lap("reference");
            } else {
                std::cerr << "warning: no reference record; spectra are uncalibrated (unity gain)\n";
                run.manifest().results["calibration"] = "unity";
            }
            run.manifest().results["n_segments"] = est.n_segments;
            run.manifest().results["segment_length"] = analysis.welch.segment_length;
            write_covariance_csv(run.path("covariance.csv"), est);
            const auto x = hz_axis(est.spectra.grid);
            write_line_plot_svg(run.path("covariance.svg"), "Estimated spectra", "frequency (kHz)",
                                "shot-noise units",
                                {{"S_QQ", x, est.spectra.s_qq}, {"S_PP", x, est.spectra.s_pp},
                                 {"S_QP", x, est.spectra.s_qp}},
                                1.0);
            run.finish();
        } else if (fitc->parsed()) {
            Run run("fit-phase-noise", out_dir, argc, argv);
            const SystemParams p = load_config(config_path);
            run.manifest().config_text = to_config_text(p);
            run.manifest().seeds = {seed};
            EstimatedCovariance data = read_covariance_csv(data_path);
            SpectralTriple model = apply_efficiency(output_spectra(data.spectra.grid.avoiding_poles(p), p), p);
            model.grid = data.spectra.grid;
            double theta = 0.0;
            if (align) {
                theta = fit_alignment(data, model);
                data = rotate_estimate(data, theta);
            }
            fit_cfg.seed = seed;
            fit_cfg.weighting = uniform ? Weighting::uniform : Weighting::inverse_variance;
            const FitResult f = fit_phase_noise(data, model, fit_cfg);
            const double target = p.sigma_theta_sq;
            nlohmann::json j = {{"sigma_theta_sq", f.sigma_theta_sq},
                                {"ci_low", f.ci_low},
                                {"ci_high", f.ci_high},
                                {"ci_method", f.ci_method},
                                {"chi2", f.chi2},
                                {"dof", f.dof},
                                {"chi2_per_dof", f.chi2 / static_cast<double>(f.dof)},
                                {"converged", f.converged},
                                {"at_bound", f.at_bound},
                                {"iterations", f.iterations},
                                {"alignment_rad", theta},
                                {"config_sigma_theta_sq", target}};
            if (target > 0) j["relative_deviation"] = (f.sigma_theta_sq - target) / target;
            write_json(run.path("fit.json"), j);
            run.manifest().results = j;
            const SpectralTriple best = dephase_covariance(model, f.sigma_theta_sq);
            const auto x = hz_axis(data.spectra.grid);
            write_line_plot_svg(run.path("fit.svg"), fmt::format("Phase-noise fit, sigma^2 = {:.4g}", f.sigma_theta_sq),
                                "frequency (kHz)", "shot-noise units",
                                {{"S_QQ data", x, data.spectra.s_qq}, {"S_QQ fit", x, best.s_qq},
                                 {"S_PP data", x, data.spectra.s_pp}, {"S_PP fit", x, best.s_pp},
                                 {"S_QP data", x, data.spectra.s_qp}, {"S_QP fit", x, best.s_qp}},
                                1.0);
            std::cout << fmt::format("sigma_theta^2 = {:.5g} [{:.5g}, {:.5g}] ({}), chi2/dof = {:.4g}\n",
                                     f.sigma_theta_sq, f.ci_low, f.ci_high, f.ci_method,
                                     f.chi2 / static_cast<double>(f.dof));
            if (target > 0) {
                std::cout << fmt::format("config value {:.5g}, deviation {:+.1f}%\n", target,
                                         100.0 * (f.sigma_theta_sq - target) / target);
            }
            run.finish();
        } else if (opt->parsed()) {
            Run run("optimal", out_dir, argc, argv);
            if (config_path.empty() == data_path.empty()) {
                throw ConfigError("optimal needs exactly one of --config or --data");
            }
            std::vector<PlotSeries> series;
            nlohmann::json report;
            auto emit = [&](const std::string& tag, const SpectralTriple& s, double sigma_sq) {
                const OptimalSpectrum o = optimal_spectrum(s, sigma_sq);
                const BandReport b = find_squeezing_bands(o, s.grid);
                write_optimal_csv(run.path("optimal" + tag + ".csv"), s.grid, o);
                report["bands" + tag] = bands_to_json(b);
                series.push_back({"S_opt" + tag, hz_axis(s.grid), o.value});
            };
            if (!config_path.empty()) {
                const SystemParams p = load_config(config_path);
                run.manifest().config_text = to_config_text(p);
                const SpectralTriple s = model_triple(p, parse_grid(grid_text), false);
                emit("", s, no_phase_noise ? 0.0 : p.sigma_theta_sq);
                if (!no_phase_noise && p.sigma_theta_sq > 0) emit("_no_phase_noise", s, 0.0);
            } else {
                emit("", read_covariance_csv(data_path).spectra, 0.0);
            }
            write_json(run.path("bands.json"), report);
            run.manifest().results = report;
            write_line_plot_svg(run.path("optimal.svg"), "Optimal quadrature spectrum", "frequency (kHz)",
                                "shot-noise units", series, 1.0);
            run.finish();
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
