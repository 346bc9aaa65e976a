#include "osq/synth.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <random>

#include "fft.hpp"
#include "osq/errors.hpp"
#include "osq/model.hpp"
#include "rng.hpp"

namespace osq {

namespace {

constexpr std::uint64_t stream_synthesis = 0x5157'4e54'4845'5349ULL;
constexpr std::uint64_t stream_jitter = 0x4a49'5454'4552'0001ULL;
constexpr std::uint64_t stream_detection = 0x4445'5445'4354'0001ULL;

void require_config(bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
}

// Band-limited unit-density white noise of length n: flat density 1 for
// 0 < f <= bandwidth, zero elsewhere.
std::vector<double> band_limited_white(std::size_t n, double sample_rate, double bandwidth,
                                       detail::NormalSource& rng) {
    std::vector<double> out;
    const double nyquist = 0.5 * sample_rate;
    if (bandwidth >= nyquist) {
        out.resize(n);
        for (double& v : out) v = rng();
        return out;
    }
    const std::size_t bins = n / 2 + 1;
    out.assign(2 * bins, 0.0);
    const double scale = std::sqrt(0.5 / static_cast<double>(n));
    for (std::size_t k = 1; k < bins; ++k) {
        const double f = static_cast<double>(k) * sample_rate / static_cast<double>(n);
        if (f > bandwidth) break;
        out[2 * k] = scale * rng();
        out[2 * k + 1] = scale * rng();
    }
    detail::inverse_real_inplace(out, n);
    out.resize(n);
    return out;
}

}  // namespace

std::size_t SynthConfig::n_samples() const {
    return static_cast<std::size_t>(std::llround(duration * sample_rate));
}

void SynthConfig::validate() const {
    require_config(std::isfinite(sample_rate) && sample_rate > 0, "sample_rate must be > 0");
    require_config(std::isfinite(duration) && duration > 0, "duration must be > 0");
    const double n = duration * sample_rate;
    require_config(std::abs(n - std::round(n)) < 1e-6 * std::max(1.0, n) && n >= 2,
                   "duration * sample_rate must be an integer >= 2");
    require_config(n < 2.0e9, "record too long");
    require_config(std::isfinite(band_limit) && band_limit > 0 && band_limit <= 0.5 * sample_rate,
                   "band_limit must lie in (0, sample_rate/2]");
    require_config(std::isfinite(beat_freq) && beat_freq >= 0, "beat_freq must be >= 0");
    if (beat_freq > 0) {
        require_config(beat_freq > band_limit, "beat_freq must exceed the quadrature band_limit");
        require_config(beat_freq + band_limit < 0.5 * sample_rate,
                       "beat_freq + band_limit must stay below the Nyquist frequency");
    }
    require_config(std::isfinite(jitter_sigma_sq) && jitter_sigma_sq >= 0, "jitter_sigma_sq must be >= 0");
    require_config(std::isfinite(jitter_bandwidth) && jitter_bandwidth >= 0, "jitter_bandwidth must be >= 0");
    require_config(std::isfinite(carrier_amplitude), "carrier_amplitude must be finite");
}

QuadraturePair synthesize_quadrature_traces(const SystemParams& p, const SynthConfig& c) {
    p.validate();
    c.validate();
    const std::size_t n = c.n_samples();
    const std::size_t bins = n / 2 + 1;
    const double df = c.sample_rate / static_cast<double>(n);

    std::vector<double> qbuf(2 * bins, 0.0);
    std::vector<double> pbuf(2 * bins, 0.0);
    detail::NormalSource rng(detail::derive_seed(c.seed, stream_synthesis));

    const double norm = 1.0 / std::sqrt(static_cast<double>(n));
    const double thermal_sd = std::sqrt(0.5);  // complex unit variance
    const double optical_sd = 0.5;             // complex variance 1/2
    const double rg_x = std::sqrt(p.gamma_x);
    const double rg_y = std::sqrt(p.gamma_y);

    for (std::size_t k = 1; k < bins; ++k) {
        const double f = static_cast<double>(k) * df;
        if (f > c.band_limit) break;
        // Nyquist bin must be real; it is only reachable when band_limit is
        // exactly Nyquist, and is left at zero.
        if (2 * k == n) break;
        const double w = off_pole(hz_to_rad(f), p);
        const TransferSet t = transfer_functions(w, p);
        const double chi_x = mech_susceptibility(w, p.omega_x);
        const double chi_y = mech_susceptibility(w, p.omega_y);

        const cplx xi_x(thermal_sd * rng(), thermal_sd * rng());
        const cplx xi_y(thermal_sd * rng(), thermal_sd * rng());
        const cplx a_pos(optical_sd * rng(), optical_sd * rng());
        const cplx a_neg(optical_sd * rng(), optical_sd * rng());

        const cplx force = 2.0 * (p.g_x * chi_x * rg_x * xi_x + p.g_y * chi_y * rg_y * xi_y);
        const cplx a_dag = std::conj(a_neg);
        const cplx qk = norm * (t.a_q * force + t.b_q_pos * a_pos + std::conj(t.b_q_neg) * a_dag);
        const cplx pk = norm * (t.a_p * force + t.b_p_pos * a_pos + std::conj(t.b_p_neg) * a_dag);
        qbuf[2 * k] = qk.real();
        qbuf[2 * k + 1] = qk.imag();
        pbuf[2 * k] = pk.real();
        pbuf[2 * k + 1] = pk.imag();
    }

    detail::inverse_real_inplace(qbuf, n);
    detail::inverse_real_inplace(pbuf, n);
    qbuf.resize(n);
    pbuf.resize(n);
    if (c.carrier_amplitude != 0.0) {
        for (double& v : qbuf) v += c.carrier_amplitude;
    }

    QuadraturePair out;
    out.q = TimeTrace{std::move(qbuf), c.sample_rate, "Q", c.band_limit};
    out.p = TimeTrace{std::move(pbuf), c.sample_rate, "P", c.band_limit};
    return out;
}

QuadraturePair apply_detection(QuadraturePair in, double eta_eff, std::uint64_t seed) {
    if (in.q.size() != in.p.size()) throw PreconditionError("quadrature traces differ in length");
    if (!(eta_eff >= 0 && eta_eff <= 1)) throw PreconditionError("efficiency must lie in [0, 1]");
    if (eta_eff == 1.0) return in;
    const double gain = std::sqrt(eta_eff);
    const double vac = std::sqrt(1.0 - eta_eff);
    detail::NormalSource rng(detail::derive_seed(seed, stream_detection));
    for (TimeTrace* t : {&in.q, &in.p}) {
        const double bw = t->bandwidth > 0 ? t->bandwidth : 0.5 * t->sample_rate;
        const auto noise = band_limited_white(t->size(), t->sample_rate, bw, rng);
        for (std::size_t i = 0; i < t->size(); ++i) t->samples[i] = gain * t->samples[i] + vac * noise[i];
    }
    return in;
}

QuadraturePair apply_detection(QuadraturePair in, const SystemParams& p, std::uint64_t seed) {
    return apply_detection(std::move(in), p.effective_eta(), seed);
}

namespace {

// AR(1) recursion with the exact OU transition over one sample.
class JitterGenerator {
public:
    JitterGenerator(double sample_rate, double sigma_sq, double bandwidth_hz, std::uint64_t seed)
        : rng_(detail::derive_seed(seed, stream_jitter)) {
        const double sigma = std::sqrt(sigma_sq);
        const double rate = two_pi * bandwidth_hz / sample_rate;
        rho_ = std::exp(-rate);
        // sqrt(1 - rho^2) without cancellation for tiny rates
        innovation_ = sigma * std::sqrt(-std::expm1(-2.0 * rate));
        value_ = sigma * rng_();
    }
    double next() {
        const double out = value_;
        value_ = rho_ * value_ + innovation_ * rng_();
        return out;
    }

private:
    detail::NormalSource rng_;
    double rho_ = 0.0;
    double innovation_ = 0.0;
    double value_ = 0.0;
};

}  // namespace

std::vector<double> jitter_process(std::size_t n, double sample_rate, double sigma_sq, double bandwidth_hz,
                                   std::uint64_t seed) {
    std::vector<double> theta(n, 0.0);
    if (sigma_sq == 0.0 || n == 0) return theta;
    JitterGenerator gen(sample_rate, sigma_sq, bandwidth_hz, seed);
    for (double& t : theta) t = gen.next();
    return theta;
}

QuadraturePair rotate_traces(QuadraturePair in, double theta) {
    if (in.q.size() != in.p.size()) throw PreconditionError("quadrature traces differ in length");
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    for (std::size_t i = 0; i < in.q.size(); ++i) {
        const double q = in.q.samples[i];
        const double p = in.p.samples[i];
        in.q.samples[i] = c * q - s * p;
        in.p.samples[i] = s * q + c * p;
    }
    return in;
}

QuadraturePair rotate_traces(QuadraturePair in, const std::vector<double>& theta) {
    if (in.q.size() != in.p.size() || theta.size() != in.q.size()) {
        throw PreconditionError("rotation angle trace length mismatch");
    }
    for (std::size_t i = 0; i < in.q.size(); ++i) {
        const double c = std::cos(theta[i]);
        const double s = std::sin(theta[i]);
        const double q = in.q.samples[i];
        const double p = in.p.samples[i];
        in.q.samples[i] = c * q - s * p;
        in.p.samples[i] = s * q + c * p;
    }
    return in;
}

QuadraturePair apply_phase_jitter(QuadraturePair in, const SynthConfig& c, const SystemParams& p) {
    if (in.q.size() != in.p.size()) throw PreconditionError("quadrature traces differ in length");
    if (c.jitter_sigma_sq == 0.0) return in;
    if (!(c.jitter_bandwidth <= 1e-3 * rad_to_hz(p.kappa))) {
        throw PreconditionError("phase jitter bandwidth outside the slow-jitter regime (<= 1e-3 kappa/2pi)");
    }
    JitterGenerator gen(in.q.sample_rate, c.jitter_sigma_sq, c.jitter_bandwidth, c.seed);
    for (std::size_t i = 0; i < in.q.size(); ++i) {
        const double theta = gen.next();
        const double cs = std::cos(theta);
        const double sn = std::sin(theta);
        const double q = in.q.samples[i];
        const double pv = in.p.samples[i];
        in.q.samples[i] = cs * q - sn * pv;
        in.p.samples[i] = sn * q + cs * pv;
    }
    return in;
}

double beat_phase(std::size_t n, double beat_freq, double sample_rate) {
    const double cycles = static_cast<double>(n) * (beat_freq / sample_rate);
    return two_pi * (cycles - std::floor(cycles));
}

TimeTrace modulate_beat(QuadraturePair&& in, const SynthConfig& c) {
    if (in.q.size() != in.p.size()) throw PreconditionError("quadrature traces differ in length");
    c.validate();
    if (!(c.beat_freq > 0)) throw PreconditionError("modulate_beat needs beat_freq > 0");
    TimeTrace out = std::move(in.q);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double ph = beat_phase(i, c.beat_freq, out.sample_rate);
        out.samples[i] = out.samples[i] * std::cos(ph) + in.p.samples[i] * std::sin(ph);
    }
    out.label = "heterodyne";
    out.bandwidth = 0.5 * out.sample_rate;
    in.p.samples = {};
    return out;
}

TimeTrace modulate_beat(const QuadraturePair& in, const SynthConfig& c) {
    QuadraturePair copy = in;
    return modulate_beat(std::move(copy), c);
}

// --- file formats ----------------------------------------------------------

namespace {

template <typename T>
T to_little(T v) {
    if constexpr (std::endian::native == std::endian::little) {
        return v;
    } else {
        auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
        std::reverse(bytes.begin(), bytes.end());
        return std::bit_cast<T>(bytes);
    }
}

}  // namespace

void write_trace(const std::string& path, const TimeTrace& t) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    const char magic[4] = {'O', 'S', 'Q', 'T'};
    const std::uint16_t version = to_little(trace_format_version);
    const std::uint16_t reserved = 0;
    const double fs = to_little(t.sample_rate);
    out.write(magic, 4);
    out.write(reinterpret_cast<const char*>(&version), 2);
    out.write(reinterpret_cast<const char*>(&reserved), 2);
    out.write(reinterpret_cast<const char*>(&fs), 8);
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(t.samples.data()),
                  static_cast<std::streamsize>(t.samples.size() * sizeof(double)));
    } else {
        for (double v : t.samples) {
            const double le = to_little(v);
            out.write(reinterpret_cast<const char*>(&le), 8);
        }
    }
    if (!out) throw Error("write failed for '" + path + "'");
}

TimeTrace read_trace(const std::string& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw Error("cannot open trace file '" + path + "'");
    const auto bytes = static_cast<std::size_t>(in.tellg());
    in.seekg(0);
    if (bytes < 16 || (bytes - 16) % 8 != 0) throw Error("'" + path + "' is not a trace file (bad size)");
    char magic[4];
    std::uint16_t version = 0;
    std::uint16_t reserved = 0;
    double fs = 0;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&version), 2);
    in.read(reinterpret_cast<char*>(&reserved), 2);
    in.read(reinterpret_cast<char*>(&fs), 8);
    if (std::memcmp(magic, "OSQT", 4) != 0) throw Error("'" + path + "' is not a trace file (bad magic)");
    version = to_little(version);
    fs = to_little(fs);
    if (version != trace_format_version) throw Error("unsupported trace format version " + std::to_string(version));
    if (!(fs > 0) || !std::isfinite(fs)) throw Error("trace file has an invalid sample rate");

    TimeTrace t;
    t.sample_rate = fs;
    t.bandwidth = 0.5 * fs;
    t.label = path;
    t.samples.resize((bytes - 16) / 8);
    in.read(reinterpret_cast<char*>(t.samples.data()), static_cast<std::streamsize>(t.samples.size() * 8));
    if (!in) throw Error("truncated trace file '" + path + "'");
    if constexpr (std::endian::native != std::endian::little) {
        for (double& v : t.samples) v = to_little(v);
    }
    return t;
}

void write_trace_csv(const std::string& path, const TimeTrace& t) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw Error("cannot open '" + path + "' for writing");
    std::fprintf(f, "time_s,value\n");
    for (std::size_t i = 0; i < t.size(); ++i) {
        std::fprintf(f, "%.12g,%.17g\n", static_cast<double>(i) / t.sample_rate, t.samples[i]);
    }
    std::fclose(f);
}

}  // namespace osq
