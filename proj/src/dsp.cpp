#include "osq/dsp.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <sstream>

#include "fft.hpp"
#include "osq/errors.hpp"
#include "osq/squeezing.hpp"

namespace osq {

void HeterodyneRecord::validate() const {
    if (!(trace.sample_rate > 0)) throw PreconditionError("record sample rate must be positive");
    if (!(nominal_beat_freq > 0 && nominal_beat_freq < 0.5 * trace.sample_rate)) {
        throw PreconditionError("beat frequency must lie strictly between 0 and Nyquist");
    }
}

ButterworthLowpass::ButterworthLowpass(int order, double corner_hz, double sample_rate)
    : order_(order), sample_rate_(sample_rate) {
    if (order < 1 || order > 16) throw PreconditionError("Butterworth order must be in [1, 16]");
    if (!(sample_rate > 0) || !(corner_hz > 0 && corner_hz < 0.5 * sample_rate)) {
        throw PreconditionError("low-pass corner must lie strictly between 0 and Nyquist");
    }
    using C = std::complex<double>;
    const double k = 2.0 * sample_rate;
    const double wc = k * std::tan(std::numbers::pi * corner_hz / sample_rate);
    for (int i = 0; i < order / 2; ++i) {
        const double ang = std::numbers::pi * (2.0 * i + order + 1) / (2.0 * order);
        const C s = wc * std::polar(1.0, ang);
        const C z = (k + s) / (k - s);
        const double a1 = -2.0 * z.real();
        const double a2 = std::norm(z);
        const double gain = (1.0 + a1 + a2) / 4.0;
        sections_.push_back({gain, 2.0 * gain, gain, a1, a2});
    }
    if (order % 2 == 1) {
        const double zr = (k - wc) / (k + wc);
        const double gain = (1.0 - zr) / 2.0;
        sections_.push_back({gain, gain, 0.0, -zr, 0.0});
    }
}

void ButterworthLowpass::run(std::span<double> x, bool reverse) const {
    if (x.empty()) return;
    const std::size_t n = x.size();
    for (const Section& s : sections_) {
        const double x0 = reverse ? x[n - 1] : x[0];
        double z2 = (s.b2 - s.a2) * x0;
        double z1 = (s.b1 - s.a1) * x0 + z2;
        auto step = [&](double& v) {
            const double in = v;
            const double out = s.b0 * in + z1;
            z1 = s.b1 * in - s.a1 * out + z2;
            z2 = s.b2 * in - s.a2 * out;
            v = out;
        };
        if (reverse) {
            for (std::size_t i = n; i-- > 0;) step(x[i]);
        } else {
            for (double& v : x) step(v);
        }
    }
}

void ButterworthLowpass::filter(std::span<double> x) const { run(x, false); }

void ButterworthLowpass::filtfilt(std::span<double> x) const {
    run(x, false);
    run(x, true);
}

double ButterworthLowpass::power_response(double f_hz) const {
    using C = std::complex<double>;
    const C zi = std::polar(1.0, -2.0 * std::numbers::pi * f_hz / sample_rate_);
    C h = 1.0;
    for (const Section& s : sections_) {
        h *= (s.b0 + s.b1 * zi + s.b2 * zi * zi) / (1.0 + s.a1 * zi + s.a2 * zi * zi);
    }
    return std::norm(h);
}

namespace {

void check_lockin(const HeterodyneRecord& r, double lp_corner) {
    r.validate();
    if (!(lp_corner > 0 && lp_corner < 0.5 * r.nominal_beat_freq)) {
        throw PreconditionError("lock-in corner must lie in (0, beat/2)");
    }
}

TimeTrace baseband(std::vector<double> v, const HeterodyneRecord& r, double lp_corner, const char* label) {
    TimeTrace t;
    t.samples = std::move(v);
    t.sample_rate = r.trace.sample_rate;
    t.label = label;
    t.bandwidth = lp_corner;
    return t;
}

}  // namespace

QuadraturePair lock_in_demodulate(HeterodyneRecord&& r, double lo_phase, double lp_corner, int order) {
    check_lockin(r, lp_corner);
    const double fs = r.trace.sample_rate;
    const double fb = r.nominal_beat_freq;
    std::vector<double> v = std::move(r.trace.samples);
    std::vector<double> q(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double ph = beat_phase(i, fb, fs) - lo_phase;
        q[i] = 2.0 * v[i] * std::cos(ph);
        v[i] = 2.0 * v[i] * std::sin(ph);
    }
    const ButterworthLowpass lp(order, lp_corner, fs);
    lp.filtfilt(q);
    lp.filtfilt(v);
    return {baseband(std::move(q), r, lp_corner, "Q_m"), baseband(std::move(v), r, lp_corner, "P_m")};
}

QuadraturePair lock_in_demodulate(const HeterodyneRecord& r, double lo_phase, double lp_corner, int order) {
    HeterodyneRecord copy = r;
    return lock_in_demodulate(std::move(copy), lo_phase, lp_corner, order);
}

TrackedQuadratures track_phase(const HeterodyneRecord& r, const TrackerConfig& c) {
    if (!(c.tracking_bandwidth > 0) || !(c.block_rate_factor >= 4) || !(c.carrier_floor >= 0)) {
        throw PreconditionError("tracker needs bandwidth > 0, block_rate_factor >= 4, floor >= 0");
    }
    const double lp_corner = c.lp_corner > 0 ? c.lp_corner : 0.45 * r.nominal_beat_freq;
    QuadraturePair bb = lock_in_demodulate(r, 0.0, lp_corner);
    const double fs = r.trace.sample_rate;
    const std::size_t n = bb.q.size();

    const double block_rate = std::min(fs, c.block_rate_factor * c.tracking_bandwidth);
    const auto m = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(fs / block_rate)));
    const std::size_t n_blocks = n / m;
    if (n_blocks < 8) throw PreconditionError("record too short for the tracking bandwidth");
    const double actual_rate = fs / static_cast<double>(m);
    if (!(c.tracking_bandwidth < 0.5 * actual_rate)) {
        throw PreconditionError("tracking bandwidth must be below half the block rate");
    }

    std::vector<double> zq(n_blocks, 0.0), zp(n_blocks, 0.0);
    for (std::size_t b = 0; b < n_blocks; ++b) {
        double sq = 0.0, sp = 0.0;
        for (std::size_t i = b * m; i < (b + 1) * m; ++i) {
            sq += bb.q.samples[i];
            sp += bb.p.samples[i];
        }
        zq[b] = sq / static_cast<double>(m);
        zp[b] = sp / static_cast<double>(m);
    }
    std::vector<double> lq = zq, lpv = zp;
    const ButterworthLowpass lp(c.order, c.tracking_bandwidth, actual_rate);
    lp.filtfilt(lq);
    lp.filtfilt(lpv);

    std::vector<double> mags(n_blocks);
    for (std::size_t b = 0; b < n_blocks; ++b) mags[b] = std::hypot(lq[b], lpv[b]);
    std::nth_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(n_blocks / 2), mags.end());
    const double carrier = mags[n_blocks / 2];
    if (!(carrier > c.carrier_floor)) {
        std::ostringstream os;
        os << "phase tracking failed: carrier magnitude " << carrier << " below floor " << c.carrier_floor;
        throw ConvergenceError(os.str());
    }

    std::vector<double> theta(n_blocks);
    double resid = 0.0;
    for (std::size_t b = 0; b < n_blocks; ++b) {
        double t = std::atan2(lpv[b], lq[b]);
        if (b > 0) t -= two_pi * std::round((t - theta[b - 1]) / two_pi);
        theta[b] = t;
        const double d = std::remainder(std::atan2(zp[b], zq[b]) - t, two_pi);
        resid += d * d;
    }
    resid /= static_cast<double>(n_blocks);

    // Rotate every sample by -theta, linearly interpolated between block centres.
    const double half = 0.5 * static_cast<double>(m);
    for (std::size_t i = 0; i < n; ++i) {
        const double pos = (static_cast<double>(i) + 0.5 - half) / static_cast<double>(m);
        double th;
        if (pos <= 0) {
            th = theta.front();
        } else if (pos >= static_cast<double>(n_blocks - 1)) {
            th = theta.back();
        } else {
            const auto b = static_cast<std::size_t>(pos);
            const double f = pos - static_cast<double>(b);
            th = theta[b] + f * (theta[b + 1] - theta[b]);
        }
        const double cs = std::cos(th), sn = std::sin(th);
        const double q = bb.q.samples[i], p = bb.p.samples[i];
        bb.q.samples[i] = cs * q + sn * p;
        bb.p.samples[i] = -sn * q + cs * p;
    }

    TrackedQuadratures out;
    out.q = std::move(bb.q);
    out.p = std::move(bb.p);
    out.theta.samples = std::move(theta);
    out.theta.sample_rate = actual_rate;
    out.theta.label = "theta_est";
    out.theta.bandwidth = c.tracking_bandwidth;
    out.carrier_magnitude = carrier;
    out.residual_phase_variance = resid;
    return out;
}

void WelchConfig::validate() const {
    if (segment_length < 16) throw PreconditionError("Welch segment length must be at least 16");
    if (!(overlap_fraction >= 0 && overlap_fraction < 1)) throw PreconditionError("overlap must lie in [0, 1)");
    if (n_batches < 2) throw PreconditionError("need at least two batches for standard errors");
}

std::size_t segment_length_for_resolution(double sample_rate, double rbw_hz) {
    if (!(sample_rate > 0) || !(rbw_hz > 0) || rbw_hz > sample_rate / 16) {
        throw PreconditionError("resolution bandwidth must lie in (0, fs/16]");
    }
    return std::bit_floor(static_cast<std::size_t>(sample_rate / rbw_hz));
}

namespace {

std::vector<double> make_window(Window w, std::size_t n) {
    std::vector<double> out(n, 1.0);
    const double step = two_pi / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = step * static_cast<double>(i);
        switch (w) {
            case Window::rectangular:
                break;
            case Window::hann:
                out[i] = 0.5 - 0.5 * std::cos(x);
                break;
            case Window::flattop:
                out[i] = 0.21557895 - 0.41663158 * std::cos(x) + 0.277263158 * std::cos(2 * x) -
                         0.083578947 * std::cos(3 * x) + 0.006947368 * std::cos(4 * x);
                break;
        }
    }
    return out;
}

}  // namespace

EstimatedCovariance welch_cross_spectra(const TimeTrace& q, const TimeTrace& p, const WelchConfig& c) {
    c.validate();
    if (q.size() != p.size()) throw PreconditionError("quadrature traces differ in length");
    if (q.sample_rate != p.sample_rate || !(q.sample_rate > 0)) {
        throw PreconditionError("quadrature traces differ in sample rate");
    }
    const std::size_t len = c.segment_length;
    if (q.size() < 2 * c.discard_edges + len) throw PreconditionError("trace shorter than one Welch segment");
    const std::size_t usable = q.size() - 2 * c.discard_edges;
    const auto step = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(static_cast<double>(len) * (1.0 - c.overlap_fraction))));
    const std::size_t n_seg = (usable - len) / step + 1;
    const std::size_t n_batch = std::min(c.n_batches, n_seg);
    if (n_batch < 2) throw PreconditionError("trace too short: fewer than two Welch segments");

    const std::vector<double> win = make_window(c.window, len);
    double u = 0.0;
    for (double v : win) u += v * v;
    const std::size_t n_bins = len / 2 + 1;

    std::vector<double> freq(n_bins);
    for (std::size_t k = 0; k < n_bins; ++k) freq[k] = hz_to_rad(q.sample_rate * static_cast<double>(k) / len);
    const FrequencyGrid grid(std::move(freq));

    std::vector<SpectralTriple> batch(n_batch, SpectralTriple(grid));
    std::vector<std::size_t> batch_count(n_batch, 0);
    std::vector<double> imag_sum(n_bins, 0.0);

    detail::RealForward fq(len), fp(len);
    for (std::size_t s = 0; s < n_seg; ++s) {
        const std::size_t start = c.discard_edges + s * step;
        auto iq = fq.input();
        auto ip = fp.input();
        for (std::size_t i = 0; i < len; ++i) {
            iq[i] = win[i] * q.samples[start + i];
            ip[i] = win[i] * p.samples[start + i];
        }
        const auto xq = fq.execute();
        const auto xp = fp.execute();
        const std::size_t b = s * n_batch / n_seg;
        SpectralTriple& acc = batch[b];
        ++batch_count[b];
        for (std::size_t k = 0; k < n_bins; ++k) {
            const double qr = xq[k].real(), qi = xq[k].imag();
            const double pr = xp[k].real(), pi = xp[k].imag();
            acc.s_qq[k] += qr * qr + qi * qi;
            acc.s_pp[k] += pr * pr + pi * pi;
            acc.s_qp[k] += qr * pr + qi * pi;
            imag_sum[k] += qr * pi - qi * pr;
        }
    }

    EstimatedCovariance e;
    e.spectra = SpectralTriple(grid);
    e.stderr_qq.assign(n_bins, 0.0);
    e.stderr_pp.assign(n_bins, 0.0);
    e.stderr_qp.assign(n_bins, 0.0);
    e.imag_qp.resize(n_bins);
    e.n_segments = n_seg;
    for (std::size_t b = 0; b < n_batch; ++b) {
        const double scale = 1.0 / (u * static_cast<double>(batch_count[b]));
        for (std::size_t k = 0; k < n_bins; ++k) {
            batch[b].s_qq[k] *= scale;
            batch[b].s_pp[k] *= scale;
            batch[b].s_qp[k] *= scale;
        }
    }
    // Batch sizes differ by at most one; the mean weights every segment equally.
    const double total = static_cast<double>(n_seg);
    for (std::size_t b = 0; b < n_batch; ++b) {
        const double w = static_cast<double>(batch_count[b]) / total;
        for (std::size_t k = 0; k < n_bins; ++k) {
            e.spectra.s_qq[k] += w * batch[b].s_qq[k];
            e.spectra.s_pp[k] += w * batch[b].s_pp[k];
            e.spectra.s_qp[k] += w * batch[b].s_qp[k];
        }
    }
    const double nb = static_cast<double>(n_batch);
    const double norm = 1.0 / (nb * (nb - 1.0));
    constexpr double tiny = std::numeric_limits<double>::min();
    for (std::size_t k = 0; k < n_bins; ++k) {
        double vq = 0.0, vp = 0.0, vc = 0.0;
        for (std::size_t b = 0; b < n_batch; ++b) {
            const double dq = batch[b].s_qq[k] - e.spectra.s_qq[k];
            const double dp = batch[b].s_pp[k] - e.spectra.s_pp[k];
            const double dc = batch[b].s_qp[k] - e.spectra.s_qp[k];
            vq += dq * dq;
            vp += dp * dp;
            vc += dc * dc;
        }
        e.stderr_qq[k] = std::max(std::sqrt(vq * norm), tiny);
        e.stderr_pp[k] = std::max(std::sqrt(vp * norm), tiny);
        e.stderr_qp[k] = std::max(std::sqrt(vc * norm), tiny);
        e.imag_qp[k] = imag_sum[k] / (u * total);
    }
    e.batches = std::move(batch);
    return e;
}

namespace {

SpectralTriple select(const SpectralTriple& s, const std::vector<std::size_t>& idx) {
    std::vector<double> w;
    w.reserve(idx.size());
    for (auto i : idx) w.push_back(s.grid[i]);
    SpectralTriple out{FrequencyGrid(std::move(w))};
    for (std::size_t j = 0; j < idx.size(); ++j) {
        out.s_qq[j] = s.s_qq[idx[j]];
        out.s_pp[j] = s.s_pp[idx[j]];
        out.s_qp[j] = s.s_qp[idx[j]];
    }
    return out;
}

std::vector<double> select(const std::vector<double>& v, const std::vector<std::size_t>& idx) {
    std::vector<double> out;
    if (v.empty()) return out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(v[i]);
    return out;
}

std::vector<double> moving_average(const std::vector<double>& v, std::size_t width) {
    const std::size_t n = v.size();
    const std::size_t h = width / 2;
    std::vector<double> out(n);
    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + v[i];
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i >= h ? i - h : 0;
        const std::size_t hi = std::min(n, i + h + 1);
        out[i] = (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
    }
    return out;
}

// Standard error of the moving average, treating bins as independent.
std::vector<double> moving_average_stderr(const std::vector<double>& se, std::size_t width) {
    std::vector<double> sq(se.size());
    for (std::size_t i = 0; i < se.size(); ++i) sq[i] = se[i] * se[i];
    const std::size_t n = se.size();
    const std::size_t h = width / 2;
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i >= h ? i - h : 0;
        const std::size_t hi = std::min(n, i + h + 1);
        double acc = 0.0;
        for (std::size_t j = lo; j < hi; ++j) acc += sq[j];
        out[i] = std::sqrt(acc) / static_cast<double>(hi - lo);
    }
    return out;
}

}  // namespace

EstimatedCovariance restrict_band(const EstimatedCovariance& e, double f_low_hz, double f_high_hz) {
    if (!(f_high_hz > f_low_hz)) throw PreconditionError("band needs f_high > f_low");
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < e.size(); ++i) {
        const double f = e.spectra.grid.hz(i);
        if (f >= f_low_hz && f <= f_high_hz) idx.push_back(i);
    }
    if (idx.empty()) throw PreconditionError("band contains no estimator bins");
    EstimatedCovariance out;
    out.spectra = select(e.spectra, idx);
    out.stderr_qq = select(e.stderr_qq, idx);
    out.stderr_pp = select(e.stderr_pp, idx);
    out.stderr_qp = select(e.stderr_qp, idx);
    out.imag_qp = select(e.imag_qp, idx);
    out.n_segments = e.n_segments;
    for (const auto& b : e.batches) out.batches.push_back(select(b, idx));
    return out;
}

EstimatedCovariance calibrate_shot_noise(const EstimatedCovariance& raw, const EstimatedCovariance& reference,
                                         std::size_t smoothing_bins) {
    if (!(raw.spectra.grid == reference.spectra.grid)) {
        throw PreconditionError("calibration reference grid differs from the data grid");
    }
    if (smoothing_bins == 0) throw PreconditionError("smoothing window must be at least one bin");
    const std::size_t n = raw.size();
    const auto gq = moving_average(reference.spectra.s_qq, smoothing_bins);
    const auto gp = moving_average(reference.spectra.s_pp, smoothing_bins);
    const auto sgq = moving_average_stderr(reference.stderr_qq, smoothing_bins);
    const auto sgp = moving_average_stderr(reference.stderr_pp, smoothing_bins);
    double peak = 0.0;
    for (std::size_t i = 0; i < n; ++i) peak = std::max({peak, gq[i], gp[i]});
    for (std::size_t i = 0; i < n; ++i) {
        if (!(gq[i] > 1e-9 * peak) || !(gp[i] > 1e-9 * peak)) {
            std::ostringstream os;
            os << "calibration reference vanishes at " << raw.spectra.grid.hz(i) << " Hz";
            throw PreconditionError(os.str());
        }
    }

    EstimatedCovariance out = raw;
    for (std::size_t i = 0; i < n; ++i) {
        const double rq = sgq[i] / gq[i];
        const double rp = sgp[i] / gp[i];
        const double gc = std::sqrt(gq[i] * gp[i]);
        const double vq = raw.spectra.s_qq[i] / gq[i];
        const double vp = raw.spectra.s_pp[i] / gp[i];
        const double vc = raw.spectra.s_qp[i] / gc;
        out.spectra.s_qq[i] = vq;
        out.spectra.s_pp[i] = vp;
        out.spectra.s_qp[i] = vc;
        out.stderr_qq[i] = std::hypot(raw.stderr_qq[i] / gq[i], vq * rq);
        out.stderr_pp[i] = std::hypot(raw.stderr_pp[i] / gp[i], vp * rp);
        out.stderr_qp[i] = std::hypot(raw.stderr_qp[i] / gc, 0.5 * vc * std::hypot(rq, rp));
        if (!out.imag_qp.empty()) out.imag_qp[i] = raw.imag_qp[i] / gc;
        for (auto& b : out.batches) {
            b.s_qq[i] /= gq[i];
            b.s_pp[i] /= gp[i];
            b.s_qp[i] /= gc;
        }
    }
    return out;
}

EstimatedCovariance rotate_estimate(const EstimatedCovariance& e, double theta) {
    EstimatedCovariance out = e;
    const double c = std::cos(theta), s = std::sin(theta);
    const double cc = c * c, ss = s * s, cs = c * s;
    out.spectra = rotate_covariance(e.spectra, theta);
    for (std::size_t i = 0; i < e.size(); ++i) {
        const double eq = e.stderr_qq[i], ep = e.stderr_pp[i], ec = e.stderr_qp[i];
        out.stderr_qq[i] = std::sqrt(cc * cc * eq * eq + 4 * cc * ss * ec * ec + ss * ss * ep * ep);
        out.stderr_pp[i] = std::sqrt(ss * ss * eq * eq + 4 * cc * ss * ec * ec + cc * cc * ep * ep);
        out.stderr_qp[i] = std::sqrt(cs * cs * (eq * eq + ep * ep) + (cc - ss) * (cc - ss) * ec * ec);
    }
    for (auto& b : out.batches) b = rotate_covariance(b, theta);
    return out;
}

}  // namespace osq
