#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "common.hpp"
#include "osq/errors.hpp"
#include "osq/model.hpp"
#include "osq/squeezing.hpp"

using namespace osq;

namespace {

SpectralTriple reproduction_triple(std::size_t n = 512) {
    const SystemParams p = test::reproduction_params();
    return apply_efficiency(output_spectra(FrequencyGrid::linear_hz(50e3, 170e3, n), p), p);
}

SpectralTriple random_triple(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1, 1);
    SpectralTriple s(FrequencyGrid::linear_hz(1, 2, n));
    for (std::size_t i = 0; i < n; ++i) {
        s.s_qq[i] = 1.5 + u(rng);
        s.s_pp[i] = 1.5 + u(rng);
        s.s_qp[i] = 0.4 * u(rng);
    }
    return s;
}

}  // namespace

TEST_CASE("rotation is a congruence") {
    const SpectralTriple s = random_triple(64, 1);
    for (double t : {0.3, -1.1, 2.5}) {
        const SpectralTriple r = rotate_covariance(s, t);
        for (std::size_t i = 0; i < s.size(); ++i) {
            CHECK(r.s_qq[i] + r.s_pp[i] == doctest::Approx(s.s_qq[i] + s.s_pp[i]));
            CHECK(r.s_qq[i] * r.s_pp[i] - r.s_qp[i] * r.s_qp[i] ==
                  doctest::Approx(s.s_qq[i] * s.s_pp[i] - s.s_qp[i] * s.s_qp[i]));
        }
        const SpectralTriple back = rotate_covariance(r, -t);
        CHECK(back.s_qp[5] == doctest::Approx(s.s_qp[5]));
    }
    // R(pi) = -1 leaves the covariance unchanged; R(pi/2) swaps the diagonals.
    const SpectralTriple half = rotate_covariance(s, std::numbers::pi / 2);
    CHECK(half.s_qq[3] == doctest::Approx(s.s_pp[3]));
    CHECK(half.s_qp[3] == doctest::Approx(-s.s_qp[3]));
    // Explicit matrix product for one angle.
    const double t = 0.7, c = std::cos(t), sn = std::sin(t);
    const SpectralTriple r = rotate_covariance(s, t);
    CHECK(r.s_qq[0] == doctest::Approx(c * c * s.s_qq[0] - 2 * c * sn * s.s_qp[0] + sn * sn * s.s_pp[0]));
    CHECK(r.s_qp[0] == doctest::Approx(c * sn * (s.s_qq[0] - s.s_pp[0]) + (c * c - sn * sn) * s.s_qp[0]));
}

TEST_CASE("dephasing limits and trace") {
    const SpectralTriple s = random_triple(32, 2);
    const SpectralTriple zero = dephase_covariance(s, 0.0);
    CHECK(zero.s_qq == s.s_qq);
    CHECK(zero.s_qp == s.s_qp);
    const SpectralTriple big = dephase_covariance(s, 40.0);
    const SpectralTriple d = dephase_covariance(s, 0.062);
    for (std::size_t i = 0; i < s.size(); ++i) {
        CHECK(big.s_qq[i] == doctest::Approx(0.5 * (s.s_qq[i] + s.s_pp[i])));
        CHECK(std::abs(big.s_qp[i]) < 1e-30);
        CHECK(d.s_qq[i] + d.s_pp[i] == doctest::Approx(s.s_qq[i] + s.s_pp[i]));
        CHECK(d.s_qp[i] == doctest::Approx(s.s_qp[i] * std::exp(-0.124)));
    }
    CHECK_THROWS_AS(dephase_covariance(s, -0.1), PreconditionError);
}

TEST_CASE("dephasing equals the average over Gaussian rotations") {
    // Gauss-Hermite-free check: fine midpoint quadrature over +-8 sigma.
    const SpectralTriple s = random_triple(16, 3);
    const double var = 0.3, sd = std::sqrt(var);
    SpectralTriple acc(s.grid);
    const int n = 4000;
    double wsum = 0;
    for (int k = 0; k < n; ++k) {
        const double t = -8 * sd + 16 * sd * (k + 0.5) / n;
        const double w = std::exp(-0.5 * t * t / var);
        wsum += w;
        const SpectralTriple r = rotate_covariance(s, t);
        for (std::size_t i = 0; i < s.size(); ++i) {
            acc.s_qq[i] += w * r.s_qq[i];
            acc.s_pp[i] += w * r.s_pp[i];
            acc.s_qp[i] += w * r.s_qp[i];
        }
    }
    const SpectralTriple d = dephase_covariance(s, var);
    for (std::size_t i = 0; i < s.size(); ++i) {
        CHECK(acc.s_qq[i] / wsum == doctest::Approx(d.s_qq[i]).epsilon(1e-10));
        CHECK(acc.s_pp[i] / wsum == doctest::Approx(d.s_pp[i]).epsilon(1e-10));
        CHECK(std::abs(acc.s_qp[i] / wsum - d.s_qp[i]) < 1e-10);
    }
}

TEST_CASE("quadrature spectrum matches the rotated covariance") {
    const SpectralTriple s = reproduction_triple(64);
    for (double phi : {0.0, 0.4, 1.3, 2.9}) {
        const auto q = quadrature_spectrum(s, phi, 0.0);
        const SpectralTriple r = rotate_covariance(s, -phi);
        for (std::size_t i = 0; i < s.size(); ++i) CHECK(q[i] == doctest::Approx(r.s_qq[i]).epsilon(1e-14));
        const auto qd = quadrature_spectrum(s, phi, 0.062);
        const SpectralTriple rd = rotate_covariance(dephase_covariance(s, 0.062), -phi);
        for (std::size_t i = 0; i < s.size(); ++i) CHECK(qd[i] == doctest::Approx(rd.s_qq[i]).epsilon(1e-14));
    }
    // phi and phi + pi describe the same quadrature
    const auto a = quadrature_spectrum(s, 0.5, 0.0);
    const auto b = quadrature_spectrum(s, 0.5 + std::numbers::pi, 0.0);
    CHECK(a[7] == doctest::Approx(b[7]).epsilon(1e-13));
}

TEST_CASE("optimal spectrum is the minimum over a dense phase scan") {
    const SpectralTriple s = reproduction_triple(128);
    const OptimalSpectrum o = optimal_spectrum(s, 0.062);
    const SqueezingMap m = build_map(s, 0.062, 3601);
    for (std::size_t i = 0; i < s.size(); ++i) {
        double lo = 1e300;
        std::size_t arg = 0;
        for (std::size_t j = 0; j < m.phases.size(); ++j) {
            if (m.at(j, i) < lo) lo = m.at(j, i), arg = j;
        }
        CHECK(o.value[i] <= lo + 1e-12);
        CHECK(lo - o.value[i] < 1e-6);
        CHECK(phase_separation(m.phases[arg], o.phase[i]) < 2e-3);
        CHECK(o.phase[i] >= 0.0);
        CHECK(o.phase[i] < std::numbers::pi);
    }
}

TEST_CASE("map layout") {
    const SpectralTriple s = reproduction_triple(10);
    const SqueezingMap m = build_map(s, 0.0, 4);
    CHECK(m.phases.size() == 4);
    CHECK(m.values.size() == 40);
    CHECK(m.phases[1] == doctest::Approx(std::numbers::pi / 4));
    const auto q = quadrature_spectrum(s, m.phases[2], 0.0);
    CHECK(m.at(2, 7) == q[7]);
    CHECK_THROWS_AS(build_map(s, 0.0, 1), PreconditionError);
}

TEST_CASE("band finder agrees with a brute-force scan") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.9, 1.1);
    const FrequencyGrid g = FrequencyGrid::linear_hz(0, 999, 1000);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> v(g.size());
        // piecewise-constant runs so that bands have some width
        double cur = u(rng);
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i % 37 == 0) cur = u(rng);
            v[i] = cur + 1e-4 * std::sin(static_cast<double>(i));
        }
        const BandReport r = find_squeezing_bands(std::span<const double>(v), g);
        // brute force: every index below 1 belongs to exactly one reported band
        std::vector<int> owner(v.size(), -1);
        for (std::size_t b = 0; b < r.bands.size(); ++b) {
            for (std::size_t i = 0; i < v.size(); ++i) {
                if (g.hz(i) >= r.bands[b].f_low_hz && g.hz(i) <= r.bands[b].f_high_hz) {
                    CHECK(owner[i] == -1);
                    owner[i] = static_cast<int>(b);
                }
            }
            CHECK(std::isnan(r.bands[b].argmin_phase));
        }
        std::size_t runs = 0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            CHECK((v[i] < 1.0) == (owner[i] >= 0));
            if (v[i] < 1.0 && (i == 0 || v[i - 1] >= 1.0)) ++runs;
        }
        CHECK(runs == r.bands.size());
        for (const auto& b : r.bands) {
            double lo = 2;
            for (std::size_t i = 0; i < v.size(); ++i)
                if (g.hz(i) >= b.f_low_hz && g.hz(i) <= b.f_high_hz) lo = std::min(lo, v[i]);
            CHECK(b.min_value == lo);
        }
    }
}

TEST_CASE("bands of the reproduction model") {
    const SystemParams p = test::reproduction_params();
    const FrequencyGrid g = FrequencyGrid::linear_hz(50e3, 170e3, 2048);
    const SpectralTriple s = apply_efficiency(output_spectra(g, p), p);
    const OptimalSpectrum o = optimal_spectrum(s, p.sigma_theta_sq);
    const BandReport r = find_squeezing_bands(o, g);
    REQUIRE(r.bands.size() == 2);
    CHECK(r.bands[0].f_high_hz == doctest::Approx(95.49e3).epsilon(1e-3));
    CHECK(r.bands[0].min_value == doctest::Approx(0.98700).epsilon(1e-4));
    CHECK(r.bands[1].f_low_hz == doctest::Approx(136.5e3).epsilon(1e-3));
    CHECK(r.bands[1].min_value == doctest::Approx(0.99272).epsilon(1e-4));
    CHECK(std::isfinite(r.bands[0].argmin_phase));
}

TEST_CASE("flat vacuum has no bands") {
    SpectralTriple s(FrequencyGrid::linear_hz(1, 100, 100));
    std::fill(s.s_qq.begin(), s.s_qq.end(), 1.0);
    std::fill(s.s_pp.begin(), s.s_pp.end(), 1.0);
    const OptimalSpectrum o = optimal_spectrum(s, 0.0);
    for (double v : o.value) CHECK(v == 1.0);
    CHECK(find_squeezing_bands(o, s.grid).bands.empty());
}

TEST_CASE("phase separation is taken modulo pi") {
    const double pi = std::numbers::pi;
    CHECK(phase_separation(0.1, pi - 0.1) == doctest::Approx(0.2));
    CHECK(phase_separation(0.0, pi / 2) == doctest::Approx(pi / 2));
    CHECK(phase_separation(1.0, 1.0 + 3 * pi) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(phase_separation(2.0, 0.5) == doctest::Approx(1.5));
}
