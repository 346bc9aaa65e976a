#pragma once

// Thin RAII layer over FFTW. Internal to the library.

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <mutex>
#include <span>
#include <vector>

namespace osq::detail {

inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

/// In-place complex-to-real transform over a buffer of 2*(n/2+1) doubles
/// holding interleaved Hermitian half-spectrum bins. Unnormalized:
/// x[t] = sum_k X_k e^{+2 pi i k t / n}.
inline void inverse_real_inplace(std::vector<double>& buffer, std::size_t n) {
    fftw_plan plan;
    {
        std::lock_guard lock(fftw_planner_mutex());
        plan = fftw_plan_dft_c2r_1d(static_cast<int>(n), reinterpret_cast<fftw_complex*>(buffer.data()),
                                    buffer.data(), FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
}

/// Reusable forward real-to-complex transform of fixed length.
class RealForward {
public:
    explicit RealForward(std::size_t n) : n_(n), in_(n), out_(n / 2 + 1) {
        std::lock_guard lock(fftw_planner_mutex());
        plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_.data(), reinterpret_cast<fftw_complex*>(out_.data()),
                                     FFTW_ESTIMATE);
    }
    ~RealForward() {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(plan_);
    }
    RealForward(const RealForward&) = delete;
    RealForward& operator=(const RealForward&) = delete;

    std::span<double> input() { return in_; }
    std::span<const std::complex<double>> execute() {
        fftw_execute(plan_);
        return out_;
    }
    std::size_t size() const { return n_; }

private:
    std::size_t n_;
    std::vector<double> in_;
    std::vector<std::complex<double>> out_;
    fftw_plan plan_;
};

}  // namespace osq::detail
