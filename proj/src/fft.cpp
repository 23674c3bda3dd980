#include "dysflow/fft.hpp"

#include <fftw3.h>

#include <cstring>
#include <mutex>
#include <stdexcept>

namespace dysflow {

namespace {
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace

RealFft::RealFft(std::size_t n) : n_(n) {
    if (n == 0) throw std::invalid_argument("RealFft: size must be positive");
    in_ = fftw_alloc_real(n);
    out_ = fftw_alloc_complex(n / 2 + 1);
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, static_cast<fftw_complex*>(out_),
                                 FFTW_ESTIMATE);
}

RealFft::~RealFft() {
    {
        std::lock_guard<std::mutex> lock(planner_mutex());
        fftw_destroy_plan(static_cast<fftw_plan>(plan_));
    }
    fftw_free(in_);
    fftw_free(out_);
}

std::vector<std::complex<double>> RealFft::forward(const std::vector<double>& x) {
    if (x.size() > n_) throw std::invalid_argument("RealFft: input longer than transform size");
    std::memcpy(in_, x.data(), x.size() * sizeof(double));
    std::memset(in_ + x.size(), 0, (n_ - x.size()) * sizeof(double));
    fftw_execute(static_cast<fftw_plan>(plan_));
    const auto* o = static_cast<const fftw_complex*>(out_);
    std::vector<std::complex<double>> result(n_ / 2 + 1);
    for (std::size_t k = 0; k < result.size(); ++k) result[k] = {o[k][0], o[k][1]};
    return result;
}

ComplexFft::ComplexFft(std::size_t n) : n_(n) {
    if (n == 0) throw std::invalid_argument("ComplexFft: size must be positive");
    in_ = fftw_alloc_complex(n);
    out_ = fftw_alloc_complex(n);
    std::lock_guard<std::mutex> lock(planner_mutex());
    fwd_plan_ = fftw_plan_dft_1d(static_cast<int>(n), static_cast<fftw_complex*>(in_),
                                 static_cast<fftw_complex*>(out_), FFTW_FORWARD, FFTW_ESTIMATE);
    inv_plan_ = fftw_plan_dft_1d(static_cast<int>(n), static_cast<fftw_complex*>(in_),
                                 static_cast<fftw_complex*>(out_), FFTW_BACKWARD, FFTW_ESTIMATE);
}

ComplexFft::~ComplexFft() {
    {
        std::lock_guard<std::mutex> lock(planner_mutex());
        fftw_destroy_plan(static_cast<fftw_plan>(fwd_plan_));
        fftw_destroy_plan(static_cast<fftw_plan>(inv_plan_));
    }
    fftw_free(in_);
    fftw_free(out_);
}

std::vector<std::complex<double>> ComplexFft::run(void* plan,
                                                  const std::vector<std::complex<double>>& x) {
    if (x.size() != n_) throw std::invalid_argument("ComplexFft: input size mismatch");
    auto* i = static_cast<fftw_complex*>(in_);
    for (std::size_t k = 0; k < n_; ++k) {
        i[k][0] = x[k].real();
        i[k][1] = x[k].imag();
    }
    fftw_execute(static_cast<fftw_plan>(plan));
    const auto* o = static_cast<const fftw_complex*>(out_);
    std::vector<std::complex<double>> result(n_);
    for (std::size_t k = 0; k < n_; ++k) result[k] = {o[k][0], o[k][1]};
    return result;
}

std::vector<std::complex<double>> ComplexFft::forward(const std::vector<std::complex<double>>& x) {
    return run(fwd_plan_, x);
}

std::vector<std::complex<double>> ComplexFft::inverse(const std::vector<std::complex<double>>& x) {
    return run(inv_plan_, x);
}

}  // namespace dysflow
