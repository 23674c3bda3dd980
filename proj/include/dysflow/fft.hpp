#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace dysflow {

// Thin RAII wrappers over FFTW. Plans are created with FFTW_ESTIMATE so
// transforms are bit-reproducible across runs. Plan creation is serialized
// internally (the FFTW planner is not thread safe); each instance owns its
// buffers, so concurrent use requires one instance per thread.

class RealFft {
public:
    explicit RealFft(std::size_t n);
    ~RealFft();
    RealFft(const RealFft&) = delete;
    RealFft& operator=(const RealFft&) = delete;

    std::size_t size() const { return n_; }

    // Forward r2c transform. Input shorter than size() is zero padded.
    // Output has size()/2 + 1 bins.
    std::vector<std::complex<double>> forward(const std::vector<double>& x);

private:
    std::size_t n_;
    void* plan_;
    double* in_;
    void* out_;
};

class ComplexFft {
public:
    explicit ComplexFft(std::size_t n);
    ~ComplexFft();
    ComplexFft(const ComplexFft&) = delete;
    ComplexFft& operator=(const ComplexFft&) = delete;

    std::size_t size() const { return n_; }

    std::vector<std::complex<double>> forward(const std::vector<std::complex<double>>& x);
    // Unnormalized inverse; caller divides by size().
    std::vector<std::complex<double>> inverse(const std::vector<std::complex<double>>& x);

private:
    std::size_t n_;
    void* fwd_plan_;
    void* inv_plan_;
    void* in_;
    void* out_;

    std::vector<std::complex<double>> run(void* plan, const std::vector<std::complex<double>>& x);
};

}  // namespace dysflow
