#pragma once

#include <cstddef>
#include <vector>

#include "dysflow/audio.hpp"
#include "dysflow/matrix.hpp"

namespace dysflow::ztw {

struct ZtwConfig {
    double segment_ms = 5.0;   // L
    std::size_t dft_size = 2048;  // N, must satisfy N >= 4*M
    double hop_ms = 10.0;
    double pre_emphasis_alpha = 0.97;

    std::size_t segment_samples(int sample_rate) const;  // M = L*fs/1000
    std::size_t hop_samples(int sample_rate) const;
    void validate(int sample_rate) const;
};

// Frames x one-sided frequency bins, non-negative (Hilbert envelope output).
struct SpectroTemporalMatrix {
    Matrix<double> values;
    double bin_hz = 0.0;
    double frame_hop_s = 0.0;
};

// Heavily decaying window: w1[0] = 0, w1[n] = 1 / (4 sin^2(pi n / 2N)).
std::vector<double> make_w1(std::size_t m, std::size_t dft_size);

// Squared half-cosine ripple suppressor: w2[n] = 4 cos^2(pi n / 2M).
std::vector<double> make_w2(std::size_t m);

// Numerator of the group-delay function of the windowed segment, one-sided:
// g[k] = Re(X_k) Re(Y_k) + Im(X_k) Im(Y_k) with y[n] = n x[n].
std::vector<double> ngd_spectrum(const std::vector<double>& segment, std::size_t dft_size);

// d[k] = v[k+1] - 2 v[k] + v[k-1], zero padded at the boundaries.
std::vector<double> double_difference(const std::vector<double>& v);

// Magnitude of the analytic extension of v (applied along the frequency axis).
std::vector<double> hilbert_envelope(const std::vector<double>& v);

// Full ZTW analysis: per hop, a pre-emphasized M-sample segment is windowed
// by w1^2 * w2 and passed through NGD -> double difference -> Hilbert
// envelope. Rows are analysis instants, columns one-sided DFT bins.
SpectroTemporalMatrix ztw_spectrogram(const audio::AudioClip& clip, const ZtwConfig& cfg = {});

}  // namespace dysflow::ztw
