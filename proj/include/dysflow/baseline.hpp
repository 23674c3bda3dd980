#pragma once

#include <cstddef>
#include <vector>

#include "dysflow/audio.hpp"
#include "dysflow/cepstra.hpp"

namespace dysflow::baseline {

// Short-time analysis grid for the STFT-based comparison features.
struct FrameConfig {
    double window_ms = 25.0;  // Hamming window
    double hop_ms = 10.0;

    std::size_t window_samples(int sample_rate) const;
    std::size_t hop_samples(int sample_rate) const;
    std::size_t fft_size(int sample_rate) const;  // next power of two >= window
};

// 13 MFCCs per frame: power spectrum -> mel filterbank -> log -> DCT-II.
cepstra::CepstralMatrix mfcc(const audio::AudioClip& clip, const FrameConfig& fcfg = {},
                             const cepstra::PerceptualConfig& pcfg = {});

// 13 PLP cepstra per frame: Bark critical-band integration, equal loudness,
// cube-root compression, order-12 all-pole model, cepstral recursion.
cepstra::CepstralMatrix plpcc(const audio::AudioClip& clip, const FrameConfig& fcfg = {},
                              const cepstra::PerceptualConfig& pcfg = {});

constexpr std::size_t kPlpBands = 21;
constexpr std::size_t kPlpOrder = 12;

struct LevinsonResult {
    std::vector<double> lpc;         // a_1..a_p, prediction x[n] ~ sum a_j x[n-j]
    std::vector<double> reflection;  // k_1..k_p, all |k| < 1 for valid input
    double error = 0.0;              // final prediction error power
};

// Levinson-Durbin solve of the order-p Toeplitz normal equations.
LevinsonResult levinson(const std::vector<double>& autocorr, std::size_t order);

// Minimum-phase cepstrum of the all-pole model; c[0] = log(error power).
std::vector<double> lpc_to_cepstrum(const LevinsonResult& model, std::size_t n_ceps);

double hz_to_bark(double hz);

}  // namespace dysflow::baseline
