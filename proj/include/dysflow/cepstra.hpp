#pragma once

#include <cstddef>
#include <vector>

#include "dysflow/audio.hpp"
#include "dysflow/matrix.hpp"
#include "dysflow/ztw.hpp"

namespace dysflow::cepstra {

enum class FeatureKind { PeZtwcc, Ztwcc, Mfcc, Plp };

const char* feature_kind_name(FeatureKind kind);
FeatureKind feature_kind_from_name(const std::string& name);

struct PerceptualConfig {
    std::size_t n_mel_bands = 40;
    double f_min = 0.0;
    double f_max = 8000.0;
    std::size_t n_ceps = 13;
    double log_floor = 1e-10;
    // The intensity-loudness power law is fixed at 1/5 for the enhanced
    // features; it is not a tunable.
    static constexpr double power_exponent = 0.2;

    void validate(int sample_rate) const;
};

struct CepstralMatrix {
    Matrix<float> values;  // frames x n_ceps
    double frame_hop_s = 0.0;
    FeatureKind kind = FeatureKind::PeZtwcc;
};

struct MelFilterbank {
    Matrix<double> weights;  // n_bands x n_bins, each row peaks at 1
    std::vector<double> centers_hz;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Triangular filters with peaks at mel-equispaced centers and 50% overlap.
MelFilterbank mel_filterbank(std::size_t n_bands, std::size_t n_bins, int sample_rate,
                             double f_min, double f_max);

// Warped band b = dot(filter_b, frame).
std::vector<double> warp(const std::vector<double>& frame, const MelFilterbank& fb);

// Equal-loudness weighting evaluated at each band's center frequency.
std::vector<double> equal_loudness(const std::vector<double>& bands,
                                   const std::vector<double>& centers_hz);
double equal_loudness_weight(double omega);

// Elementwise x^(1/5).
std::vector<double> power_law(const std::vector<double>& bands);

// First n_ceps coefficients of the orthonormal DCT-II of log(max(bands, floor)).
std::vector<double> cepstrum_from_bands(const std::vector<double>& bands, std::size_t n_ceps,
                                        double log_floor);

// Perceptually enhanced ZTW cepstra: warp -> equal loudness -> power law ->
// log -> DCT per spectrogram frame.
CepstralMatrix pe_ztwcc(const audio::AudioClip& clip, const ztw::ZtwConfig& zcfg = {},
                        const PerceptualConfig& pcfg = {});

// Plain ZTW cepstra: same front end and mel warping, no enhancement stages.
CepstralMatrix ztwcc(const audio::AudioClip& clip, const ztw::ZtwConfig& zcfg = {},
                     const PerceptualConfig& pcfg = {});

}  // namespace dysflow::cepstra
