#include "dysflow/cepstra.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "dysflow/error.hpp"

namespace dysflow::cepstra {

const char* feature_kind_name(FeatureKind kind) {
    switch (kind) {
        case FeatureKind::PeZtwcc: return "pe-ztwcc";
        case FeatureKind::Ztwcc: return "ztwcc";
        case FeatureKind::Mfcc: return "mfcc";
        case FeatureKind::Plp: return "plp";
    }
    return "?";
}

FeatureKind feature_kind_from_name(const std::string& name) {
    if (name == "pe-ztwcc") return FeatureKind::PeZtwcc;
    if (name == "ztwcc") return FeatureKind::Ztwcc;
    if (name == "mfcc") return FeatureKind::Mfcc;
    if (name == "plp") return FeatureKind::Plp;
    throw UsageError("unknown feature kind: " + name);
}

void PerceptualConfig::validate(int sample_rate) const {
    if (n_mel_bands < 2) throw UsageError("perceptual: need at least 2 mel bands");
    if (n_ceps > n_mel_bands) throw UsageError("perceptual: n_ceps must not exceed band count");
    if (f_min < 0.0 || f_min >= f_max) throw UsageError("perceptual: need 0 <= f_min < f_max");
    if (f_max > sample_rate / 2.0) throw UsageError("perceptual: f_max above Nyquist");
    if (log_floor <= 0.0) throw UsageError("perceptual: log_floor must be positive");
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelFilterbank mel_filterbank(std::size_t n_bands, std::size_t n_bins, int sample_rate,
                             double f_min, double f_max) {
    if (n_bands < 2) throw UsageError("mel_filterbank: need at least 2 bands");
    if (n_bins < n_bands) throw UsageError("mel_filterbank: more bands than bins");
    if (f_max > sample_rate / 2.0) throw UsageError("mel_filterbank: f_max above Nyquist");

    // Band edges are mel equispaced; band b spans edges [b, b+2] with its
    // peak at edge b+1, so adjacent filters overlap by half.
    const double mel_lo = hz_to_mel(f_min);
    const double mel_hi = hz_to_mel(f_max);
    std::vector<double> edges_hz(n_bands + 2);
    for (std::size_t i = 0; i < edges_hz.size(); ++i)
        edges_hz[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * double(i) / double(n_bands + 1));

    // Bin k of a one-sided n_bins spectrum sits at k * fs / (2 * (n_bins - 1)).
    const double bin_hz = sample_rate / 2.0 / double(n_bins - 1);

    MelFilterbank fb;
    fb.weights = Matrix<double>(n_bands, n_bins);
    fb.centers_hz.resize(n_bands);
    for (std::size_t b = 0; b < n_bands; ++b) {
        const double lo = edges_hz[b], center = edges_hz[b + 1], hi = edges_hz[b + 2];
        fb.centers_hz[b] = center;
        double peak = 0.0;
        for (std::size_t k = 0; k < n_bins; ++k) {
            const double f = k * bin_hz;
            double w = 0.0;
            if (f > lo && f < hi)
                w = f <= center ? (f - lo) / (center - lo) : (hi - f) / (hi - center);
            fb.weights.at(b, k) = w;
            peak = std::max(peak, w);
        }
        if (peak <= 0.0) throw UsageError("mel_filterbank: empty filter (too many bands for bins)");
        for (std::size_t k = 0; k < n_bins; ++k) fb.weights.at(b, k) /= peak;
    }
    return fb;
}

std::vector<double> warp(const std::vector<double>& frame, const MelFilterbank& fb) {
    if (frame.size() != fb.weights.cols) throw UsageError("warp: frame/filterbank size mismatch");
    std::vector<double> bands(fb.weights.rows);
    for (std::size_t b = 0; b < bands.size(); ++b) {
        const double* w = fb.weights.row(b);
        double acc = 0.0;
        for (std::size_t k = 0; k < frame.size(); ++k) acc += w[k] * frame[k];
        bands[b] = acc;
    }
    return bands;
}

double equal_loudness_weight(double omega) {
    const double w2 = omega * omega;
    const double num = (w2 + 56.8e6) * w2 * w2;
    const double den = (w2 + 6.3e6) * (w2 + 6.3e6) * (w2 + 0.38e9);
    return num / den;
}

std::vector<double> equal_loudness(const std::vector<double>& bands,
                                   const std::vector<double>& centers_hz) {
    if (bands.size() != centers_hz.size()) throw UsageError("equal_loudness: length mismatch");
    std::vector<double> out(bands.size());
    for (std::size_t b = 0; b < bands.size(); ++b)
        out[b] = bands[b] * equal_loudness_weight(2.0 * std::numbers::pi * centers_hz[b]);
    return out;
}

std::vector<double> power_law(const std::vector<double>& bands) {
    std::vector<double> out(bands.size());
    for (std::size_t b = 0; b < bands.size(); ++b) {
        if (bands[b] < 0.0) throw DataError("power_law: negative band energy");
        out[b] = std::pow(bands[b], PerceptualConfig::power_exponent);
    }
    return out;
}

std::vector<double> cepstrum_from_bands(const std::vector<double>& bands, std::size_t n_ceps,
                                        double log_floor) {
    const std::size_t n = bands.size();
    if (n_ceps > n) throw UsageError("cepstrum_from_bands: n_ceps exceeds band count");
    std::vector<double> logb(n);
    for (std::size_t b = 0; b < n; ++b) logb[b] = std::log(std::max(bands[b], log_floor));

    std::vector<double> c(n_ceps);
    const double scale0 = std::sqrt(1.0 / double(n));
    const double scale = std::sqrt(2.0 / double(n));
    for (std::size_t k = 0; k < n_ceps; ++k) {
        double acc = 0.0;
        for (std::size_t b = 0; b < n; ++b)
            acc += logb[b] * std::cos(std::numbers::pi * double(k) * (2.0 * double(b) + 1.0) /
                                      (2.0 * double(n)));
        c[k] = (k == 0 ? scale0 : scale) * acc;
    }
    return c;
}

namespace {

CepstralMatrix ztw_cepstra(const audio::AudioClip& clip, const ztw::ZtwConfig& zcfg,
                           const PerceptualConfig& pcfg, bool enhanced) {
    pcfg.validate(audio::kCanonicalRate);
    const auto spec = ztw::ztw_spectrogram(clip, zcfg);
    const auto fb = mel_filterbank(pcfg.n_mel_bands, spec.values.cols, audio::kCanonicalRate,
                                   pcfg.f_min, pcfg.f_max);

    CepstralMatrix out;
    out.values = Matrix<float>(spec.values.rows, pcfg.n_ceps);
    out.frame_hop_s = spec.frame_hop_s;
    out.kind = enhanced ? FeatureKind::PeZtwcc : FeatureKind::Ztwcc;

    std::vector<double> frame(spec.values.cols);
    for (std::size_t t = 0; t < spec.values.rows; ++t) {
        frame.assign(spec.values.row(t), spec.values.row(t) + spec.values.cols);
        auto bands = warp(frame, fb);
        if (enhanced) bands = power_law(equal_loudness(bands, fb.centers_hz));
        const auto c = cepstrum_from_bands(bands, pcfg.n_ceps, pcfg.log_floor);
        for (std::size_t k = 0; k < pcfg.n_ceps; ++k) out.values.at(t, k) = float(c[k]);
    }
    return out;
}

}  // namespace

CepstralMatrix pe_ztwcc(const audio::AudioClip& clip, const ztw::ZtwConfig& zcfg,
                        const PerceptualConfig& pcfg) {
    return ztw_cepstra(clip, zcfg, pcfg, true);
}

CepstralMatrix ztwcc(const audio::AudioClip& clip, const ztw::ZtwConfig& zcfg,
                     const PerceptualConfig& pcfg) {
    return ztw_cepstra(clip, zcfg, pcfg, false);
}

}  // namespace dysflow::cepstra
