#include "dysflow/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dysflow/error.hpp"
#include "dysflow/fft.hpp"

namespace dysflow::baseline {

std::size_t FrameConfig::window_samples(int sample_rate) const {
    return std::size_t(std::llround(window_ms * sample_rate / 1000.0));
}

std::size_t FrameConfig::hop_samples(int sample_rate) const {
    return std::size_t(std::llround(hop_ms * sample_rate / 1000.0));
}

std::size_t FrameConfig::fft_size(int sample_rate) const {
    std::size_t n = 1;
    while (n < window_samples(sample_rate)) n <<= 1;
    return n;
}

namespace {

// Hamming-windowed one-sided power spectra, one row per frame.
Matrix<double> power_frames(const audio::AudioClip& clip, const FrameConfig& fcfg) {
    if (!clip.canonical()) throw DataError("baseline features: canonical clip required");
    const std::size_t w = fcfg.window_samples(clip.sample_rate);
    const std::size_t hop = fcfg.hop_samples(clip.sample_rate);
    if (w == 0 || hop == 0) throw UsageError("frame config: zero window or hop");
    if (clip.samples.size() < w) throw DataError("clip shorter than one analysis frame");

    std::vector<double> window(w);
    for (std::size_t n = 0; n < w; ++n)
        window[n] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * double(n) / double(w - 1));

    const std::size_t nfft = fcfg.fft_size(clip.sample_rate);
    const std::size_t n_bins = nfft / 2 + 1;
    const std::size_t n_frames = (clip.samples.size() - w) / hop + 1;

    RealFft fft(nfft);
    Matrix<double> power(n_frames, n_bins);
    std::vector<double> frame(w);
    for (std::size_t t = 0; t < n_frames; ++t) {
        for (std::size_t n = 0; n < w; ++n) frame[n] = clip.samples[t * hop + n] * window[n];
        const auto spec = fft.forward(frame);
        for (std::size_t k = 0; k < n_bins; ++k) power.at(t, k) = std::norm(spec[k]);
    }
    return power;
}

}  // namespace

cepstra::CepstralMatrix mfcc(const audio::AudioClip& clip, const FrameConfig& fcfg,
                             const cepstra::PerceptualConfig& pcfg) {
    pcfg.validate(audio::kCanonicalRate);
    const auto power = power_frames(clip, fcfg);
    const auto fb = cepstra::mel_filterbank(pcfg.n_mel_bands, power.cols, clip.sample_rate,
                                            pcfg.f_min, pcfg.f_max);

    cepstra::CepstralMatrix out;
    out.values = Matrix<float>(power.rows, pcfg.n_ceps);
    out.frame_hop_s = fcfg.hop_ms / 1000.0;
    out.kind = cepstra::FeatureKind::Mfcc;

    std::vector<double> frame(power.cols);
    for (std::size_t t = 0; t < power.rows; ++t) {
        frame.assign(power.row(t), power.row(t) + power.cols);
        const auto bands = cepstra::warp(frame, fb);
        const auto c = cepstra::cepstrum_from_bands(bands, pcfg.n_ceps, pcfg.log_floor);
        for (std::size_t k = 0; k < pcfg.n_ceps; ++k) out.values.at(t, k) = float(c[k]);
    }
    return out;
}

double hz_to_bark(double hz) { return 6.0 * std::asinh(hz / 600.0); }

LevinsonResult levinson(const std::vector<double>& autocorr, std::size_t order) {
    if (autocorr.size() < order + 1) throw UsageError("levinson: need order+1 autocorrelations");
    LevinsonResult res;
    res.lpc.assign(order, 0.0);
    res.reflection.assign(order, 0.0);

    double r0 = autocorr[0];
    if (r0 <= 0.0) {
        // Degenerate (silence); return the zero model with a floored error.
        res.error = 1e-10;
        return res;
    }

    std::vector<double> a(order + 1, 0.0);
    double err = r0;
    for (std::size_t i = 1; i <= order; ++i) {
        double acc = autocorr[i];
        for (std::size_t j = 1; j < i; ++j) acc -= a[j] * autocorr[i - j];
        const double k = acc / err;
        res.reflection[i - 1] = k;
        std::vector<double> prev(a.begin(), a.begin() + std::ptrdiff_t(i));
        a[i] = k;
        for (std::size_t j = 1; j < i; ++j) a[j] = prev[j] - k * prev[i - j];
        err *= (1.0 - k * k);
        if (err <= 0.0) {
            err = 1e-10;
            break;
        }
    }
    res.lpc.assign(a.begin() + 1, a.end());
    res.error = err;
    return res;
}

std::vector<double> lpc_to_cepstrum(const LevinsonResult& model, std::size_t n_ceps) {
    const std::size_t p = model.lpc.size();
    std::vector<double> c(n_ceps, 0.0);
    if (n_ceps == 0) return c;
    c[0] = std::log(std::max(model.error, 1e-30));
    for (std::size_t m = 1; m < n_ceps; ++m) {
        double acc = m <= p ? model.lpc[m - 1] : 0.0;
        for (std::size_t k = 1; k < m; ++k) {
            if (m - k <= p) acc += (double(k) / double(m)) * c[k] * model.lpc[m - k - 1];
        }
        c[m] = acc;
    }
    return c;
}

cepstra::CepstralMatrix plpcc(const audio::AudioClip& clip, const FrameConfig& fcfg,
                              const cepstra::PerceptualConfig& pcfg) {
    const auto power = power_frames(clip, fcfg);
    const std::size_t n_bins = power.cols;
    const double bin_hz = clip.sample_rate / 2.0 / double(n_bins - 1);

    // Critical-band integration: kPlpBands centers equally spaced on the
    // Bark axis, each with the asymmetric masking curve of the classic PLP
    // construction.
    const double bark_max = hz_to_bark(clip.sample_rate / 2.0);
    std::vector<double> centers_bark(kPlpBands), centers_hz(kPlpBands);
    for (std::size_t b = 0; b < kPlpBands; ++b) {
        centers_bark[b] = bark_max * double(b) / double(kPlpBands - 1);
        centers_hz[b] = 600.0 * std::sinh(centers_bark[b] / 6.0);
    }
    Matrix<double> cb(kPlpBands, n_bins);
    for (std::size_t b = 0; b < kPlpBands; ++b) {
        for (std::size_t k = 0; k < n_bins; ++k) {
            const double d = hz_to_bark(k * bin_hz) - centers_bark[b];
            double w = 0.0;
            if (d >= -1.3 && d <= -0.5)
                w = std::pow(10.0, 2.5 * (d + 0.5));
            else if (d > -0.5 && d < 0.5)
                w = 1.0;
            else if (d >= 0.5 && d <= 2.5)
                w = std::pow(10.0, -1.0 * (d - 0.5));
            cb.at(b, k) = w;
        }
    }

    cepstra::CepstralMatrix out;
    out.values = Matrix<float>(power.rows, pcfg.n_ceps);
    out.frame_hop_s = fcfg.hop_ms / 1000.0;
    out.kind = cepstra::FeatureKind::Plp;

    std::vector<double> bands(kPlpBands);
    const std::size_t ext = 2 * (kPlpBands - 1);  // even extension length
    std::vector<double> autocorr(kPlpOrder + 1);
    for (std::size_t t = 0; t < power.rows; ++t) {
        for (std::size_t b = 0; b < kPlpBands; ++b) {
            const double* w = cb.row(b);
            double acc = 0.0;
            for (std::size_t k = 0; k < n_bins; ++k) acc += w[k] * power.at(t, k);
            bands[b] = acc;
        }
        for (std::size_t b = 0; b < kPlpBands; ++b)
            bands[b] *= cepstra::equal_loudness_weight(2.0 * std::numbers::pi * centers_hz[b]);
        // Edge bands are unreliable integrals; copy the neighbors.
        bands[0] = bands[1];
        bands[kPlpBands - 1] = bands[kPlpBands - 2];
        for (std::size_t b = 0; b < kPlpBands; ++b)
            bands[b] = std::cbrt(std::max(bands[b], pcfg.log_floor));

        // Autocorrelation = inverse DFT of the even-extended auditory spectrum.
        for (std::size_t i = 0; i <= kPlpOrder; ++i) {
            double acc = bands[0] + (i % 2 == 0 ? 1.0 : -1.0) * bands[kPlpBands - 1];
            for (std::size_t j = 1; j + 1 < kPlpBands; ++j)
                acc += 2.0 * bands[j] *
                       std::cos(2.0 * std::numbers::pi * double(i) * double(j) / double(ext));
            autocorr[i] = acc / double(ext);
        }

        const auto model = levinson(autocorr, kPlpOrder);
        const auto c = lpc_to_cepstrum(model, pcfg.n_ceps);
        for (std::size_t k = 0; k < pcfg.n_ceps; ++k) out.values.at(t, k) = float(c[k]);
    }
    return out;
}

}  // namespace dysflow::baseline
