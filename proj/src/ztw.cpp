#include "dysflow/ztw.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "dysflow/error.hpp"
#include "dysflow/fft.hpp"

namespace dysflow::ztw {

std::size_t ZtwConfig::segment_samples(int sample_rate) const {
    return std::size_t(std::llround(segment_ms * sample_rate / 1000.0));
}

std::size_t ZtwConfig::hop_samples(int sample_rate) const {
    return std::size_t(std::llround(hop_ms * sample_rate / 1000.0));
}

void ZtwConfig::validate(int sample_rate) const {
    const std::size_t m = segment_samples(sample_rate);
    if (m == 0) throw UsageError("ztw: segment length is zero samples");
    if (dft_size < 4 * m)
        throw UsageError("ztw: dft_size must be at least 4x the segment length");
    if (hop_samples(sample_rate) == 0) throw UsageError("ztw: hop is zero samples");
    if (pre_emphasis_alpha < 0.0 || pre_emphasis_alpha >= 1.0)
        throw UsageError("ztw: pre-emphasis alpha must be in [0, 1)");
}

std::vector<double> make_w1(std::size_t m, std::size_t dft_size) {
    if (m == 0 || m >= dft_size) throw UsageError("make_w1: need 1 <= M < N");
    std::vector<double> w(m);
    w[0] = 0.0;
    for (std::size_t n = 1; n < m; ++n) {
        const double s = std::sin(std::numbers::pi * double(n) / (2.0 * double(dft_size)));
        w[n] = 1.0 / (4.0 * s * s);
    }
    return w;
}

std::vector<double> make_w2(std::size_t m) {
    if (m == 0) throw UsageError("make_w2: M must be positive");
    std::vector<double> w(m);
    for (std::size_t n = 0; n < m; ++n) {
        const double c = std::cos(std::numbers::pi * double(n) / (2.0 * double(m)));
        w[n] = 4.0 * c * c;
    }
    return w;
}

namespace {

std::vector<double> ngd_from_ffts(const std::vector<double>& segment, RealFft& fft) {
    std::vector<double> ramped(segment.size());
    for (std::size_t n = 0; n < segment.size(); ++n) ramped[n] = double(n) * segment[n];
    const auto x = fft.forward(segment);
    const auto y = fft.forward(ramped);
    std::vector<double> g(x.size());
    for (std::size_t k = 0; k < g.size(); ++k)
        g[k] = x[k].real() * y[k].real() + x[k].imag() * y[k].imag();
    return g;
}

std::vector<double> envelope_with(const std::vector<double>& v, ComplexFft& fft) {
    const std::size_t n = v.size();
    std::vector<std::complex<double>> buf(n);
    for (std::size_t k = 0; k < n; ++k) buf[k] = v[k];
    auto spec = fft.forward(buf);
    // Analytic signal: keep DC (and Nyquist for even n), double the positive
    // frequencies, zero the negative ones.
    const std::size_t half = n / 2;
    for (std::size_t k = 1; k < n; ++k) {
        if (k < half || (k == half && n % 2 != 0)) {
            spec[k] *= 2.0;
        } else if (k > half) {
            spec[k] = 0.0;
        }
    }
    auto analytic = fft.inverse(spec);
    std::vector<double> env(n);
    for (std::size_t k = 0; k < n; ++k) env[k] = std::abs(analytic[k]) / double(n);
    return env;
}

}  // namespace

std::vector<double> ngd_spectrum(const std::vector<double>& segment, std::size_t dft_size) {
    if (segment.size() > dft_size) throw UsageError("ngd_spectrum: segment longer than DFT size");
    RealFft fft(dft_size);
    return ngd_from_ffts(segment, fft);
}

std::vector<double> double_difference(const std::vector<double>& v) {
    if (v.size() < 3) throw UsageError("double_difference: need at least 3 points");
    std::vector<double> d(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) {
        const double prev = k > 0 ? v[k - 1] : 0.0;
        const double next = k + 1 < v.size() ? v[k + 1] : 0.0;
        d[k] = next - 2.0 * v[k] + prev;
    }
    return d;
}

std::vector<double> hilbert_envelope(const std::vector<double>& v) {
    if (v.size() < 2) throw UsageError("hilbert_envelope: need at least 2 points");
    ComplexFft fft(v.size());
    return envelope_with(v, fft);
}

SpectroTemporalMatrix ztw_spectrogram(const audio::AudioClip& clip, const ZtwConfig& cfg) {
    if (!clip.canonical()) throw DataError("ztw_spectrogram: canonical 16 kHz mono clip required");
    cfg.validate(clip.sample_rate);
    const std::size_t m = cfg.segment_samples(clip.sample_rate);
    const std::size_t hop = cfg.hop_samples(clip.sample_rate);
    if (clip.samples.size() < m) throw DataError("ztw_spectrogram: clip shorter than one segment");

    const auto emphasized = audio::pre_emphasize(clip.samples, cfg.pre_emphasis_alpha);
    const auto w1 = make_w1(m, cfg.dft_size);
    const auto w2 = make_w2(m);
    std::vector<double> window(m);
    for (std::size_t n = 0; n < m; ++n) window[n] = w1[n] * w1[n] * w2[n];

    const std::size_t n_bins = cfg.dft_size / 2 + 1;
    const std::size_t n_frames = (emphasized.size() - m) / hop + 1;

    SpectroTemporalMatrix out;
    out.values = Matrix<double>(n_frames, n_bins);
    out.bin_hz = double(clip.sample_rate) / double(cfg.dft_size);
    out.frame_hop_s = double(hop) / clip.sample_rate;

    RealFft fft(cfg.dft_size);
    ComplexFft env_fft(n_bins);
    std::vector<double> segment(m);
    for (std::size_t t = 0; t < n_frames; ++t) {
        const std::size_t start = t * hop;
        for (std::size_t n = 0; n < m; ++n) segment[n] = emphasized[start + n] * window[n];
        const auto envelope = envelope_with(double_difference(ngd_from_ffts(segment, fft)), env_fft);
        std::copy(envelope.begin(), envelope.end(), out.values.row(t));
    }
    return out;
}

}  // namespace dysflow::ztw
