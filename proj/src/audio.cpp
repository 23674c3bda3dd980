#include "dysflow/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>

#include "dysflow/error.hpp"

namespace dysflow::audio {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;

std::uint32_t read_u32(const unsigned char* p) {
    return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
           std::uint32_t(p[3]) << 24;
}

std::uint16_t read_u16(const unsigned char* p) { return std::uint16_t(p[0] | p[1] << 8); }

void put_u32(std::string& s, std::uint32_t v) {
    s.push_back(char(v & 0xff));
    s.push_back(char((v >> 8) & 0xff));
    s.push_back(char((v >> 16) & 0xff));
    s.push_back(char((v >> 24) & 0xff));
}

void put_u16(std::string& s, std::uint16_t v) {
    s.push_back(char(v & 0xff));
    s.push_back(char((v >> 8) & 0xff));
}

double i0(double x) {
    // Modified Bessel function of the first kind, order zero (power series).
    double sum = 1.0, term = 1.0;
    const double q = x * x / 4.0;
    for (int k = 1; k < 64; ++k) {
        term *= q / (double(k) * k);
        sum += term;
        if (term < 1e-16 * sum) break;
    }
    return sum;
}

double sinc(double x) {
    if (x == 0.0) return 1.0;
    const double px = std::numbers::pi * x;
    return std::sin(px) / px;
}

}  // namespace

AudioClip load_wav(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open WAV file: " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    const std::size_t n = bytes.size();
    if (n < 12 || std::memcmp(p, "RIFF", 4) != 0 || std::memcmp(p + 8, "WAVE", 4) != 0)
        throw FormatError("not a RIFF/WAVE file: " + path);

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    const unsigned char* data = nullptr;
    std::uint32_t data_len = 0;

    std::size_t off = 12;
    while (off + 8 <= n) {
        const std::uint32_t chunk_len = read_u32(p + off + 4);
        const unsigned char* body = p + off + 8;
        if (off + 8 + chunk_len > n) throw FormatError("truncated chunk in " + path);
        if (std::memcmp(p + off, "fmt ", 4) == 0) {
            if (chunk_len < 16) throw FormatError("short fmt chunk in " + path);
            format = read_u16(body);
            channels = read_u16(body + 2);
            rate = read_u32(body + 4);
            bits = read_u16(body + 14);
        } else if (std::memcmp(p + off, "data", 4) == 0) {
            data = body;
            data_len = chunk_len;
        }
        off += 8 + chunk_len + (chunk_len & 1);  // chunks are word aligned
    }

    if (data == nullptr || format == 0) throw FormatError("missing fmt/data chunk in " + path);
    if (channels < 1 || channels > 2)
        throw DataError("unsupported channel count " + std::to_string(channels) + " in " + path);
    if (rate == 0) throw DataError("zero sample rate in " + path);

    AudioClip clip;
    clip.sample_rate = int(rate);
    clip.channels = channels;
    clip.source_path = path;

    if (format == kFormatPcm && bits == 16) {
        const std::size_t count = data_len / 2;
        clip.samples.resize(count);
        for (std::size_t i = 0; i < count; ++i) {
            const std::int16_t v = std::int16_t(data[2 * i] | data[2 * i + 1] << 8);
            clip.samples[i] = double(v) / 32768.0;
        }
    } else if (format == kFormatFloat && bits == 32) {
        const std::size_t count = data_len / 4;
        clip.samples.resize(count);
        for (std::size_t i = 0; i < count; ++i) {
            std::uint32_t u = read_u32(data + 4 * i);
            float v;
            std::memcpy(&v, &u, 4);
            if (!std::isfinite(v)) throw DataError("non-finite sample in " + path);
            clip.samples[i] = double(v);
        }
    } else {
        throw DataError("unsupported WAV encoding (format " + std::to_string(format) + ", " +
                        std::to_string(bits) + "-bit) in " + path);
    }
    if (clip.samples.empty()) throw DataError("zero-length audio in " + path);
    return clip;
}

void write_wav(const std::string& path, const AudioClip& clip, WavFormat format) {
    if (clip.sample_rate <= 0) throw UsageError("write_wav: sample rate must be positive");
    if (clip.channels < 1 || clip.channels > 2) throw UsageError("write_wav: 1 or 2 channels only");

    const std::uint16_t bytes_per_sample = format == WavFormat::Pcm16 ? 2 : 4;
    const std::uint32_t data_len = std::uint32_t(clip.samples.size() * bytes_per_sample);

    std::string out;
    out.reserve(data_len + 64);
    out += "RIFF";
    const bool is_float = format == WavFormat::Float32;
    const std::uint32_t fact_len = is_float ? 12 : 0;
    put_u32(out, 4 + (8 + 16) + fact_len + (8 + data_len));
    out += "WAVEfmt ";
    put_u32(out, 16);
    put_u16(out, is_float ? kFormatFloat : kFormatPcm);
    put_u16(out, std::uint16_t(clip.channels));
    put_u32(out, std::uint32_t(clip.sample_rate));
    put_u32(out, std::uint32_t(clip.sample_rate) * clip.channels * bytes_per_sample);
    put_u16(out, std::uint16_t(clip.channels * bytes_per_sample));
    put_u16(out, std::uint16_t(bytes_per_sample * 8));
    if (is_float) {
        out += "fact";
        put_u32(out, 4);
        put_u32(out, std::uint32_t(clip.frames()));
    }
    out += "data";
    put_u32(out, data_len);

    if (format == WavFormat::Pcm16) {
        for (double v : clip.samples) {
            const double scaled = std::round(std::clamp(v, -1.0, 1.0) * 32768.0);
            const auto q = std::int16_t(std::clamp(scaled, -32768.0, 32767.0));
            put_u16(out, std::uint16_t(q));
        }
    } else {
        for (double v : clip.samples) {
            const float fv = float(v);
            std::uint32_t u;
            std::memcpy(&u, &fv, 4);
            put_u32(out, u);
        }
    }

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write WAV file: " + path);
    f.write(out.data(), std::streamsize(out.size()));
    if (!f) throw DataError("short write to " + path);
}

AudioClip to_mono(const AudioClip& clip) {
    if (clip.channels == 1) return clip;
    if (clip.channels != 2) throw DataError("to_mono: expected 1 or 2 channels");
    AudioClip mono;
    mono.sample_rate = clip.sample_rate;
    mono.channels = 1;
    mono.source_path = clip.source_path;
    mono.samples.resize(clip.frames());
    for (std::size_t i = 0; i < mono.samples.size(); ++i)
        mono.samples[i] = 0.5 * (clip.samples[2 * i] + clip.samples[2 * i + 1]);
    return mono;
}

AudioClip resample(const AudioClip& clip, int target_hz) {
    if (clip.samples.empty()) throw DataError("resample: empty clip");
    if (target_hz <= 0) throw UsageError("resample: target rate must be positive");
    if (clip.channels != 1) throw DataError("resample: mono input required");
    if (target_hz == clip.sample_rate) return clip;

    const int g = std::gcd(clip.sample_rate, target_hz);
    const std::int64_t up = target_hz / g;     // zero-stuffing factor
    const std::int64_t down = clip.sample_rate / g;

    // Prototype lowpass at the upsampled rate; odd length so the group delay
    // lands on an integer number of upsampled samples.
    constexpr int kTapsPerPhase = 32;
    constexpr double kKaiserBeta = 8.0;
    const std::int64_t len = kTapsPerPhase * up + 1;
    const std::int64_t delay = (len - 1) / 2;
    const double cutoff = 0.5 / double(std::max(up, down));  // cycles per upsampled sample
    std::vector<double> h(static_cast<std::size_t>(len));
    const double i0_beta = i0(kKaiserBeta);
    for (std::int64_t i = 0; i < len; ++i) {
        const double t = double(i - delay);
        const double w_arg = 2.0 * double(i) / double(len - 1) - 1.0;
        const double window = i0(kKaiserBeta * std::sqrt(std::max(0.0, 1.0 - w_arg * w_arg))) / i0_beta;
        h[std::size_t(i)] = 2.0 * cutoff * sinc(2.0 * cutoff * t) * window;
    }

    const auto& x = clip.samples;
    const std::int64_t n_in = std::int64_t(x.size());
    const auto n_out = std::int64_t(std::llround(double(n_in) * target_hz / clip.sample_rate));

    AudioClip out;
    out.sample_rate = target_hz;
    out.channels = 1;
    out.source_path = clip.source_path;
    out.samples.resize(std::size_t(n_out));
    for (std::int64_t j = 0; j < n_out; ++j) {
        const std::int64_t tau = j * down + delay;  // position on the upsampled grid
        std::int64_t n_lo = (tau - (len - 1) + up - 1) / up;
        std::int64_t n_hi = tau / up;
        n_lo = std::max<std::int64_t>(n_lo, 0);
        n_hi = std::min(n_hi, n_in - 1);
        double acc = 0.0;
        for (std::int64_t ni = n_lo; ni <= n_hi; ++ni) acc += x[std::size_t(ni)] * h[std::size_t(tau - ni * up)];
        out.samples[std::size_t(j)] = acc * double(up);
    }
    return out;
}

std::vector<double> pre_emphasize(const std::vector<double>& x, double alpha) {
    if (alpha < 0.0 || alpha >= 1.0) throw UsageError("pre_emphasize: alpha must be in [0, 1)");
    std::vector<double> y(x.size());
    if (x.empty()) return y;
    y[0] = x[0];
    for (std::size_t i = 1; i < x.size(); ++i) y[i] = x[i] - alpha * x[i - 1];
    return y;
}

AudioClip canonicalize(const AudioClip& clip) {
    return resample(to_mono(clip), kCanonicalRate);
}

}  // namespace dysflow::audio
