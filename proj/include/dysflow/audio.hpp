#pragma once

#include <string>
#include <vector>

namespace dysflow::audio {

constexpr int kCanonicalRate = 16000;

// Floating-point audio, samples interleaved when channels > 1. The rest of
// the pipeline consumes the canonical form: 16 kHz, mono.
struct AudioClip {
    std::vector<double> samples;
    int sample_rate = 0;
    int channels = 1;
    std::string source_path;

    std::size_t frames() const { return channels > 0 ? samples.size() / channels : 0; }
    double duration_s() const { return sample_rate > 0 ? double(frames()) / sample_rate : 0.0; }
    bool canonical() const { return sample_rate == kCanonicalRate && channels == 1; }
};

enum class WavFormat { Pcm16, Float32 };

// RIFF WAV, PCM 16-bit LE or IEEE float-32 LE, 1-2 channels. Anything else
// is rejected. 16-bit samples are scaled by 1/32768.
AudioClip load_wav(const std::string& path);
void write_wav(const std::string& path, const AudioClip& clip, WavFormat format = WavFormat::Pcm16);

// Stereo is averaged per frame; mono passes through unchanged.
AudioClip to_mono(const AudioClip& clip);

// Polyphase windowed-sinc resampler (Kaiser beta=8, 32 taps per phase).
// Resampling at the source rate returns the input bit for bit.
AudioClip resample(const AudioClip& clip, int target_hz);

// y[0] = x[0]; y[n] = x[n] - alpha * x[n-1].
std::vector<double> pre_emphasize(const std::vector<double>& x, double alpha);

// to_mono + resample to 16 kHz.
AudioClip canonicalize(const AudioClip& clip);

}  // namespace dysflow::audio
