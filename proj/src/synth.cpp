#include "dysflow/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>

#include "dysflow/error.hpp"

namespace dysflow::synth {

namespace fs = std::filesystem;
using audio::AudioClip;
using curation::LabelEvent;
using curation::SpeechRegion;

namespace {

constexpr int kRate = audio::kCanonicalRate;
constexpr double kTau = 2.0 * std::numbers::pi;

// Two-pole resonator, applied in place.
void resonate(std::vector<double>& x, double center_hz, double r) {
    const double theta = kTau * center_hz / kRate;
    const double a1 = 2.0 * r * std::cos(theta);
    const double a2 = -r * r;
    // Unity gain at the resonance keeps levels comparable across speakers.
    const double norm = (1.0 - r) * std::sqrt(1.0 + r * r - 2.0 * r * std::cos(2.0 * theta));
    double y1 = 0.0, y2 = 0.0;
    for (auto& v : x) {
        const double y = norm * v + a1 * y1 + a2 * y2;
        y2 = y1;
        y1 = y;
        v = y;
    }
}

// First-difference emphasis; beta > 0 brightens.
void tilt_inplace(std::vector<double>& x, double beta) {
    double prev = 0.0;
    for (auto& v : x) {
        const double cur = v;
        v = cur - beta * prev;
        prev = cur;
    }
}

void raised_cosine_edges(std::vector<double>& x, std::size_t begin, std::size_t end,
                         std::size_t fade) {
    fade = std::min(fade, (end - begin) / 2);
    for (std::size_t i = 0; i < fade; ++i) {
        const double g = 0.5 - 0.5 * std::cos(kTau / 2.0 * double(i + 1) / double(fade + 1));
        x[begin + i] *= g;
        x[end - 1 - i] *= g;
    }
}

void normalize_peak(std::vector<double>& x, double target) {
    double peak = 0.0;
    for (const double v : x) peak = std::max(peak, std::abs(v));
    if (peak <= 0.0) return;
    const double g = target / peak;
    for (auto& v : x) v *= g;
}

void add_noise_floor(std::vector<double>& x, Rng& rng, double sigma) {
    for (auto& v : x) v += sigma * rng.gaussian();
}

AudioClip clip_of(std::vector<double> samples) {
    AudioClip clip;
    clip.samples = std::move(samples);
    clip.sample_rate = kRate;
    clip.channels = 1;
    return clip;
}

// Harmonic tone with drifting pitch and slow amplitude modulation over
// [begin, end), accumulated into x. Phase continues across calls via phases.
void render_harmonics(std::vector<double>& x, std::size_t begin, std::size_t end,
                      const SpeakerVoice& voice, double drift_phase, double am_phase) {
    constexpr int kHarmonics = 20;
    std::vector<double> phase(kHarmonics, 0.0);
    for (std::size_t n = begin; n < end; ++n) {
        const double t = double(n - begin) / kRate;
        const double f0 = voice.f0_hz * (1.0 + 0.03 * std::sin(kTau * 0.5 * t + drift_phase));
        const double am = 1.0 + 0.25 * std::sin(kTau * 4.0 * t + am_phase);
        double v = 0.0;
        for (int k = 0; k < kHarmonics; ++k) {
            phase[std::size_t(k)] += kTau * f0 * (k + 1) / kRate;
            v += std::sin(phase[std::size_t(k)]) / double(k + 1);
        }
        x[n] += am * v;
    }
}

std::string format_seconds(double s) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", s);
    return buf;
}

}  // namespace

SpeakerVoice draw_voice(Rng& rng) {
    SpeakerVoice v;
    v.tilt = rng.uniform(0.3, 0.8);
    v.res1_hz = rng.uniform(450.0, 900.0);
    v.res1_r = rng.uniform(0.90, 0.96);
    v.res2_hz = rng.uniform(1100.0, 2200.0);
    v.res2_r = rng.uniform(0.88, 0.95);
    v.f0_hz = rng.uniform(100.0, 220.0);
    v.peak = rng.uniform(0.45, 0.55);
    return v;
}

AudioClip make_burst_train_clip(const SpeakerVoice& voice, Rng& rng) {
    const auto n = std::size_t(std::lround(curation::kClipSeconds * kRate));
    std::vector<double> x(n, 0.0);

    // Burst train: ~80 ms of bright noise, then a gap, with per-burst jitter
    // in onset, length, and level.
    std::size_t cursor = std::size_t(std::lround(rng.uniform(0.0, 0.06) * kRate));
    while (true) {
        cursor += std::size_t(std::lround(rng.uniform(-0.015, 0.015) * kRate + 0.015 * kRate));
        const auto burst_len = std::size_t(std::lround(rng.uniform(0.07, 0.09) * kRate));
        if (cursor + burst_len > n) break;
        const double level = std::pow(10.0, rng.uniform(-0.125, 0.125));  // +-2.5 dB
        std::vector<double> burst(burst_len);
        for (auto& v : burst) v = rng.gaussian();
        tilt_inplace(burst, 0.9);  // tense-voice brightness on top of the speaker tilt
        raised_cosine_edges(burst, 0, burst_len, std::size_t(kRate / 200));
        for (std::size_t i = 0; i < burst_len; ++i) x[cursor + i] = level * burst[i];
        cursor += burst_len + std::size_t(std::lround(rng.uniform(0.07, 0.15) * kRate));
    }

    resonate(x, voice.res1_hz, voice.res1_r);
    resonate(x, voice.res2_hz, voice.res2_r);
    tilt_inplace(x, voice.tilt);
    normalize_peak(x, voice.peak);
    add_noise_floor(x, rng, 5e-4);
    return clip_of(std::move(x));
}

AudioClip make_harmonic_clip(const SpeakerVoice& voice, Rng& rng) {
    const auto n = std::size_t(std::lround(curation::kClipSeconds * kRate));
    std::vector<double> x(n, 0.0);
    render_harmonics(x, 0, n, voice, rng.uniform(0.0, kTau), rng.uniform(0.0, kTau));

    // One hesitation: a silent gap with short fades at both edges.
    const auto gap_start = std::size_t(std::lround(rng.uniform(0.8, 1.8) * kRate));
    const auto gap_len = std::size_t(std::lround(rng.uniform(0.3, 0.6) * kRate));
    const auto fade = std::size_t(kRate / 50);  // 20 ms
    for (std::size_t i = 0; i < gap_len; ++i) x[gap_start + i] = 0.0;
    raised_cosine_edges(x, 0, gap_start, fade);
    raised_cosine_edges(x, gap_start + gap_len, n, fade);

    resonate(x, voice.res1_hz, voice.res1_r);
    resonate(x, voice.res2_hz, voice.res2_r);
    tilt_inplace(x, voice.tilt);
    normalize_peak(x, voice.peak);
    add_noise_floor(x, rng, 5e-4);
    return clip_of(std::move(x));
}

SeparableSet make_separable_set(std::size_t n, int frames, int width, std::uint64_t seed) {
    if (frames <= 0 || width <= 0) throw UsageError("make_separable_set: bad shape");
    Rng rng(seed);
    SeparableSet set;
    set.samples.reserve(n);
    set.labels.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int label = int(i % 2);
        const float offset = label ? 0.5f : -0.5f;
        Matrix<float> m(static_cast<std::size_t>(frames), static_cast<std::size_t>(width));
        for (std::size_t r = 0; r < m.rows; ++r)
            for (std::size_t c = 0; c < m.cols; ++c)
                m.at(r, c) = float(0.1 * rng.gaussian()) + (c == 0 ? offset : 0.0f);
        set.samples.push_back(std::move(m));
        set.labels.push_back(label);
    }
    return set;
}

std::vector<curation::ClipRecord> write_benchmark_corpus(const std::string& dir,
                                                         const BenchmarkSpec& spec) {
    if (spec.speakers_per_class <= 0 || spec.clips_per_speaker <= 0)
        throw UsageError("benchmark corpus: counts must be positive");
    fs::create_directories(dir);
    const char* dtype_name = curation::disfluency_name(spec.dtype);

    std::vector<curation::ClipRecord> records;
    for (int cls = 0; cls < 2; ++cls) {
        const bool atypical = cls == 0;
        for (int s = 0; s < spec.speakers_per_class; ++s) {
            char speaker[16];
            std::snprintf(speaker, sizeof speaker, "%c%02d", atypical ? 'a' : 't', s + 1);
            // One stream per speaker so adding speakers never reshuffles
            // the material of existing ones.
            Rng rng(spec.seed ^ fnv1a(speaker, std::strlen(speaker)));
            const SpeakerVoice voice = draw_voice(rng);
            for (int k = 0; k < spec.clips_per_speaker; ++k) {
                const AudioClip clip =
                    atypical ? make_burst_train_clip(voice, rng) : make_harmonic_clip(voice, rng);
                char name[64];
                std::snprintf(name, sizeof name, "%s_%s_%03d.wav", speaker, dtype_name, k + 1);
                const fs::path path = fs::path(dir) / name;
                audio::write_wav(path.string(), clip);

                curation::ClipRecord rec;
                rec.clip_path = path.string();
                rec.speaker_id = speaker;
                rec.corpus = atypical ? curation::CorpusTag::Tisa : curation::CorpusTag::Ied;
                rec.dtype = spec.dtype;
                rec.fluency = curation::fluency_for(rec.corpus);
                rec.duration_s = curation::kClipSeconds;
                records.push_back(std::move(rec));
            }
        }
    }
    curation::write_manifest((fs::path(dir) / "manifest.jsonl").string(), records);
    return records;
}

std::vector<MiniRecording> make_mini_corpus(const MiniCorpusSpec& spec) {
    if (spec.speakers <= 0 || spec.recordings_per_speaker <= 0)
        throw UsageError("mini corpus: counts must be positive");
    // Events cycle through every disfluency type so manifest counts are
    // predictable.
    constexpr curation::DisfluencyType kCycle[] = {
        curation::DisfluencyType::WordRepetition,   curation::DisfluencyType::FilledPause,
        curation::DisfluencyType::Prolongation,     curation::DisfluencyType::PartWordRepetition,
        curation::DisfluencyType::PhraseRepetition, curation::DisfluencyType::NoDisfluency,
    };
    std::size_t cycle_pos = 0;

    std::vector<MiniRecording> out;
    for (int s = 0; s < spec.speakers; ++s) {
        char speaker[16];
        std::snprintf(speaker, sizeof speaker, "s%02d", s + 1);
        Rng rng(spec.seed ^ fnv1a(speaker, std::strlen(speaker)));
        const SpeakerVoice voice = draw_voice(rng);
        for (int r = 0; r < spec.recordings_per_speaker; ++r) {
            MiniRecording rec;
            rec.stem = std::string(speaker) + "_r" + std::to_string(r + 1);

            // Speech segments between silences, all boundaries on 10 ms
            // frame-hop multiples so the VAD comparison is clean.
            const auto on_hop = [&rng](double lo, double hi) {
                return 0.01 * std::floor(rng.uniform(lo, hi) * 100.0);
            };
            std::vector<double> x;
            double t = on_hop(0.4, 0.8);
            x.resize(std::size_t(std::lround(t * kRate)), 0.0);
            const int segments = 2 + int(rng.below(2));  // 2 or 3
            for (int seg = 0; seg < segments; ++seg) {
                const double seg_len = on_hop(1.2, 2.2);
                const std::size_t begin = x.size();
                x.resize(begin + std::size_t(std::lround(seg_len * kRate)), 0.0);
                render_harmonics(x, begin, x.size(), voice, rng.uniform(0.0, kTau),
                                 rng.uniform(0.0, kTau));
                raised_cosine_edges(x, begin, x.size(), std::size_t(kRate / 100));
                rec.true_speech.push_back({t, t + seg_len});

                // One labeled event inside the segment, clear of its edges.
                LabelEvent ev;
                ev.start_s = t + 0.2;
                ev.end_s = t + 0.2 + rng.uniform(0.4, std::min(0.8, seg_len - 0.4));
                ev.dtype = kCycle[cycle_pos++ % std::size(kCycle)];
                rec.events.push_back(ev);

                const double silence = on_hop(0.5, 0.9);
                t += seg_len + silence;
                x.resize(x.size() + std::size_t(std::lround(silence * kRate)), 0.0);
            }
            normalize_peak(x, voice.peak);
            add_noise_floor(x, rng, 1e-4);
            rec.clip = clip_of(std::move(x));
            out.push_back(std::move(rec));
        }
    }
    return out;
}

void write_mini_corpus(const std::string& audio_dir, const std::string& label_dir,
                       const std::vector<MiniRecording>& recordings) {
    fs::create_directories(audio_dir);
    fs::create_directories(label_dir);
    for (const auto& rec : recordings) {
        audio::write_wav((fs::path(audio_dir) / (rec.stem + ".wav")).string(), rec.clip);
        std::ofstream f(fs::path(label_dir) / (rec.stem + ".txt"));
        if (!f) throw DataError("cannot write label file for " + rec.stem);
        for (const auto& ev : rec.events)
            f << format_seconds(ev.start_s) << '\t' << format_seconds(ev.end_s) << '\t'
              << curation::disfluency_name(ev.dtype) << '\n';
    }
}

}  // namespace dysflow::synth
