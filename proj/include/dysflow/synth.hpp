#pragma once

// Synthetic material: a linearly separable feature set for training sanity
// checks, a two-class benchmark corpus whose classes differ in temporal
// structure, and small labeled recordings with known speech boundaries for
// exercising the curation pipeline end to end.

#include <cstdint>
#include <string>
#include <vector>

#include "dysflow/audio.hpp"
#include "dysflow/curation.hpp"
#include "dysflow/matrix.hpp"
#include "dysflow/rng.hpp"

namespace dysflow::synth {

// ---------------------------------------------------------------------------
// Separable feature set: class 1 sits at +offset on channel 0, class 0 at
// -offset, plus small noise. A threshold on one coefficient separates them.

struct SeparableSet {
    std::vector<Matrix<float>> samples;  // rows = frames, cols = width
    std::vector<int> labels;
};

SeparableSet make_separable_set(std::size_t n, int frames, int width, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Benchmark corpus. Each speaker gets a fixed coloration (spectral tilt and
// two resonances) shared by both classes, so the class signal is the
// temporal pattern: burst trains against sustained harmonics with one gap.

struct SpeakerVoice {
    double tilt = 0.5;          // first-difference emphasis coefficient
    double res1_hz = 600.0;     // resonance centers and radii
    double res1_r = 0.93;
    double res2_hz = 1500.0;
    double res2_r = 0.9;
    double f0_hz = 140.0;       // fundamental, used by the harmonic class
    double peak = 0.5;          // normalization target
};

SpeakerVoice draw_voice(Rng& rng);

// Repeated short noise bursts with bright (tense) tilt; onset time, length,
// and level jitter per burst. 3 s at 16 kHz.
audio::AudioClip make_burst_train_clip(const SpeakerVoice& voice, Rng& rng);

// Sustained vowel-like harmonic tone with slow pitch drift and amplitude
// modulation, interrupted by a single hesitation gap. 3 s at 16 kHz.
audio::AudioClip make_harmonic_clip(const SpeakerVoice& voice, Rng& rng);

struct BenchmarkSpec {
    int speakers_per_class = 20;
    int clips_per_speaker = 10;
    curation::DisfluencyType dtype = curation::DisfluencyType::WordRepetition;
    std::uint64_t seed = 20260101;
};

// Writes standardized clips named <speaker>_<dtype>_<index>.wav plus
// manifest.jsonl under dir. Burst-train speakers are tagged TISA (atypical),
// harmonic speakers IED (typical).
std::vector<curation::ClipRecord> write_benchmark_corpus(const std::string& dir,
                                                         const BenchmarkSpec& spec);

// ---------------------------------------------------------------------------
// Mini corpus of raw recordings for the curation pipeline: harmonic speech
// segments between silences, with segment boundaries on exact frame
// multiples and labeled disfluency events inside the segments.

struct MiniRecording {
    std::string stem;  // "<speaker>_<session>"
    audio::AudioClip clip;
    std::vector<curation::LabelEvent> events;
    std::vector<curation::SpeechRegion> true_speech;
};

struct MiniCorpusSpec {
    int speakers = 2;
    int recordings_per_speaker = 2;
    std::uint64_t seed = 20260102;
};

std::vector<MiniRecording> make_mini_corpus(const MiniCorpusSpec& spec = {});

// WAVs into audio_dir, tab-separated label files into label_dir.
void write_mini_corpus(const std::string& audio_dir, const std::string& label_dir,
                       const std::vector<MiniRecording>& recordings);

}  // namespace dysflow::synth
