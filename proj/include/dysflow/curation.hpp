#pragma once

#include <map>
#include <string>
#include <vector>

#include "dysflow/audio.hpp"

namespace dysflow::curation {

enum class DisfluencyType {
    FilledPause,
    Prolongation,
    PartWordRepetition,
    PhraseRepetition,
    WordRepetition,
    NoDisfluency,
};

constexpr int kDisfluencyTypeCount = 6;

const char* disfluency_name(DisfluencyType t);
// Case-insensitive; throws DataError on unknown labels.
DisfluencyType disfluency_from_name(const std::string& name);

enum class CorpusTag { Tisa, Ied, IedE };

const char* corpus_name(CorpusTag c);
CorpusTag corpus_from_name(const std::string& name);

enum class Fluency { Typical, Atypical };

// Atypical speech comes from the stammer corpus only.
inline Fluency fluency_for(CorpusTag c) {
    return c == CorpusTag::Tisa ? Fluency::Atypical : Fluency::Typical;
}

struct LabelEvent {
    double start_s = 0.0;
    double end_s = 0.0;
    DisfluencyType dtype = DisfluencyType::NoDisfluency;
};

struct ClipRecord {
    std::string clip_path;
    std::string speaker_id;
    CorpusTag corpus = CorpusTag::Ied;
    DisfluencyType dtype = DisfluencyType::NoDisfluency;
    Fluency fluency = Fluency::Typical;
    double duration_s = 0.0;
};

struct VadParams {
    double frame_ms = 30.0;
    double hop_ms = 10.0;
    double threshold_db = 35.0;  // below the peak frame log-energy
    int hangover_frames = 5;     // gaps shorter than this are bridged
};

struct SpeechRegion {
    double start_s = 0.0;
    double end_s = 0.0;
};

// Audacity label files: "start<TAB>end<TAB>label" per line. Events come back
// sorted by start time; malformed lines raise DataError with line numbers.
std::vector<LabelEvent> parse_label_file(const std::string& text);

// Energy VAD: a frame is speech iff its log-energy is within threshold_db of
// the loudest frame. Returns disjoint sorted regions; silence yields none.
std::vector<SpeechRegion> detect_voice_activity(const audio::AudioClip& clip,
                                                const VadParams& params = {});

constexpr double kClipSeconds = 3.0;

struct StandardizedClip {
    audio::AudioClip clip;
    double event_start_in_clip_s = 0.0;  // where the event landed in the output
    bool event_truncated = false;        // event did not fit in the 3 s window
};

// Cut a 3 s clip around the event. Cut points snap to VAD silence boundaries
// within +-250 ms when that keeps the event inside; short material is zero
// padded evenly; every material edge gets a 5 ms raised-cosine fade.
StandardizedClip standardize_clip(const audio::AudioClip& source, const LabelEvent& event,
                                  const VadParams& vad = {});

struct ManifestResult {
    std::vector<ClipRecord> records;  // sorted by path
    std::map<DisfluencyType, std::size_t> counts;
    std::vector<std::pair<std::string, std::string>> rejected;  // path, reason
};

// Scan a directory of standardized clips named <speaker>_<dtype>_<index>.wav.
ManifestResult build_manifest(const std::string& clip_dir, CorpusTag corpus);

// JSON Lines manifest, one ClipRecord per line.
void write_manifest(const std::string& path, const std::vector<ClipRecord>& records);
std::vector<ClipRecord> read_manifest(const std::string& path);

}  // namespace dysflow::curation
