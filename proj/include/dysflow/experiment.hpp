#pragma once

// Evaluation harness: binary typical-vs-atypical tasks over the curated
// manifest, speaker-disjoint splits, cached feature extraction, training,
// metrics, and the delta-configuration sweep.

#include <cstdint>
#include <mutex>
#include <string>
#include <vector>

#include "dysflow/baseline.hpp"
#include "dysflow/cepstra.hpp"
#include "dysflow/curation.hpp"
#include "dysflow/matrix.hpp"
#include "dysflow/sdc.hpp"
#include "dysflow/tdnn.hpp"
#include "dysflow/ztw.hpp"

namespace dysflow::experiment {

enum class Task { Repetition, FilledPause, Prolongation };

// Hyphenated lowercase, used for flags, report paths, and CSV cells.
const char* task_name(Task t);
Task task_from_name(const std::string& name);

// True when clips of this disfluency type belong to the task; Repetition
// pools the word, part-word, and phrase variants.
bool task_includes(Task t, curation::DisfluencyType d);

struct LabeledClip {
    curation::ClipRecord record;
    int label = 0;  // 1 = atypical
};

// Clips matching the task, labeled by fluency. Throws DataError when either
// class comes up empty.
std::vector<LabeledClip> select_task_clips(const std::vector<curation::ClipRecord>& manifest,
                                           Task task);

struct SplitSpec {
    double train_fraction = 0.8;
    double val_fraction = 0.1;  // carved from the non-test side
    std::uint64_t seed = 0;
    bool speaker_disjoint = true;

    void validate() const;
};

struct Split {
    std::vector<LabeledClip> train, val, test;
};

// Deterministic stratified split. Speaker-disjoint mode partitions speakers
// per class (each class needs at least three); otherwise clips are
// partitioned directly.
Split make_split(const std::vector<LabeledClip>& clips, const SplitSpec& spec);

struct Metrics {
    long tp = 0, fp = 0, fn = 0, tn = 0;
    double precision = 0.0, recall = 0.0, f1 = 0.0, accuracy = 0.0;

    bool operator==(const Metrics&) const = default;
};

Metrics compute_metrics(const std::vector<int>& predictions, const std::vector<int>& labels);

// ---------------------------------------------------------------------------

struct FeatureConfig {
    cepstra::FeatureKind kind = cepstra::FeatureKind::PeZtwcc;
    ztw::ZtwConfig ztw;                    // ZTW-family front end
    cepstra::PerceptualConfig perceptual;  // shared mel/cepstral settings
    baseline::FrameConfig frame;           // STFT front end for MFCC/PLP

    double frame_hop_s() const;
    // Canonical serialization of every field that affects the output,
    // folded into cache keys.
    std::string cache_token() const;
};

cepstra::CepstralMatrix extract_cepstra(const audio::AudioClip& clip, const FeatureConfig& fc);

// Content-addressed store of static cepstral matrices: FTR1 payload plus a
// hash sidecar. Keys cover the clip bytes and the extraction config, so a
// stale or corrupt entry can only be hit by hash collision.
class FeatureCache {
public:
    // Empty directory disables caching (everything recomputes).
    explicit FeatureCache(std::string dir);

    Matrix<float> get(const std::string& clip_path, const FeatureConfig& fc);

    static std::string key_for(const std::string& clip_path, const FeatureConfig& fc);

    struct Stats {
        std::size_t computed = 0;
        std::size_t hits = 0;
        std::size_t corrupted = 0;
    };
    Stats stats() const;

private:
    std::string dir_;
    mutable std::mutex mu_;
    Stats stats_;
};

// ---------------------------------------------------------------------------

struct RunConfig {
    Task task = Task::Repetition;
    FeatureConfig feature;
    sdc::SdcConfig sdc;  // blocks == 0 keeps static features only
    tdnn::TdnnConfig tdnn;
    tdnn::TrainConfig train;
    SplitSpec split;
    std::string cache_dir;  // empty disables the feature cache
    std::string out_dir;    // empty disables report/checkpoint artifacts
    int jobs = 1;

    // "13-2-3-6" or "static"; names report files and CSV rows.
    std::string config_label() const;
};

struct RunResult {
    Metrics test;
    tdnn::History history;
    tdnn::TdnnModel model;
    std::size_t train_clips = 0, val_clips = 0, test_clips = 0;
    std::string report_path;      // empty when artifacts are disabled
    std::string checkpoint_path;  // likewise
};

// Select -> split -> extract (cached) -> delta-stack -> train -> test.
// Writes results/<task>/<feature>/<label>.json and .tdn1 under out_dir.
RunResult run_task(const std::vector<curation::ClipRecord>& manifest, const RunConfig& rc);

// ---------------------------------------------------------------------------

struct SweepRow {
    sdc::SdcConfig config;
    std::uint64_t seed = 0;
    Metrics metrics;
    bool best = false;  // highest F1, earliest grid position on ties
};

// The delay/block grid with the static coefficient count and shift fixed.
std::vector<sdc::SdcConfig> default_grid();

// One run_task per grid entry; per-row seeds derive from the base training
// seed and the configuration label. Writes per-row reports plus
// results/summary.csv under out_dir.
std::vector<SweepRow> sweep_sdc(const std::vector<curation::ClipRecord>& manifest,
                                const RunConfig& base, const std::vector<sdc::SdcConfig>& grid);

std::string metrics_json(const RunConfig& rc, std::uint64_t seed, const Metrics& m,
                         const tdnn::History& history, std::size_t train_clips,
                         std::size_t val_clips, std::size_t test_clips);

}  // namespace dysflow::experiment
