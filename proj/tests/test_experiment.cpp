#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "dysflow/audio.hpp"
#include "dysflow/config_file.hpp"
#include "dysflow/error.hpp"
#include "dysflow/experiment.hpp"
#include "dysflow/rng.hpp"
#include "dysflow/synth.hpp"

using namespace dysflow;
using namespace dysflow::experiment;
using curation::ClipRecord;
using curation::CorpusTag;
using curation::DisfluencyType;
using curation::Fluency;

namespace fs = std::filesystem;

namespace {

fs::path temp_root() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "dysflow_test_experiment";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

ClipRecord record(const std::string& speaker, DisfluencyType d, CorpusTag corpus) {
    ClipRecord r;
    r.clip_path = speaker + "_" + curation::disfluency_name(d) + ".wav";
    r.speaker_id = speaker;
    r.corpus = corpus;
    r.dtype = d;
    r.fluency = curation::fluency_for(corpus);
    r.duration_s = 3.0;
    return r;
}

// Shared on-disk corpus: 8 voices, 24 standardized clips, both classes.
const std::vector<ClipRecord>& benchmark_manifest() {
    static const std::vector<ClipRecord> manifest = [] {
        synth::BenchmarkSpec spec;
        spec.speakers_per_class = 4;
        spec.clips_per_speaker = 3;
        spec.seed = 424242;
        return synth::write_benchmark_corpus((temp_root() / "corpus").string(), spec);
    }();
    return manifest;
}

// Small network and short schedule: these tests exercise plumbing and
// determinism, not classification quality.
RunConfig smoke_config(const std::string& tag) {
    RunConfig rc;
    rc.task = Task::Repetition;
    rc.feature.kind = cepstra::FeatureKind::Mfcc;
    rc.sdc.blocks = 0;
    rc.tdnn.conv1 = {4, 3, 1};
    rc.tdnn.conv2 = {6, 3, 2};
    rc.tdnn.fc1_units = 8;
    rc.tdnn.fc2_units = 4;
    rc.train.batch_size = 8;
    rc.train.max_epochs = 3;
    rc.train.seed = 99;
    rc.split.seed = 7;
    rc.out_dir = (temp_root() / tag).string();
    return rc;
}

std::string slurp(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    std::ostringstream buf;
    buf << f.rdbuf();
    return buf.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// Task selection

TEST_CASE("task names round trip") {
    for (const Task t : {Task::Repetition, Task::FilledPause, Task::Prolongation})
        CHECK(task_from_name(task_name(t)) == t);
    CHECK(task_name(Task::FilledPause) == std::string("filled-pause"));
    CHECK(task_from_name("PROLONGATION") == Task::Prolongation);
    CHECK_THROWS_AS(task_from_name("blocks"), UsageError);
}

TEST_CASE("repetition pools the three repetition types") {
    CHECK(task_includes(Task::Repetition, DisfluencyType::WordRepetition));
    CHECK(task_includes(Task::Repetition, DisfluencyType::PartWordRepetition));
    CHECK(task_includes(Task::Repetition, DisfluencyType::PhraseRepetition));
    CHECK(!task_includes(Task::Repetition, DisfluencyType::FilledPause));
    CHECK(!task_includes(Task::Repetition, DisfluencyType::Prolongation));
    CHECK(task_includes(Task::FilledPause, DisfluencyType::FilledPause));
    CHECK(task_includes(Task::Prolongation, DisfluencyType::Prolongation));
    for (const Task t : {Task::Repetition, Task::FilledPause, Task::Prolongation})
        CHECK(!task_includes(t, DisfluencyType::NoDisfluency));
}

TEST_CASE("select_task_clips labels atypical as one") {
    std::vector<ClipRecord> manifest = {
        record("a", DisfluencyType::Prolongation, CorpusTag::Tisa),
        record("b", DisfluencyType::Prolongation, CorpusTag::Tisa),
        record("c", DisfluencyType::Prolongation, CorpusTag::Ied),
        record("d", DisfluencyType::Prolongation, CorpusTag::Ied),
        record("e", DisfluencyType::Prolongation, CorpusTag::IedE),
        record("f", DisfluencyType::FilledPause, CorpusTag::Tisa),   // wrong task
        record("g", DisfluencyType::NoDisfluency, CorpusTag::Tisa),  // never selected
    };
    const auto clips = select_task_clips(manifest, Task::Prolongation);
    REQUIRE(clips.size() == 5);
    std::vector<int> labels;
    for (const auto& c : clips) labels.push_back(c.label);
    CHECK(labels == std::vector<int>{1, 1, 0, 0, 0});
}

TEST_CASE("select_task_clips needs both classes") {
    std::vector<ClipRecord> only_atypical = {
        record("a", DisfluencyType::Prolongation, CorpusTag::Tisa),
        record("b", DisfluencyType::Prolongation, CorpusTag::Tisa),
    };
    CHECK_THROWS_AS(select_task_clips(only_atypical, Task::Prolongation), DataError);
    CHECK_THROWS_AS(select_task_clips(only_atypical, Task::FilledPause), DataError);
}

// ---------------------------------------------------------------------------
// Splitting

namespace {

std::vector<LabeledClip> single_clip_speakers(int per_class) {
    std::vector<LabeledClip> clips;
    for (int i = 0; i < per_class; ++i) {
        char name[16];
        std::snprintf(name, sizeof name, "at%03d", i);
        clips.push_back({record(name, DisfluencyType::Prolongation, CorpusTag::Tisa), 1});
        std::snprintf(name, sizeof name, "ty%03d", i);
        clips.push_back({record(name, DisfluencyType::Prolongation, CorpusTag::Ied), 0});
    }
    return clips;
}

}  // namespace

TEST_CASE("hundred single-clip speakers split 80/10/10") {
    const auto clips = single_clip_speakers(50);
    SplitSpec spec;
    spec.seed = 5;
    const Split split = make_split(clips, spec);
    CHECK(split.train.size() == 80);
    CHECK(split.val.size() == 10);
    CHECK(split.test.size() == 10);

    // Stratified: each partition keeps the 50/50 class ratio.
    const auto count_pos = [](const std::vector<LabeledClip>& part) {
        std::size_t n = 0;
        for (const auto& c : part) n += std::size_t(c.label);
        return n;
    };
    CHECK(count_pos(split.train) == 40);
    CHECK(count_pos(split.val) == 5);
    CHECK(count_pos(split.test) == 5);
}

TEST_CASE("same seed gives the same partition, different seed a different one") {
    const auto clips = single_clip_speakers(20);
    SplitSpec spec;
    spec.seed = 17;
    const Split a = make_split(clips, spec);
    const Split b = make_split(clips, spec);
    const auto paths = [](const std::vector<LabeledClip>& part) {
        std::vector<std::string> p;
        for (const auto& c : part) p.push_back(c.record.clip_path);
        return p;
    };
    CHECK(paths(a.train) == paths(b.train));
    CHECK(paths(a.val) == paths(b.val));
    CHECK(paths(a.test) == paths(b.test));

    spec.seed = 18;
    const Split c = make_split(clips, spec);
    CHECK(paths(a.train) != paths(c.train));
}

TEST_CASE("speakers land whole in exactly one partition") {
    std::vector<LabeledClip> clips;
    for (int s = 0; s < 6; ++s) {
        for (int k = 0; k < 4; ++k) {
            const std::string name = (s < 3 ? "at" : "ty") + std::to_string(s);
            ClipRecord r = record(name, DisfluencyType::Prolongation,
                                  s < 3 ? CorpusTag::Tisa : CorpusTag::Ied);
            r.clip_path = name + "_" + std::to_string(k) + ".wav";
            clips.push_back({r, s < 3 ? 1 : 0});
        }
    }
    SplitSpec spec;
    spec.seed = 2;
    const Split split = make_split(clips, spec);

    std::set<std::string> train_sp, val_sp, test_sp;
    for (const auto& c : split.train) train_sp.insert(c.record.speaker_id);
    for (const auto& c : split.val) val_sp.insert(c.record.speaker_id);
    for (const auto& c : split.test) test_sp.insert(c.record.speaker_id);
    for (const auto& s : train_sp) {
        CHECK(!val_sp.count(s));
        CHECK(!test_sp.count(s));
    }
    for (const auto& s : val_sp) CHECK(!test_sp.count(s));
    CHECK(split.train.size() + split.val.size() + split.test.size() == clips.size());

    // Every speaker's four clips travel together.
    for (const auto* part : {&split.train, &split.val, &split.test}) {
        std::map<std::string, int> per_speaker;
        for (const auto& c : *part) ++per_speaker[c.record.speaker_id];
        for (const auto& [sp, n] : per_speaker) CHECK(n == 4);
    }
}

TEST_CASE("split rejects undersized classes and inconsistent speakers") {
    SplitSpec spec;
    // Two atypical speakers only.
    std::vector<LabeledClip> thin;
    for (int i = 0; i < 2; ++i)
        thin.push_back({record("at" + std::to_string(i), DisfluencyType::Prolongation,
                               CorpusTag::Tisa),
                        1});
    for (int i = 0; i < 5; ++i)
        thin.push_back({record("ty" + std::to_string(i), DisfluencyType::Prolongation,
                               CorpusTag::Ied),
                        0});
    CHECK_THROWS_AS(make_split(thin, spec), DataError);

    // One speaker with both labels cannot be stratified.
    auto clips = single_clip_speakers(5);
    clips[0].record.speaker_id = clips[1].record.speaker_id;
    CHECK_THROWS_AS(make_split(clips, spec), DataError);
}

TEST_CASE("split spec validation") {
    const auto clips = single_clip_speakers(5);
    SplitSpec spec;
    spec.train_fraction = 0.0;
    CHECK_THROWS_AS(make_split(clips, spec), UsageError);
    spec = SplitSpec{};
    spec.val_fraction = 1.0;
    CHECK_THROWS_AS(make_split(clips, spec), UsageError);
    spec = SplitSpec{};
    spec.train_fraction = 0.95;
    spec.val_fraction = 0.05;
    CHECK_THROWS_AS(make_split(clips, spec), UsageError);
}

TEST_CASE("clip-level split works with a single stubborn speaker per class") {
    std::vector<LabeledClip> clips;
    for (int k = 0; k < 10; ++k) {
        ClipRecord a = record("solo_at", DisfluencyType::Prolongation, CorpusTag::Tisa);
        a.clip_path = "a" + std::to_string(k) + ".wav";
        clips.push_back({a, 1});
        ClipRecord t = record("solo_ty", DisfluencyType::Prolongation, CorpusTag::Ied);
        t.clip_path = "t" + std::to_string(k) + ".wav";
        clips.push_back({t, 0});
    }
    SplitSpec spec;
    spec.speaker_disjoint = false;
    spec.seed = 9;
    const Split split = make_split(clips, spec);
    CHECK(split.train.size() == 16);
    CHECK(split.val.size() == 2);
    CHECK(split.test.size() == 2);

    // Speaker-disjoint mode must refuse: one speaker per class.
    spec.speaker_disjoint = true;
    CHECK_THROWS_AS(make_split(clips, spec), DataError);
}

// ---------------------------------------------------------------------------
// Metrics

TEST_CASE("metrics worked examples") {
    const Metrics perfect = compute_metrics({1, 0, 1, 0}, {1, 0, 1, 0});
    CHECK(perfect.f1 == 1.0);
    CHECK(perfect.accuracy == 1.0);
    CHECK(perfect.precision == 1.0);
    CHECK(perfect.recall == 1.0);

    // tp=1 fp=1 fn=0 tn=0: precision 1/2, recall 1, harmonic mean 2/3.
    const Metrics m = compute_metrics({1, 1}, {1, 0});
    CHECK(m.tp == 1);
    CHECK(m.fp == 1);
    CHECK(m.fn == 0);
    CHECK(m.tn == 0);
    CHECK(m.precision == doctest::Approx(0.5));
    CHECK(m.recall == doctest::Approx(1.0));
    CHECK(m.f1 == doctest::Approx(2.0 / 3.0));
    CHECK(m.accuracy == doctest::Approx(0.5));

    const Metrics wrong = compute_metrics({1, 0}, {0, 1});
    CHECK(wrong.f1 == 0.0);
    CHECK(wrong.accuracy == 0.0);

    // All-negative predictions against all-negative labels: every ratio with
    // a zero denominator comes out zero, accuracy is one.
    const Metrics neg = compute_metrics({0, 0}, {0, 0});
    CHECK(neg.precision == 0.0);
    CHECK(neg.recall == 0.0);
    CHECK(neg.f1 == 0.0);
    CHECK(neg.accuracy == 1.0);

    CHECK_THROWS_AS(compute_metrics({}, {}), UsageError);
    CHECK_THROWS_AS(compute_metrics({1}, {1, 0}), UsageError);
    CHECK_THROWS_AS(compute_metrics({2}, {1}), UsageError);
}

TEST_CASE("f1 equals the count form identically") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<int> pred(20), label(20);
        for (int i = 0; i < 20; ++i) {
            pred[std::size_t(i)] = rng.uniform() < 0.5 ? 0 : 1;
            label[std::size_t(i)] = rng.uniform() < 0.5 ? 0 : 1;
        }
        const Metrics m = compute_metrics(pred, label);
        const double denom = double(2 * m.tp + m.fp + m.fn);
        const double count_form = denom > 0.0 ? 2.0 * double(m.tp) / denom : 0.0;
        CHECK(m.f1 == doctest::Approx(count_form).epsilon(1e-12));
    }
}

// ---------------------------------------------------------------------------
// Feature extraction and the cache

TEST_CASE("cache token tracks every field that matters") {
    FeatureConfig a;
    FeatureConfig b;
    CHECK(a.cache_token() == b.cache_token());
    b.kind = cepstra::FeatureKind::Ztwcc;
    CHECK(a.cache_token() != b.cache_token());
    b = a;
    b.perceptual.n_ceps = 14;
    CHECK(a.cache_token() != b.cache_token());
    b = a;
    b.ztw.hop_ms = 12.0;
    CHECK(a.cache_token() != b.cache_token());

    FeatureConfig m;
    m.kind = cepstra::FeatureKind::Mfcc;
    FeatureConfig m2 = m;
    m2.frame.window_ms = 30.0;
    CHECK(m.cache_token() != m2.cache_token());
    // The STFT frame settings do not affect the ZTW family.
    FeatureConfig z2 = a;
    z2.frame.window_ms = 30.0;
    CHECK(a.cache_token() == z2.cache_token());
}

TEST_CASE("frame hop follows the front end") {
    FeatureConfig z;
    CHECK(z.frame_hop_s() == doctest::Approx(0.010));
    FeatureConfig m;
    m.kind = cepstra::FeatureKind::Plp;
    m.frame.hop_ms = 12.5;
    CHECK(m.frame_hop_s() == doctest::Approx(0.0125));
}

TEST_CASE("extract_cepstra dispatches on kind") {
    synth::SpeakerVoice voice;
    Rng rng(12);
    const audio::AudioClip clip = synth::make_harmonic_clip(voice, rng);

    FeatureConfig pe;
    pe.kind = cepstra::FeatureKind::PeZtwcc;
    const auto pe_out = extract_cepstra(clip, pe);
    CHECK(pe_out.values.rows == 300);
    CHECK(pe_out.values.cols == 13);
    CHECK(pe_out.kind == cepstra::FeatureKind::PeZtwcc);

    FeatureConfig mf;
    mf.kind = cepstra::FeatureKind::Mfcc;
    const auto mf_out = extract_cepstra(clip, mf);
    CHECK(mf_out.values.rows == 298);
    CHECK(mf_out.values.cols == 13);
}

namespace {

fs::path write_probe_clip() {
    static const fs::path path = [] {
        audio::AudioClip clip;
        clip.sample_rate = 16000;
        clip.samples.resize(8000);
        for (std::size_t n = 0; n < clip.samples.size(); ++n)
            clip.samples[n] = 0.4 * std::sin(2.0 * M_PI * 440.0 * double(n) / 16000.0);
        const fs::path p = temp_root() / "probe.wav";
        audio::write_wav(p.string(), clip, audio::WavFormat::Pcm16);
        return p;
    }();
    return path;
}

}  // namespace

TEST_CASE("feature cache computes once and then hits") {
    const fs::path dir = temp_root() / "cache_hit";
    FeatureCache cache(dir.string());
    FeatureConfig fc;
    fc.kind = cepstra::FeatureKind::Mfcc;

    const Matrix<float> first = cache.get(write_probe_clip().string(), fc);
    CHECK(cache.stats().computed == 1);
    CHECK(cache.stats().hits == 0);

    const Matrix<float> second = cache.get(write_probe_clip().string(), fc);
    CHECK(cache.stats().computed == 1);
    CHECK(cache.stats().hits == 1);
    CHECK(first.data == second.data);  // cached bytes decode bitwise equal

    const std::string key = FeatureCache::key_for(write_probe_clip().string(), fc);
    CHECK(fs::exists(dir / (key + ".ftr")));
    CHECK(fs::exists(dir / (key + ".ftr.crc")));
}

TEST_CASE("corrupt cache entries are recomputed and healed") {
    const fs::path dir = temp_root() / "cache_corrupt";
    FeatureCache cache(dir.string());
    FeatureConfig fc;
    fc.kind = cepstra::FeatureKind::Mfcc;
    const std::string clip = write_probe_clip().string();

    const Matrix<float> clean = cache.get(clip, fc);
    const std::string key = FeatureCache::key_for(clip, fc);
    const fs::path ftr = dir / (key + ".ftr");

    // Flip one payload byte; the checksum sidecar now disagrees.
    {
        std::fstream f(ftr, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(20);
        char b = 0;
        f.seekg(20);
        f.read(&b, 1);
        b = char(b ^ 0x40);
        f.seekp(20);
        f.write(&b, 1);
    }
    const Matrix<float> recovered = cache.get(clip, fc);
    CHECK(cache.stats().corrupted == 1);
    CHECK(cache.stats().computed == 2);
    CHECK(recovered.data == clean.data);

    // The rewrite healed the entry.
    const Matrix<float> again = cache.get(clip, fc);
    CHECK(cache.stats().hits == 1);
    CHECK(again.data == clean.data);
}

TEST_CASE("empty cache directory disables persistence") {
    FeatureCache cache("");
    FeatureConfig fc;
    fc.kind = cepstra::FeatureKind::Mfcc;
    const std::string clip = write_probe_clip().string();
    const Matrix<float> a = cache.get(clip, fc);
    const Matrix<float> b = cache.get(clip, fc);
    CHECK(cache.stats().computed == 2);
    CHECK(cache.stats().hits == 0);
    CHECK(a.data == b.data);
}

TEST_CASE("cache keys depend on content and config") {
    FeatureConfig fc;
    fc.kind = cepstra::FeatureKind::Mfcc;
    const std::string clip = write_probe_clip().string();
    const std::string base = FeatureCache::key_for(clip, fc);
    CHECK(base.size() == 16);  // hex64

    FeatureConfig other = fc;
    other.perceptual.n_ceps = 14;
    CHECK(FeatureCache::key_for(clip, other) != base);

    // Rewrite the clip with one sample changed: new key.
    audio::AudioClip probe = audio::load_wav(clip);
    probe.samples[100] += 0.01;
    const fs::path moved = temp_root() / "probe2.wav";
    audio::write_wav(moved.string(), probe, audio::WavFormat::Pcm16);
    CHECK(FeatureCache::key_for(moved.string(), fc) != base);

    CHECK_THROWS_AS(FeatureCache::key_for((temp_root() / "nope.wav").string(), fc), DataError);
}

// ---------------------------------------------------------------------------
// run_task

TEST_CASE("run_task is deterministic and writes its artifacts") {
    const auto& manifest = benchmark_manifest();
    RunConfig rc = smoke_config("run_det");

    const RunResult first = run_task(manifest, rc);
    CHECK(first.train_clips + first.val_clips + first.test_clips == 24);
    CHECK(first.test_clips >= 2);

    const RunResult second = run_task(manifest, rc);
    CHECK(first.test == second.test);
    REQUIRE(first.history.epochs.size() == second.history.epochs.size());
    CHECK(first.history.epochs.back().train_loss ==
          second.history.epochs.back().train_loss);

    // Artifact layout: results/<task>/<feature>/<label>.{json,tdn1}.
    const fs::path report = fs::path(rc.out_dir) / "results" / "repetition" / "mfcc" /
                            "static.json";
    const fs::path ckpt = fs::path(rc.out_dir) / "results" / "repetition" / "mfcc" /
                          "static.tdn1";
    CHECK(first.report_path == report.string());
    CHECK(first.checkpoint_path == ckpt.string());
    REQUIRE(fs::exists(report));
    REQUIRE(fs::exists(ckpt));

    // The checkpoint reloads and reproduces the reported test metrics.
    const tdnn::TdnnModel model = tdnn::load_checkpoint(ckpt);
    CHECK(model.config.input_frames == 298);
    CHECK(model.config.input_width == 13);

    const auto j = nlohmann::json::parse(slurp(report));
    CHECK(j["task"] == "repetition");
    CHECK(j["feature"] == "mfcc");
    CHECK(j["n_d_p_k"] == "static");
    CHECK(j["seed"] == 99);
    CHECK(j["f1"] == doctest::Approx(first.test.f1));
    CHECK(j["counts"]["tp"] == first.test.tp);
    CHECK(j["partition"]["test_clips"] == first.test_clips);

    // Reports carry no filesystem paths, so they diff cleanly across hosts.
    const std::string text = slurp(report);
    CHECK(text.find(rc.out_dir) == std::string::npos);
    CHECK(text.find(temp_root().string()) == std::string::npos);
}

TEST_CASE("run_task results do not depend on the job count") {
    const auto& manifest = benchmark_manifest();
    RunConfig one = smoke_config("jobs1");
    one.jobs = 1;
    RunConfig four = smoke_config("jobs4");
    four.jobs = 4;
    const RunResult r1 = run_task(manifest, one);
    const RunResult r4 = run_task(manifest, four);
    CHECK(r1.test == r4.test);
}

TEST_CASE("run_task reuses the feature cache across configurations") {
    const auto& manifest = benchmark_manifest();
    RunConfig rc = smoke_config("run_cached");
    rc.cache_dir = (temp_root() / "run_cache").string();

    run_task(manifest, rc);
    // Same static features, different delta stacking: every read is a hit.
    RunConfig delta = rc;
    delta.sdc = sdc::SdcConfig{13, 1, 3, 2};
    run_task(manifest, delta);

    FeatureCache probe(rc.cache_dir);
    const Matrix<float> cached = probe.get(manifest.front().clip_path, rc.feature);
    CHECK(probe.stats().hits == 1);
    CHECK(cached.rows == 298);
}

TEST_CASE("sdc stacking changes the trained input width") {
    const auto& manifest = benchmark_manifest();
    RunConfig rc = smoke_config("run_sdc");
    rc.sdc = sdc::SdcConfig{13, 1, 3, 2};
    rc.train.max_epochs = 1;
    const RunResult r = run_task(manifest, rc);
    CHECK(r.model.config.input_width == 13 + 2 * 13);
    CHECK(r.model.config.input_frames == 298);

    const fs::path report = fs::path(rc.out_dir) / "results" / "repetition" / "mfcc" /
                            "13-1-3-2.json";
    CHECK(fs::exists(report));
}

// ---------------------------------------------------------------------------
// Sweep

TEST_CASE("default grid covers three delays by three block counts") {
    const auto grid = default_grid();
    REQUIRE(grid.size() == 9);
    CHECK(grid.front().to_string() == "13-1-3-5");
    CHECK(grid.back().to_string() == "13-3-3-7");
    for (const auto& g : grid) {
        CHECK(g.n_static == 13);
        CHECK(g.shift == 3);
    }
}

TEST_CASE("sweep writes one row per configuration and flags the best") {
    const auto& manifest = benchmark_manifest();
    RunConfig base = smoke_config("sweep");
    base.cache_dir = (temp_root() / "sweep_cache").string();
    base.train.max_epochs = 2;
    const std::vector<sdc::SdcConfig> grid = {{13, 1, 3, 2}, {13, 2, 3, 2}};

    const auto rows = sweep_sdc(manifest, base, grid);
    REQUIRE(rows.size() == 2);
    CHECK((rows[0].best ? 1 : 0) + (rows[1].best ? 1 : 0) == 1);

    // Per-row seeds derive from the base seed and the configuration label.
    for (const auto& row : rows) {
        const std::string label = row.config.to_string();
        const std::uint64_t expect =
            fnv1a(label.data(), label.size(), base.train.seed ^ 0x9e3779b97f4a7c15ull);
        CHECK(row.seed == expect);
    }
    CHECK(rows[0].seed != rows[1].seed);

    const fs::path csv_path = fs::path(base.out_dir) / "results" / "summary.csv";
    REQUIRE(fs::exists(csv_path));
    const std::string csv = slurp(csv_path);
    CHECK(csv.rfind("task,feature,n_d_p_k,precision,recall,f1,accuracy,seed\n", 0) == 0);
    CHECK(csv.find("repetition,mfcc,13-1-3-2,") != std::string::npos);
    CHECK(csv.find("repetition,mfcc,13-2-3-2,") != std::string::npos);
    REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 3);

    // Rerunning the sweep reproduces the file byte for byte.
    const auto rows2 = sweep_sdc(manifest, base, grid);
    CHECK(slurp(csv_path) == csv);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].metrics == rows2[i].metrics);
        CHECK(rows[i].seed == rows2[i].seed);
    }

    CHECK_THROWS_AS(sweep_sdc(manifest, base, {}), UsageError);
}

TEST_CASE("metrics_json is self-contained") {
    RunConfig rc = smoke_config("json_probe");
    rc.sdc = sdc::SdcConfig{13, 2, 3, 6};
    Metrics m;
    m.tp = 8;
    m.fp = 2;
    m.fn = 1;
    m.tn = 9;
    m.precision = 0.8;
    m.recall = 8.0 / 9.0;
    m.f1 = 2.0 * 0.8 * (8.0 / 9.0) / (0.8 + 8.0 / 9.0);
    m.accuracy = 17.0 / 20.0;
    tdnn::History h;
    h.best_epoch = 2;
    h.epochs.resize(3);

    const std::string text = metrics_json(rc, 1234, m, h, 70, 10, 20);
    const auto j = nlohmann::json::parse(text);
    CHECK(j["n_d_p_k"] == "13-2-3-6");
    CHECK(j["seed"] == 1234);
    CHECK(j["train"]["best_epoch"] == 2);
    CHECK(j["train"]["epochs"] == 3);
    CHECK(j["partition"]["train_clips"] == 70);
    CHECK(text.find(rc.out_dir) == std::string::npos);
    CHECK(text.find('/') == std::string::npos);  // no paths of any kind
}

// ---------------------------------------------------------------------------
// Config files

TEST_CASE("config parsing overrides defaults per section") {
    const std::string text =
        "# pipeline overrides\n"
        "[ztw]\n"
        "segment_ms = 4.0\n"
        "dft_size = 1024\n"
        "\n"
        "[perceptual]\n"
        "n_ceps = 14  ; inline comment\n"
        "[sdc]\n"
        "n_static = 13\n"
        "delay = 2\n"
        "shift = 3\n"
        "blocks = 6\n"
        "[train]\n"
        "seed = 77\n"
        "learning_rate = 0.01\n"
        "class_weighting = off\n"
        "[split]\n"
        "speaker_disjoint = true\n"
        "val_fraction = 0.15\n";
    const auto cfg = configfile::parse_config(text);
    CHECK(cfg.ztw.segment_ms == 4.0);
    CHECK(cfg.ztw.dft_size == 1024);
    CHECK(cfg.ztw.hop_ms == 10.0);  // untouched default
    CHECK(cfg.perceptual.n_ceps == 14);
    CHECK(cfg.sdc.to_string() == "13-2-3-6");
    CHECK(cfg.train.seed == 77);
    CHECK(cfg.train.learning_rate == 0.01);
    CHECK(cfg.train.class_weighting == false);
    CHECK(cfg.split.val_fraction == 0.15);
    CHECK(cfg.tdnn.conv1.filters == 64);  // untouched section
}

TEST_CASE("empty config text keeps every default") {
    const auto cfg = configfile::parse_config("");
    CHECK(cfg.ztw.dft_size == 2048);
    CHECK(cfg.perceptual.n_mel_bands == 40);
    CHECK(cfg.frame.window_ms == 25.0);
    CHECK(cfg.tdnn.conv2.filters == 128);
    CHECK(cfg.train.batch_size == 32);
    CHECK(cfg.split.train_fraction == 0.8);
}

TEST_CASE("config errors carry line numbers") {
    const auto message_of = [](const std::string& text) {
        try {
            configfile::parse_config(text);
        } catch (const UsageError& e) {
            return std::string(e.what());
        }
        return std::string();
    };

    CHECK(message_of("[nope]\n").find("line 1") != std::string::npos);
    CHECK(message_of("[ztw]\nwat = 3\n").find("line 2") != std::string::npos);
    CHECK(message_of("[ztw]\nwat = 3\n").find("unknown key") != std::string::npos);
    CHECK(message_of("[ztw]\nsegment_ms = abc\n").find("expected a number") !=
          std::string::npos);
    CHECK(message_of("\n\nsegment_ms = 5\n").find("outside any [section]") !=
          std::string::npos);
    CHECK(message_of("[ztw\n").find("unterminated") != std::string::npos);
    CHECK(message_of("[train]\nclass_weighting = maybe\n").find("expected a boolean") !=
          std::string::npos);
    CHECK(message_of("[train]\nseed = -4\n").find("non-negative") != std::string::npos);
    CHECK(message_of("[ztw]\nsegment_ms\n").find("expected key = value") != std::string::npos);
}

TEST_CASE("load_config reads files and rejects missing paths") {
    const fs::path path = temp_root() / "pipeline.ini";
    std::ofstream(path) << "[train]\nmax_epochs = 9\n";
    const auto cfg = configfile::load_config(path.string());
    CHECK(cfg.train.max_epochs == 9);
    CHECK_THROWS_AS(configfile::load_config((temp_root() / "missing.ini").string()),
                    UsageError);
}
