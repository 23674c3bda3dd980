#include "dysflow/experiment.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "dysflow/error.hpp"
#include "dysflow/rng.hpp"

namespace dysflow::experiment {

namespace fs = std::filesystem;
using curation::ClipRecord;
using curation::DisfluencyType;

namespace {

std::string lower(std::string s) {
    for (auto& c : s) c = char(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::vector<char> read_file_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot read " + path);
    std::vector<char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return bytes;
}

// Striped worker fan-out; with jobs <= 1 everything runs inline. Outputs go
// to disjoint slots, so the result is independent of the job count.
void parallel_over(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
    if (jobs <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const auto workers = std::size_t(std::min<long>(jobs, long(n)));
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += workers) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace

const char* task_name(Task t) {
    switch (t) {
        case Task::Repetition: return "repetition";
        case Task::FilledPause: return "filled-pause";
        case Task::Prolongation: return "prolongation";
    }
    throw UsageError("unknown task value");
}

Task task_from_name(const std::string& name) {
    const std::string n = lower(name);
    if (n == "repetition") return Task::Repetition;
    if (n == "filled-pause" || n == "filledpause") return Task::FilledPause;
    if (n == "prolongation") return Task::Prolongation;
    throw UsageError("unknown task \"" + name +
                     "\" (expected repetition, filled-pause, or prolongation)");
}

bool task_includes(Task t, DisfluencyType d) {
    switch (t) {
        case Task::Repetition:
            return d == DisfluencyType::WordRepetition || d == DisfluencyType::PartWordRepetition ||
                   d == DisfluencyType::PhraseRepetition;
        case Task::FilledPause: return d == DisfluencyType::FilledPause;
        case Task::Prolongation: return d == DisfluencyType::Prolongation;
    }
    return false;
}

std::vector<LabeledClip> select_task_clips(const std::vector<ClipRecord>& manifest, Task task) {
    std::vector<LabeledClip> out;
    for (const auto& rec : manifest) {
        if (!task_includes(task, rec.dtype)) continue;
        out.push_back({rec, rec.fluency == curation::Fluency::Atypical ? 1 : 0});
    }
    const auto n1 = std::size_t(std::count_if(out.begin(), out.end(),
                                              [](const LabeledClip& c) { return c.label == 1; }));
    if (out.empty() || n1 == 0 || n1 == out.size())
        throw DataError(std::string("task ") + task_name(task) +
                        ": need clips from both classes, got " + std::to_string(n1) +
                        " atypical of " + std::to_string(out.size()));
    return out;
}

void SplitSpec::validate() const {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw UsageError("split: train_fraction must lie in (0,1)");
    if (!(val_fraction > 0.0 && val_fraction < 1.0))
        throw UsageError("split: val_fraction must lie in (0,1)");
    if (train_fraction + val_fraction >= 1.0)
        throw UsageError("split: train and validation fractions must leave room for a test set");
}

namespace {

// Slot counts for one class: round to the fractions but keep every
// partition non-empty.
struct PartitionSizes {
    std::size_t train = 0, val = 0, test = 0;
};

PartitionSizes partition_sizes(std::size_t n, const SplitSpec& spec) {
    PartitionSizes s;
    s.train = std::size_t(std::lround(spec.train_fraction * double(n)));
    s.train = std::clamp<std::size_t>(s.train, 1, n - 2);
    s.val = std::size_t(std::lround(spec.val_fraction * double(n)));
    s.val = std::clamp<std::size_t>(s.val, 1, n - s.train - 1);
    s.test = n - s.train - s.val;
    return s;
}

}  // namespace

Split make_split(const std::vector<LabeledClip>& clips, const SplitSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    Split split;

    // Unit of assignment: speaker when disjointness is on, clip otherwise.
    // Units are stratified by class so train balance tracks the global ratio.
    std::map<std::string, std::pair<int, std::vector<std::size_t>>> units;
    for (std::size_t i = 0; i < clips.size(); ++i) {
        const std::string key = spec.speaker_disjoint ? clips[i].record.speaker_id
                                                      : clips[i].record.clip_path + "#" +
                                                            std::to_string(i);
        auto [it, inserted] = units.try_emplace(key, std::make_pair(clips[i].label,
                                                                    std::vector<std::size_t>{}));
        if (!inserted && it->second.first != clips[i].label)
            throw DataError("speaker " + clips[i].record.speaker_id +
                            " appears with both labels; cannot stratify");
        it->second.second.push_back(i);
    }

    std::array<std::vector<const std::pair<const std::string, std::pair<int, std::vector<std::size_t>>>*>, 2>
        by_class;
    for (const auto& u : units) by_class[std::size_t(u.second.first)].push_back(&u);

    std::array<std::array<std::vector<std::size_t>, 3>, 2> assigned;  // [class][partition]
    for (int cls = 0; cls < 2; ++cls) {
        auto& list = by_class[std::size_t(cls)];
        const std::size_t n = list.size();
        const char* noun = spec.speaker_disjoint ? "speakers" : "clips";
        if (n < 3)
            throw DataError("split: class " + std::to_string(cls) + " has only " +
                            std::to_string(n) + " " + std::string(noun) +
                            ", need at least 3 for train/val/test");
        rng.shuffle(list);  // map iteration gave a sorted, deterministic base order
        const PartitionSizes sizes = partition_sizes(n, spec);
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t part = k < sizes.train ? 0 : (k < sizes.train + sizes.val ? 1 : 2);
            for (const std::size_t idx : list[k]->second.second)
                assigned[std::size_t(cls)][part].push_back(idx);
        }
    }

    // Original manifest order within each partition keeps output stable.
    for (std::size_t part = 0; part < 3; ++part) {
        std::vector<std::size_t> idx;
        for (int cls = 0; cls < 2; ++cls)
            idx.insert(idx.end(), assigned[std::size_t(cls)][part].begin(),
                       assigned[std::size_t(cls)][part].end());
        std::sort(idx.begin(), idx.end());
        auto& dst = part == 0 ? split.train : (part == 1 ? split.val : split.test);
        for (const std::size_t i : idx) dst.push_back(clips[i]);
    }
    return split;
}

Metrics compute_metrics(const std::vector<int>& predictions, const std::vector<int>& labels) {
    if (predictions.empty()) throw UsageError("compute_metrics: empty input");
    if (predictions.size() != labels.size())
        throw UsageError("compute_metrics: predictions and labels differ in length");
    Metrics m;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if ((predictions[i] != 0 && predictions[i] != 1) || (labels[i] != 0 && labels[i] != 1))
            throw UsageError("compute_metrics: values must be 0 or 1");
        if (predictions[i] == 1 && labels[i] == 1) ++m.tp;
        if (predictions[i] == 1 && labels[i] == 0) ++m.fp;
        if (predictions[i] == 0 && labels[i] == 1) ++m.fn;
        if (predictions[i] == 0 && labels[i] == 0) ++m.tn;
    }
    m.precision = m.tp + m.fp > 0 ? double(m.tp) / double(m.tp + m.fp) : 0.0;
    m.recall = m.tp + m.fn > 0 ? double(m.tp) / double(m.tp + m.fn) : 0.0;
    m.f1 = m.precision + m.recall > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    m.accuracy = double(m.tp + m.tn) / double(predictions.size());
    return m;
}

// ---------------------------------------------------------------------------

double FeatureConfig::frame_hop_s() const {
    switch (kind) {
        case cepstra::FeatureKind::PeZtwcc:
        case cepstra::FeatureKind::Ztwcc: return ztw.hop_ms / 1000.0;
        case cepstra::FeatureKind::Mfcc:
        case cepstra::FeatureKind::Plp: return frame.hop_ms / 1000.0;
    }
    throw UsageError("unknown feature kind");
}

std::string FeatureConfig::cache_token() const {
    char buf[256];
    switch (kind) {
        case cepstra::FeatureKind::PeZtwcc:
        case cepstra::FeatureKind::Ztwcc:
            std::snprintf(buf, sizeof buf, "v1;%s;ztw=%.17g,%zu,%.17g,%.17g;mel=%zu,%.17g,%.17g,%zu,%.17g",
                          cepstra::feature_kind_name(kind), ztw.segment_ms, ztw.dft_size,
                          ztw.hop_ms, ztw.pre_emphasis_alpha, perceptual.n_mel_bands,
                          perceptual.f_min, perceptual.f_max, perceptual.n_ceps,
                          perceptual.log_floor);
            break;
        case cepstra::FeatureKind::Mfcc:
        case cepstra::FeatureKind::Plp:
            std::snprintf(buf, sizeof buf, "v1;%s;frame=%.17g,%.17g;mel=%zu,%.17g,%.17g,%zu,%.17g",
                          cepstra::feature_kind_name(kind), frame.window_ms, frame.hop_ms,
                          perceptual.n_mel_bands, perceptual.f_min, perceptual.f_max,
                          perceptual.n_ceps, perceptual.log_floor);
            break;
    }
    return buf;
}

cepstra::CepstralMatrix extract_cepstra(const audio::AudioClip& clip, const FeatureConfig& fc) {
    switch (fc.kind) {
        case cepstra::FeatureKind::PeZtwcc: return cepstra::pe_ztwcc(clip, fc.ztw, fc.perceptual);
        case cepstra::FeatureKind::Ztwcc: return cepstra::ztwcc(clip, fc.ztw, fc.perceptual);
        case cepstra::FeatureKind::Mfcc: return baseline::mfcc(clip, fc.frame, fc.perceptual);
        case cepstra::FeatureKind::Plp: return baseline::plpcc(clip, fc.frame, fc.perceptual);
    }
    throw UsageError("unknown feature kind");
}

FeatureCache::FeatureCache(std::string dir) : dir_(std::move(dir)) {
    if (!dir_.empty()) fs::create_directories(dir_);
}

std::string FeatureCache::key_for(const std::string& clip_path, const FeatureConfig& fc) {
    const std::string token = fc.cache_token();
    const std::vector<char> bytes = read_file_bytes(clip_path);
    std::uint64_t h = fnv1a(token.data(), token.size());
    h = fnv1a(bytes.data(), bytes.size(), h);
    return hex64(h);
}

FeatureCache::Stats FeatureCache::stats() const {
    std::lock_guard<std::mutex> lock(mu_);
    return stats_;
}

Matrix<float> FeatureCache::get(const std::string& clip_path, const FeatureConfig& fc) {
    const auto compute = [&] {
        const audio::AudioClip clip = audio::load_wav(clip_path);
        return extract_cepstra(clip, fc).values;
    };
    if (dir_.empty()) {
        Matrix<float> m = compute();
        std::lock_guard<std::mutex> lock(mu_);
        ++stats_.computed;
        return m;
    }

    const std::string key = key_for(clip_path, fc);
    const fs::path ftr = fs::path(dir_) / (key + ".ftr");
    const fs::path crc = fs::path(dir_) / (key + ".ftr.crc");

    if (fs::exists(ftr) && fs::exists(crc)) {
        try {
            const std::vector<char> payload = read_file_bytes(ftr.string());
            std::ifstream cf(crc);
            std::string recorded;
            cf >> recorded;
            if (recorded != hex64(fnv1a(payload.data(), payload.size())))
                throw FormatError("checksum mismatch");
            Matrix<float> m = sdc::read_ftr(ftr.string());
            std::lock_guard<std::mutex> lock(mu_);
            ++stats_.hits;
            return m;
        } catch (const DataError& e) {
            std::cerr << "warning: feature cache entry corrupt (" << e.what()
                      << "), recomputing: " << ftr.string() << "\n";
            std::lock_guard<std::mutex> lock(mu_);
            ++stats_.corrupted;
        }
    }

    Matrix<float> m = compute();
    // Temp-then-rename keeps concurrent writers of the same key safe: both
    // payloads are identical and the rename is atomic.
    std::ostringstream suffix;
    suffix << "." << std::this_thread::get_id() << ".tmp";
    const fs::path ftr_tmp = ftr.string() + suffix.str();
    const fs::path crc_tmp = crc.string() + suffix.str();
    sdc::write_ftr(ftr_tmp.string(), m);
    const std::vector<char> payload = read_file_bytes(ftr_tmp.string());
    {
        std::ofstream cf(crc_tmp);
        cf << hex64(fnv1a(payload.data(), payload.size())) << "\n";
    }
    fs::rename(ftr_tmp, ftr);
    fs::rename(crc_tmp, crc);
    std::lock_guard<std::mutex> lock(mu_);
    ++stats_.computed;
    return m;
}

// ---------------------------------------------------------------------------

std::string RunConfig::config_label() const {
    return sdc.blocks > 0 ? sdc.to_string() : "static";
}

std::string metrics_json(const RunConfig& rc, std::uint64_t seed, const Metrics& m,
                         const tdnn::History& history, std::size_t train_clips,
                         std::size_t val_clips, std::size_t test_clips) {
    nlohmann::ordered_json j;
    j["task"] = task_name(rc.task);
    j["feature"] = cepstra::feature_kind_name(rc.feature.kind);
    j["n_d_p_k"] = rc.config_label();
    j["seed"] = seed;
    j["counts"] = {{"tp", m.tp}, {"fp", m.fp}, {"fn", m.fn}, {"tn", m.tn}};
    j["precision"] = m.precision;
    j["recall"] = m.recall;
    j["f1"] = m.f1;
    j["accuracy"] = m.accuracy;
    j["train"] = {{"epochs", history.epochs.size()},
                  {"best_epoch", history.best_epoch},
                  {"stopped_early", history.stopped_early}};
    j["partition"] = {{"train_clips", train_clips},
                      {"val_clips", val_clips},
                      {"test_clips", test_clips}};
    return j.dump(2) + "\n";
}

namespace {

void check_speaker_disjoint(const Split& split) {
    std::array<std::set<std::string>, 3> parts;
    for (const auto& c : split.train) parts[0].insert(c.record.speaker_id);
    for (const auto& c : split.val) parts[1].insert(c.record.speaker_id);
    for (const auto& c : split.test) parts[2].insert(c.record.speaker_id);
    for (int a = 0; a < 3; ++a)
        for (int b = a + 1; b < 3; ++b)
            for (const auto& s : parts[std::size_t(a)])
                if (parts[std::size_t(b)].count(s))
                    throw DataError("speaker leakage across partitions: " + s);
}

struct LoadedPartition {
    std::vector<Matrix<float>> x;
    std::vector<int> y;
};

LoadedPartition load_partition(const std::vector<LabeledClip>& clips, FeatureCache& cache,
                               const RunConfig& rc) {
    LoadedPartition part;
    part.x.resize(clips.size());
    part.y.resize(clips.size());
    parallel_over(clips.size(), rc.jobs, [&](std::size_t i) {
        cepstra::CepstralMatrix cm;
        cm.values = cache.get(clips[i].record.clip_path, rc.feature);
        cm.frame_hop_s = rc.feature.frame_hop_s();
        cm.kind = rc.feature.kind;
        const sdc::FeatureMatrix fm =
            rc.sdc.blocks > 0 ? sdc::sdc_features(cm, rc.sdc) : sdc::static_features(cm);
        part.x[i] = fm.values;
        part.y[i] = clips[i].label;
    });
    return part;
}

}  // namespace

RunResult run_task(const std::vector<ClipRecord>& manifest, const RunConfig& rc) {
    if (rc.sdc.blocks > 0) rc.sdc.validate();
    const std::vector<LabeledClip> labeled = select_task_clips(manifest, rc.task);
    const Split split = make_split(labeled, rc.split);
    if (rc.split.speaker_disjoint) check_speaker_disjoint(split);

    FeatureCache cache(rc.cache_dir);
    const LoadedPartition train = load_partition(split.train, cache, rc);
    const LoadedPartition val = load_partition(split.val, cache, rc);
    const LoadedPartition test = load_partition(split.test, cache, rc);

    const Matrix<float>& first = train.x.front();
    for (const auto* part : {&train, &val, &test})
        for (const auto& m : part->x)
            if (m.rows != first.rows || m.cols != first.cols)
                throw DataError("feature shapes differ across clips; mixed-length corpus?");

    tdnn::TdnnConfig net_cfg = rc.tdnn;
    net_cfg.input_frames = int(first.rows);
    net_cfg.input_width = int(first.cols);
    const tdnn::TdnnModel init = tdnn::init_model(net_cfg, rc.train.seed);
    auto [model, history] = tdnn::train(init, train.x, train.y, val.x, val.y, rc.train);

    std::vector<int> predictions(test.x.size());
    for (std::size_t i = 0; i < test.x.size(); ++i)
        predictions[i] = tdnn::predict(model, test.x[i]).label;

    RunResult result;
    result.test = compute_metrics(predictions, test.y);
    result.history = std::move(history);
    result.train_clips = split.train.size();
    result.val_clips = split.val.size();
    result.test_clips = split.test.size();

    if (!rc.out_dir.empty()) {
        const fs::path dir = fs::path(rc.out_dir) / "results" / task_name(rc.task) /
                             cepstra::feature_kind_name(rc.feature.kind);
        fs::create_directories(dir);
        const fs::path report = dir / (rc.config_label() + ".json");
        std::ofstream rf(report);
        if (!rf) throw DataError("cannot write report: " + report.string());
        rf << metrics_json(rc, rc.train.seed, result.test, result.history, result.train_clips,
                           result.val_clips, result.test_clips);
        result.report_path = report.string();

        const fs::path ckpt = dir / (rc.config_label() + ".tdn1");
        tdnn::save_checkpoint(model, ckpt);
        result.checkpoint_path = ckpt.string();
    }
    result.model = std::move(model);
    return result;
}

// ---------------------------------------------------------------------------

std::vector<sdc::SdcConfig> default_grid() {
    std::vector<sdc::SdcConfig> grid;
    for (const std::size_t d : {1, 2, 3})
        for (const std::size_t k : {5, 6, 7}) grid.push_back({13, d, 3, k});
    return grid;
}

std::vector<SweepRow> sweep_sdc(const std::vector<ClipRecord>& manifest, const RunConfig& base,
                                const std::vector<sdc::SdcConfig>& grid) {
    if (grid.empty()) throw UsageError("sweep: empty configuration grid");
    std::vector<SweepRow> rows;
    for (const auto& cfg : grid) {
        RunConfig rc = base;
        rc.sdc = cfg;
        // Independent but reproducible seed per grid point.
        const std::string label = cfg.to_string();
        rc.train.seed = fnv1a(label.data(), label.size(), base.train.seed ^ 0x9e3779b97f4a7c15ull);
        const RunResult r = run_task(manifest, rc);
        rows.push_back({cfg, rc.train.seed, r.test, false});
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i].metrics.f1 > rows[best].metrics.f1) best = i;
    rows[best].best = true;

    if (!base.out_dir.empty()) {
        const fs::path dir = fs::path(base.out_dir) / "results";
        fs::create_directories(dir);
        std::ofstream csv(dir / "summary.csv");
        if (!csv) throw DataError("cannot write " + (dir / "summary.csv").string());
        csv << "task,feature,n_d_p_k,precision,recall,f1,accuracy,seed\n";
        char line[256];
        for (const auto& row : rows) {
            std::snprintf(line, sizeof line, "%s,%s,%s,%.6f,%.6f,%.6f,%.6f,%llu\n",
                          task_name(base.task), cepstra::feature_kind_name(base.feature.kind),
                          row.config.to_string().c_str(), row.metrics.precision,
                          row.metrics.recall, row.metrics.f1, row.metrics.accuracy,
                          static_cast<unsigned long long>(row.seed));
            csv << line;
        }
    }
    return rows;
}

}  // namespace dysflow::experiment
