// dysflow: curate clips, extract features, train and sweep the classifier.
// Logs go to stderr, results to stdout and files; exit codes are 0 success,
// 2 data error, 64 usage error, 70 internal error.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "dysflow/audio.hpp"
#include "dysflow/config_file.hpp"
#include "dysflow/curation.hpp"
#include "dysflow/error.hpp"
#include "dysflow/experiment.hpp"
#include "dysflow/synth.hpp"

namespace fs = std::filesystem;
using namespace dysflow;

namespace {

constexpr int kExitData = 2;
constexpr int kExitUsage = 64;
constexpr int kExitInternal = 70;

struct CommonFlags {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_given = false;
    int jobs = 0;  // 0 = available parallelism
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "configuration file (INI-style sections)");
    cmd->add_option("--seed", flags.seed, "master seed for splits and training")
        ->each([&flags](const std::string&) { flags.seed_given = true; });
    cmd->add_option("--jobs", flags.jobs, "worker threads (default: available parallelism)");
}

int resolve_jobs(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? int(hw) : 1;
}

configfile::PipelineConfig resolve_config(const CommonFlags& flags) {
    configfile::PipelineConfig cfg;
    if (!flags.config_path.empty()) cfg = configfile::load_config(flags.config_path);
    if (flags.seed_given) {  // flags override file values
        cfg.train.seed = flags.seed;
        cfg.split.seed = flags.seed;
    }
    return cfg;
}

// Striped fan-out used by curate/extract; outputs land in disjoint slots.
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

std::string cache_dir_for(const std::string& flag_value, const std::string& out_dir) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("DYSFLOW_CACHE_DIR"); env && *env) return env;
    return (fs::path(out_dir) / "cache").string();
}

// --- curate ----------------------------------------------------------------

struct CurateArgs {
    std::string in_dir, label_dir, out_dir, corpus;
    CommonFlags common;
};

int cmd_curate(const CurateArgs& args) {
    const curation::CorpusTag corpus = curation::corpus_from_name(args.corpus);
    std::vector<fs::path> recordings;
    if (!fs::is_directory(args.in_dir))
        throw DataError("input directory does not exist: " + args.in_dir);
    for (const auto& entry : fs::directory_iterator(args.in_dir))
        if (entry.is_regular_file() && entry.path().extension() == ".wav")
            recordings.push_back(entry.path());
    std::sort(recordings.begin(), recordings.end());
    if (recordings.empty()) throw DataError("no .wav recordings in " + args.in_dir);

    // Pass 1: parse every label file and fix output names up front, so the
    // naming is independent of worker scheduling.
    struct Job {
        fs::path recording;
        curation::LabelEvent event;
        fs::path out_path;
    };
    std::vector<Job> jobs_list;
    std::map<std::string, int> name_counter;  // per speaker+dtype
    for (const auto& rec : recordings) {
        const std::string stem = rec.stem().string();
        const std::string speaker = stem.substr(0, stem.find('_'));
        const fs::path label_path = fs::path(args.label_dir) / (stem + ".txt");
        std::ifstream lf(label_path);
        if (!lf) throw DataError("missing label file: " + label_path.string());
        std::ostringstream buf;
        buf << lf.rdbuf();
        std::vector<curation::LabelEvent> events;
        try {
            events = curation::parse_label_file(buf.str());
        } catch (const DataError& e) {
            throw DataError(label_path.string() + ": " + e.what());
        }
        for (const auto& ev : events) {
            const std::string dtype = curation::disfluency_name(ev.dtype);
            const int index = ++name_counter[speaker + "/" + dtype];
            char name[128];
            std::snprintf(name, sizeof name, "%s_%s_%03d.wav", speaker.c_str(), dtype.c_str(),
                          index);
            jobs_list.push_back({rec, ev, fs::path(args.out_dir) / name});
        }
    }
    if (jobs_list.empty()) throw DataError("label files contain no events");

    fs::create_directories(args.out_dir);
    std::mutex log_mu;
    parallel_over(jobs_list.size(), resolve_jobs(args.common.jobs), [&](std::size_t i) {
        const Job& job = jobs_list[i];
        const audio::AudioClip raw = audio::load_wav(job.recording.string());
        const audio::AudioClip source = audio::canonicalize(raw);
        const curation::StandardizedClip cut = curation::standardize_clip(source, job.event);
        audio::write_wav(job.out_path.string(), cut.clip);
        if (cut.event_truncated) {
            std::lock_guard<std::mutex> lock(log_mu);
            std::cerr << "warning: event longer than the clip window, truncated: "
                      << job.out_path.filename().string() << "\n";
        }
    });

    const curation::ManifestResult manifest = curation::build_manifest(args.out_dir, corpus);
    curation::write_manifest((fs::path(args.out_dir) / "manifest.jsonl").string(),
                             manifest.records);
    for (const auto& [path, reason] : manifest.rejected)
        std::cerr << "warning: rejected " << path << ": " << reason << "\n";

    std::printf("clip counts (%s):\n", curation::corpus_name(corpus));
    for (int t = 0; t < curation::kDisfluencyTypeCount; ++t) {
        const auto dtype = static_cast<curation::DisfluencyType>(t);
        const auto it = manifest.counts.find(dtype);
        const std::size_t n = it == manifest.counts.end() ? 0 : it->second;
        std::printf("  %-20s %zu\n", curation::disfluency_name(dtype), n);
    }
    std::printf("total %zu clips, %zu rejected\n", manifest.records.size(),
                manifest.rejected.size());
    return 0;
}

// --- extract ----------------------------------------------------------------

struct ExtractArgs {
    std::string manifest_path, feature, out_dir;
    CommonFlags common;
};

int cmd_extract(const ExtractArgs& args) {
    const configfile::PipelineConfig cfg = resolve_config(args.common);
    experiment::FeatureConfig fc;
    fc.kind = cepstra::feature_kind_from_name(args.feature);
    fc.ztw = cfg.ztw;
    fc.perceptual = cfg.perceptual;
    fc.frame = cfg.frame;

    const std::vector<curation::ClipRecord> records =
        curation::read_manifest(args.manifest_path);
    if (records.empty()) throw DataError("manifest is empty: " + args.manifest_path);

    experiment::FeatureCache cache(args.out_dir);
    parallel_over(records.size(), resolve_jobs(args.common.jobs),
                  [&](std::size_t i) { cache.get(records[i].clip_path, fc); });

    const auto stats = cache.stats();
    std::fprintf(stderr, "extract: %zu computed, %zu skipped up-to-date, %zu corrupt recomputed\n",
                 stats.computed, stats.hits, stats.corrupted);
    std::printf("%zu feature files in %s\n", records.size(), args.out_dir.c_str());
    return 0;
}

// --- train -------------------------------------------------------------------

struct TrainArgs {
    std::string manifest_path, task, feature, sdc_text, out_dir, cache_dir;
    CommonFlags common;
};

experiment::RunConfig make_run_config(const std::string& manifest_path, const std::string& task,
                                      const std::string& feature, const std::string& sdc_text,
                                      const std::string& out_dir, const std::string& cache_flag,
                                      const CommonFlags& common) {
    const configfile::PipelineConfig cfg = resolve_config(common);
    experiment::RunConfig rc;
    rc.task = experiment::task_from_name(task);
    rc.feature.kind = cepstra::feature_kind_from_name(feature);
    rc.feature.ztw = cfg.ztw;
    rc.feature.perceptual = cfg.perceptual;
    rc.feature.frame = cfg.frame;
    if (sdc_text == "static") {
        rc.sdc = cfg.sdc;
        rc.sdc.blocks = 0;  // static cepstra only, no delta stack
    } else if (!sdc_text.empty()) {
        rc.sdc = sdc::SdcConfig::parse(sdc_text);
    } else {
        rc.sdc = cfg.sdc;
    }
    rc.tdnn = cfg.tdnn;
    rc.train = cfg.train;
    rc.split = cfg.split;
    rc.out_dir = out_dir;
    rc.cache_dir = cache_dir_for(cache_flag, out_dir);
    rc.jobs = resolve_jobs(common.jobs);
    return rc;
}

int cmd_train(const TrainArgs& args) {
    const experiment::RunConfig rc =
        make_run_config(args.manifest_path, args.task, args.feature, args.sdc_text, args.out_dir,
                        args.cache_dir, args.common);
    const std::vector<curation::ClipRecord> manifest =
        curation::read_manifest(args.manifest_path);
    const experiment::RunResult result = experiment::run_task(manifest, rc);

    std::fprintf(stderr, "train: %zu/%zu/%zu clips, %zu epochs, best epoch %d%s\n",
                 result.train_clips, result.val_clips, result.test_clips,
                 result.history.epochs.size(), result.history.best_epoch,
                 result.history.stopped_early ? " (early stop)" : "");
    std::printf("task=%s feature=%s config=%s\n", experiment::task_name(rc.task),
                cepstra::feature_kind_name(rc.feature.kind), rc.config_label().c_str());
    std::printf("precision=%.4f recall=%.4f f1=%.4f accuracy=%.4f\n", result.test.precision,
                result.test.recall, result.test.f1, result.test.accuracy);
    if (!result.report_path.empty())
        std::fprintf(stderr, "report: %s\ncheckpoint: %s\n", result.report_path.c_str(),
                     result.checkpoint_path.c_str());
    return 0;
}

// --- sweep --------------------------------------------------------------------

struct SweepArgs {
    std::string manifest_path, task, feature = "pe-ztwcc", out_dir, cache_dir;
    std::vector<std::string> grid_terms;
    CommonFlags common;
};

std::vector<std::size_t> parse_grid_values(const std::string& list, const std::string& term) {
    std::vector<std::size_t> values;
    std::istringstream in(list);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (item.empty() || item.find_first_not_of("0123456789") != std::string::npos)
            throw UsageError("bad --grid term \"" + term + "\": values must be positive integers");
        values.push_back(std::size_t(std::stoull(item)));
    }
    if (values.empty()) throw UsageError("bad --grid term \"" + term + "\": no values");
    return values;
}

int cmd_sweep(const SweepArgs& args) {
    experiment::RunConfig base =
        make_run_config(args.manifest_path, args.task, args.feature, "", args.out_dir,
                        args.cache_dir, args.common);

    std::vector<std::size_t> d_values{1, 2, 3};
    std::vector<std::size_t> k_values{5, 6, 7};
    for (const auto& term : args.grid_terms) {
        if (term.rfind("d=", 0) == 0)
            d_values = parse_grid_values(term.substr(2), term);
        else if (term.rfind("K=", 0) == 0 || term.rfind("k=", 0) == 0)
            k_values = parse_grid_values(term.substr(2), term);
        else
            throw UsageError("bad --grid term \"" + term + "\" (expected d=... or K=...)");
    }
    std::vector<sdc::SdcConfig> grid;
    for (const auto d : d_values)
        for (const auto k : k_values) grid.push_back({base.sdc.n_static, d, base.sdc.shift, k});

    const std::vector<curation::ClipRecord> manifest =
        curation::read_manifest(args.manifest_path);
    const auto rows = experiment::sweep_sdc(manifest, base, grid);

    std::printf("task=%s feature=%s\n", experiment::task_name(base.task),
                cepstra::feature_kind_name(base.feature.kind));
    std::printf("%-12s %-10s %-10s %-10s %-10s\n", "n-d-p-k", "precision", "recall", "f1",
                "accuracy");
    for (const auto& row : rows)
        std::printf("%-12s %-10.4f %-10.4f %-10.4f %-10.4f%s\n", row.config.to_string().c_str(),
                    row.metrics.precision, row.metrics.recall, row.metrics.f1,
                    row.metrics.accuracy, row.best ? "  <- best" : "");
    if (!base.out_dir.empty())
        std::fprintf(stderr, "summary: %s\n",
                     (fs::path(base.out_dir) / "results" / "summary.csv").string().c_str());
    return 0;
}

// --- synth (hidden helper for demos and self-tests) ---------------------------

struct SynthArgs {
    std::string out_dir;
    int speakers_per_class = 20;
    int clips_per_speaker = 10;
    std::uint64_t seed = 20260101;
};

int cmd_synth(const SynthArgs& args) {
    synth::BenchmarkSpec spec;
    spec.speakers_per_class = args.speakers_per_class;
    spec.clips_per_speaker = args.clips_per_speaker;
    spec.seed = args.seed;
    const auto records = synth::write_benchmark_corpus(args.out_dir, spec);
    std::printf("wrote %zu clips and manifest.jsonl to %s\n", records.size(),
                args.out_dir.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"typical vs. atypical disfluency classification pipeline"};
    app.require_subcommand(1);

    CurateArgs curate;
    auto* c = app.add_subcommand("curate", "standardize raw recordings into labeled 3 s clips");
    c->add_option("--in", curate.in_dir, "directory of raw .wav recordings")->required();
    c->add_option("--labels", curate.label_dir, "directory of tab-separated label files")
        ->required();
    c->add_option("--out", curate.out_dir, "output directory for clips + manifest.jsonl")
        ->required();
    c->add_option("--corpus", curate.corpus, "corpus tag: tisa, ied, or ied-e")
        ->required()
        ->check(CLI::IsMember({"tisa", "ied", "ied-e"}));
    add_common(c, curate.common);

    ExtractArgs extract;
    auto* e = app.add_subcommand("extract", "compute cepstral features into a cache directory");
    e->add_option("--manifest", extract.manifest_path, "manifest.jsonl from curate")->required();
    e->add_option("--feature", extract.feature, "pe-ztwcc, ztwcc, mfcc, or plp")
        ->required()
        ->check(CLI::IsMember({"pe-ztwcc", "ztwcc", "mfcc", "plp"}));
    e->add_option("--out", extract.out_dir, "cache directory for FTR1 files")->required();
    add_common(e, extract.common);

    TrainArgs train;
    auto* t = app.add_subcommand("train", "train and evaluate one task/feature configuration");
    t->add_option("--manifest", train.manifest_path, "manifest.jsonl")->required();
    t->add_option("--task", train.task, "repetition, filled-pause, or prolongation")->required();
    t->add_option("--feature", train.feature, "pe-ztwcc, ztwcc, mfcc, or plp")->required();
    t->add_option("--sdc", train.sdc_text, "N-d-p-K (e.g. 13-2-3-6) or \"static\"");
    t->add_option("--out", train.out_dir, "output directory for reports and checkpoints")
        ->required();
    t->add_option("--cache", train.cache_dir,
                  "feature cache directory (default <out>/cache or $DYSFLOW_CACHE_DIR)");
    add_common(t, train.common);

    SweepArgs sweep;
    auto* s = app.add_subcommand("sweep", "grid over delta configurations, one row per N-d-p-K");
    s->add_option("--manifest", sweep.manifest_path, "manifest.jsonl")->required();
    s->add_option("--task", sweep.task, "repetition, filled-pause, or prolongation")->required();
    s->add_option("--feature", sweep.feature, "feature kind (default pe-ztwcc)");
    s->add_option("--grid", sweep.grid_terms, "grid terms, e.g. --grid d=1,2,3 K=5,6,7")
        ->expected(-1);
    s->add_option("--out", sweep.out_dir, "output directory for reports and summary.csv")
        ->required();
    s->add_option("--cache", sweep.cache_dir, "feature cache directory");
    add_common(s, sweep.common);

    SynthArgs synth_args;
    auto* y = app.add_subcommand("synth", "generate the synthetic benchmark corpus");
    y->add_option("--out", synth_args.out_dir, "output directory")->required();
    y->add_option("--speakers-per-class", synth_args.speakers_per_class);
    y->add_option("--clips-per-speaker", synth_args.clips_per_speaker);
    y->add_option("--seed", synth_args.seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (c->parsed()) return cmd_curate(curate);
        if (e->parsed()) return cmd_extract(extract);
        if (t->parsed()) return cmd_train(train);
        if (s->parsed()) return cmd_sweep(sweep);
        if (y->parsed()) return cmd_synth(synth_args);
        std::cerr << "error: no subcommand\n";
        return kExitUsage;
    } catch (const UsageError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitUsage;
    } catch (const DataError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitData;
    } catch (const std::exception& err) {
        std::cerr << "internal error: " << err.what() << "\n";
        return kExitInternal;
    }
}
