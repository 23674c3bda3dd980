#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dysflow/audio.hpp"
#include "dysflow/curation.hpp"
#include "dysflow/synth.hpp"

#ifndef DYSFLOW_BIN
#error "DYSFLOW_BIN must point at the command-line binary"
#endif

using namespace dysflow;
namespace fs = std::filesystem;

namespace {

fs::path temp_root() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "dysflow_test_cli";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

struct CliResult {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    std::ostringstream buf;
    buf << f.rdbuf();
    return buf.str();
}

// Runs the binary through the shell; `env_prefix` may carry VAR=value pairs.
CliResult run_cli(const std::string& args, const std::string& env_prefix = "") {
    static int counter = 0;
    const fs::path out = temp_root() / ("stdout." + std::to_string(counter));
    const fs::path err = temp_root() / ("stderr." + std::to_string(counter));
    ++counter;
    std::string cmd = env_prefix;
    if (!cmd.empty()) cmd += " ";
    cmd += std::string("'") + DYSFLOW_BIN + "' " + args + " > '" + out.string() + "' 2> '" +
           err.string() + "'";
    const int status = std::system(cmd.c_str());
    CliResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

// Raw recordings plus label files for the curate tests.
struct MiniDirs {
    fs::path audio;
    fs::path labels;
    std::vector<synth::MiniRecording> recordings;
};

const MiniDirs& mini_dirs() {
    static const MiniDirs dirs = [] {
        MiniDirs d;
        d.audio = temp_root() / "raw";
        d.labels = temp_root() / "raw_labels";
        d.recordings = synth::make_mini_corpus();
        synth::write_mini_corpus(d.audio.string(), d.labels.string(), d.recordings);
        return d;
    }();
    return dirs;
}

// Standardized benchmark corpus written through the synth subcommand.
const fs::path& benchmark_dir() {
    static const fs::path dir = [] {
        const fs::path d = temp_root() / "bench";
        const CliResult r = run_cli("synth --out '" + d.string() +
                                    "' --speakers-per-class 4 --clips-per-speaker 3 --seed 31");
        REQUIRE(r.code == 0);
        REQUIRE(fs::exists(d / "manifest.jsonl"));
        return d;
    }();
    return dir;
}

// Small network so the train/sweep smoke tests stay quick.
const fs::path& tiny_config() {
    static const fs::path path = [] {
        const fs::path p = temp_root() / "tiny.ini";
        std::ofstream f(p);
        f << "[tdnn]\n"
             "conv1_filters = 4\nconv1_kernel = 3\nconv1_dilation = 1\n"
             "conv2_filters = 6\nconv2_kernel = 3\nconv2_dilation = 2\n"
             "fc1_units = 8\nfc2_units = 4\n"
             "[train]\nbatch_size = 8\nmax_epochs = 2\nseed = 5\n"
             "[split]\nseed = 11\n";
        return p;
    }();
    return path;
}

}  // namespace

// ---------------------------------------------------------------------------
// Flag handling and exit codes

TEST_CASE("help succeeds, missing or bad flags are usage errors") {
    CHECK(run_cli("--help").code == 0);
    CHECK(run_cli("").code == 64);                    // subcommand required
    CHECK(run_cli("frobnicate").code == 64);          // unknown subcommand
    CHECK(run_cli("train").code == 64);               // missing required flags
    CHECK(run_cli("curate --in a --labels b --out c --corpus mars").code == 64);
    CHECK(run_cli("extract --manifest m --feature cqcc --out d").code == 64);

    const CliResult r = run_cli("train --bogus-flag 1");
    CHECK(r.code == 64);
    CHECK(!r.err.empty());
}

// ---------------------------------------------------------------------------
// curate

TEST_CASE("curate cuts the mini corpus into standardized clips") {
    const MiniDirs& dirs = mini_dirs();
    const fs::path out = temp_root() / "curated";
    const CliResult r = run_cli("curate --in '" + dirs.audio.string() + "' --labels '" +
                                dirs.labels.string() + "' --out '" + out.string() +
                                "' --corpus tisa");
    REQUIRE(r.code == 0);
    CHECK(r.out.find("clip counts (TISA):") != std::string::npos);
    CHECK(r.out.find("total") != std::string::npos);
    REQUIRE(fs::exists(out / "manifest.jsonl"));

    const auto records = curation::read_manifest((out / "manifest.jsonl").string());
    std::size_t events = 0;
    for (const auto& rec : dirs.recordings) events += rec.events.size();
    CHECK(records.size() == events);

    for (const auto& rec : records) {
        CHECK(rec.duration_s == doctest::Approx(3.0));
        CHECK(rec.corpus == curation::CorpusTag::Tisa);
        CHECK(rec.fluency == curation::Fluency::Atypical);
        const audio::AudioClip clip = audio::load_wav(rec.clip_path);
        CHECK(clip.samples.size() == 48000);
        CHECK(clip.sample_rate == 16000);
    }
}

TEST_CASE("curate output does not depend on the worker count") {
    const MiniDirs& dirs = mini_dirs();
    const fs::path out1 = temp_root() / "curated_j1";
    const fs::path out3 = temp_root() / "curated_j3";
    REQUIRE(run_cli("curate --in '" + dirs.audio.string() + "' --labels '" +
                    dirs.labels.string() + "' --out '" + out1.string() +
                    "' --corpus tisa --jobs 1")
                .code == 0);
    REQUIRE(run_cli("curate --in '" + dirs.audio.string() + "' --labels '" +
                    dirs.labels.string() + "' --out '" + out3.string() +
                    "' --corpus tisa --jobs 3")
                .code == 0);

    std::set<std::string> names1, names3;
    for (const auto& e : fs::directory_iterator(out1))
        if (e.path().extension() == ".wav") names1.insert(e.path().filename().string());
    for (const auto& e : fs::directory_iterator(out3))
        if (e.path().extension() == ".wav") names3.insert(e.path().filename().string());
    REQUIRE(names1 == names3);
    REQUIRE(!names1.empty());
    for (const auto& name : names1) CHECK(slurp(out1 / name) == slurp(out3 / name));
}

TEST_CASE("curate reports missing inputs as data errors") {
    const fs::path empty = temp_root() / "empty_raw";
    fs::create_directories(empty);
    const CliResult r = run_cli("curate --in '" + empty.string() + "' --labels '" +
                                empty.string() + "' --out '" +
                                (temp_root() / "curated_empty").string() + "' --corpus ied");
    CHECK(r.code == 2);
    CHECK(r.err.find("error:") != std::string::npos);

    const CliResult missing = run_cli("curate --in '" + (temp_root() / "nope").string() +
                                      "' --labels '" + empty.string() + "' --out '" +
                                      (temp_root() / "curated_missing").string() +
                                      "' --corpus ied");
    CHECK(missing.code == 2);
}

// ---------------------------------------------------------------------------
// extract

TEST_CASE("extract is idempotent and heals corrupt entries") {
    const fs::path manifest = benchmark_dir() / "manifest.jsonl";
    const fs::path cache = temp_root() / "ftr";
    const std::string base_args = "extract --manifest '" + manifest.string() +
                                  "' --feature mfcc --out '" + cache.string() + "'";

    const CliResult first = run_cli(base_args);
    REQUIRE(first.code == 0);
    CHECK(first.err.find("24 computed, 0 skipped up-to-date") != std::string::npos);
    CHECK(first.out.find("24 feature files") != std::string::npos);

    const CliResult second = run_cli(base_args + " --jobs 2");
    REQUIRE(second.code == 0);
    CHECK(second.err.find("0 computed, 24 skipped up-to-date") != std::string::npos);

    // Damage one payload; the next run recomputes exactly that entry.
    fs::path victim;
    for (const auto& e : fs::directory_iterator(cache))
        if (e.path().extension() == ".ftr") {
            victim = e.path();
            break;
        }
    REQUIRE(!victim.empty());
    {
        std::fstream f(victim, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(16);
        f.write("\x7f", 1);
    }
    const CliResult healed = run_cli(base_args);
    REQUIRE(healed.code == 0);
    CHECK(healed.err.find("1 computed, 23 skipped up-to-date, 1 corrupt recomputed") !=
          std::string::npos);
    CHECK(healed.err.find("warning: feature cache entry corrupt") != std::string::npos);

    const CliResult empty = run_cli("extract --manifest '" +
                                    (temp_root() / "no_manifest.jsonl").string() +
                                    "' --feature mfcc --out '" + cache.string() + "'");
    CHECK(empty.code == 2);
}

// ---------------------------------------------------------------------------
// train

TEST_CASE("train writes reports and reruns reproduce them") {
    const fs::path manifest = benchmark_dir() / "manifest.jsonl";
    const fs::path out = temp_root() / "train_out";
    const std::string args = "train --manifest '" + manifest.string() +
                             "' --task repetition --feature mfcc --sdc static --out '" +
                             out.string() + "' --config '" + tiny_config().string() + "'";

    const CliResult r = run_cli(args);
    REQUIRE(r.code == 0);
    CHECK(r.out.find("task=repetition feature=mfcc config=static") != std::string::npos);
    CHECK(r.out.find("precision=") != std::string::npos);
    CHECK(r.out.find("f1=") != std::string::npos);
    CHECK(r.err.find("train:") != std::string::npos);

    const fs::path report = out / "results" / "repetition" / "mfcc" / "static.json";
    const fs::path ckpt = out / "results" / "repetition" / "mfcc" / "static.tdn1";
    REQUIRE(fs::exists(report));
    REQUIRE(fs::exists(ckpt));
    CHECK(fs::exists(out / "cache"));  // default cache lives under --out

    const std::string baseline = slurp(report);
    const CliResult again = run_cli(args);
    REQUIRE(again.code == 0);
    CHECK(slurp(report) == baseline);
    CHECK(again.out == r.out);
}

TEST_CASE("train honors the seed flag over the config file") {
    const fs::path manifest = benchmark_dir() / "manifest.jsonl";
    const fs::path out = temp_root() / "train_seed";
    const CliResult r = run_cli("train --manifest '" + manifest.string() +
                                "' --task repetition --feature mfcc --sdc static --out '" +
                                out.string() + "' --config '" + tiny_config().string() +
                                "' --seed 404");
    REQUIRE(r.code == 0);
    const std::string report =
        slurp(out / "results" / "repetition" / "mfcc" / "static.json");
    CHECK(report.find("\"seed\": 404") != std::string::npos);
}

TEST_CASE("train respects the cache environment variable") {
    const fs::path manifest = benchmark_dir() / "manifest.jsonl";
    const fs::path out = temp_root() / "train_envcache";
    const fs::path env_cache = temp_root() / "env_cache";
    const CliResult r = run_cli("train --manifest '" + manifest.string() +
                                    "' --task repetition --feature mfcc --sdc static --out '" +
                                    out.string() + "' --config '" + tiny_config().string() + "'",
                                "DYSFLOW_CACHE_DIR='" + env_cache.string() + "'");
    REQUIRE(r.code == 0);
    CHECK(fs::exists(env_cache));
    CHECK(!fs::exists(out / "cache"));
    std::size_t ftr_files = 0;
    for (const auto& e : fs::directory_iterator(env_cache))
        if (e.path().extension() == ".ftr") ++ftr_files;
    CHECK(ftr_files == 24);
}

TEST_CASE("train flag validation") {
    const fs::path manifest = benchmark_dir() / "manifest.jsonl";
    const std::string base = "train --manifest '" + manifest.string() +
                             "' --task repetition --feature mfcc --out '" +
                             (temp_root() / "train_bad").string() + "'";
    CHECK(run_cli(base + " --sdc 13-2-3").code == 64);      // not N-d-p-K
    CHECK(run_cli(base + " --sdc static-ish").code == 64);
    CHECK(run_cli(base + " --task yodeling").code == 64);

    const CliResult missing = run_cli("train --manifest '" +
                                      (temp_root() / "gone.jsonl").string() +
                                      "' --task repetition --feature mfcc --out '" +
                                      (temp_root() / "train_gone").string() + "'");
    CHECK(missing.code == 2);
}

// ---------------------------------------------------------------------------
// sweep

TEST_CASE("sweep prints the grid table and marks the best row") {
    const fs::path manifest = benchmark_dir() / "manifest.jsonl";
    const fs::path out = temp_root() / "sweep_out";
    const CliResult r = run_cli("sweep --manifest '" + manifest.string() +
                                "' --task repetition --feature mfcc --grid d=1,2 K=2 --out '" +
                                out.string() + "' --config '" + tiny_config().string() + "'");
    REQUIRE(r.code == 0);
    CHECK(r.out.find("task=repetition feature=mfcc") != std::string::npos);
    CHECK(r.out.find("13-1-3-2") != std::string::npos);
    CHECK(r.out.find("13-2-3-2") != std::string::npos);
    CHECK(r.out.find("<- best") != std::string::npos);

    const fs::path csv = out / "results" / "summary.csv";
    REQUIRE(fs::exists(csv));
    const std::string text = slurp(csv);
    CHECK(text.rfind("task,feature,n_d_p_k,", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 3);  // header + two rows

    CHECK(run_cli("sweep --manifest '" + manifest.string() +
                  "' --task repetition --grid d=x --out '" + out.string() + "'")
              .code == 64);
}
