#include "dysflow/curation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "dysflow/error.hpp"

namespace fs = std::filesystem;

namespace dysflow::curation {

namespace {

const char* kTypeNames[kDisfluencyTypeCount] = {
    "FilledPause", "Prolongation", "PartWordRepetition",
    "PhraseRepetition", "WordRepetition", "NoDisfluency",
};

std::string lower(const std::string& s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return char(std::tolower(c)); });
    return out;
}

}  // namespace

const char* disfluency_name(DisfluencyType t) { return kTypeNames[int(t)]; }

DisfluencyType disfluency_from_name(const std::string& name) {
    const std::string needle = lower(name);
    for (int i = 0; i < kDisfluencyTypeCount; ++i)
        if (needle == lower(kTypeNames[i])) return DisfluencyType(i);
    throw DataError("unknown disfluency label: " + name);
}

const char* corpus_name(CorpusTag c) {
    switch (c) {
        case CorpusTag::Tisa: return "TISA";
        case CorpusTag::Ied: return "IED";
        case CorpusTag::IedE: return "IED_E";
    }
    return "?";
}

CorpusTag corpus_from_name(const std::string& name) {
    const std::string needle = lower(name);
    if (needle == "tisa") return CorpusTag::Tisa;
    if (needle == "ied") return CorpusTag::Ied;
    if (needle == "ied_e" || needle == "ied-e") return CorpusTag::IedE;
    throw DataError("unknown corpus tag: " + name);
}

std::vector<LabelEvent> parse_label_file(const std::string& text) {
    std::vector<LabelEvent> events;
    std::istringstream stream(text);
    std::string line;
    int line_no = 0;
    while (std::getline(stream, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::size_t tab1 = line.find('\t');
        const std::size_t tab2 = tab1 == std::string::npos ? std::string::npos
                                                           : line.find('\t', tab1 + 1);
        if (tab2 == std::string::npos)
            throw DataError("label line " + std::to_string(line_no) + ": expected start<TAB>end<TAB>label");
        LabelEvent ev;
        try {
            std::size_t used = 0;
            ev.start_s = std::stod(line.substr(0, tab1), &used);
            if (used != tab1) throw std::invalid_argument("");
            const std::string end_str = line.substr(tab1 + 1, tab2 - tab1 - 1);
            ev.end_s = std::stod(end_str, &used);
            if (used != end_str.size()) throw std::invalid_argument("");
        } catch (const std::exception&) {
            throw DataError("label line " + std::to_string(line_no) + ": non-numeric time stamp");
        }
        if (ev.start_s < 0.0)
            throw DataError("label line " + std::to_string(line_no) + ": negative start time");
        if (ev.end_s <= ev.start_s)
            throw DataError("label line " + std::to_string(line_no) + ": end time not after start");
        try {
            ev.dtype = disfluency_from_name(line.substr(tab2 + 1));
        } catch (const DataError& e) {
            throw DataError("label line " + std::to_string(line_no) + ": " + e.what());
        }
        events.push_back(ev);
    }
    std::stable_sort(events.begin(), events.end(),
                     [](const LabelEvent& a, const LabelEvent& b) { return a.start_s < b.start_s; });
    return events;
}

std::vector<SpeechRegion> detect_voice_activity(const audio::AudioClip& clip,
                                                const VadParams& params) {
    if (!clip.canonical()) throw DataError("detect_voice_activity: canonical clip required");
    if (params.frame_ms <= 0.0 || params.hop_ms <= 0.0 || params.threshold_db <= 0.0 ||
        params.hangover_frames < 0)
        throw UsageError("detect_voice_activity: invalid parameters");

    const auto frame_len = std::size_t(std::llround(params.frame_ms * clip.sample_rate / 1000.0));
    const auto hop = std::size_t(std::llround(params.hop_ms * clip.sample_rate / 1000.0));
    if (clip.samples.size() < frame_len) return {};
    const std::size_t n_frames = (clip.samples.size() - frame_len) / hop + 1;

    std::vector<double> log_energy(n_frames);
    double peak = -1e9;
    for (std::size_t t = 0; t < n_frames; ++t) {
        double e = 0.0;
        for (std::size_t n = 0; n < frame_len; ++n) {
            const double v = clip.samples[t * hop + n];
            e += v * v;
        }
        log_energy[t] = 10.0 * std::log10(e / double(frame_len) + 1e-12);
        peak = std::max(peak, log_energy[t]);
    }

    const double threshold = peak - params.threshold_db;
    std::vector<bool> speech(n_frames);
    bool any = false;
    for (std::size_t t = 0; t < n_frames; ++t) {
        speech[t] = log_energy[t] > threshold && log_energy[t] > 10.0 * std::log10(2e-12);
        any = any || speech[t];
    }
    if (!any) return {};  // all-silence clip: the peak itself is noise floor

    // Bridge interior silence gaps no longer than the hangover.
    {
        std::size_t i = 0;
        while (i < n_frames) {
            if (speech[i]) {
                ++i;
                continue;
            }
            std::size_t j = i;
            while (j < n_frames && !speech[j]) ++j;
            if (i > 0 && j < n_frames && j - i <= std::size_t(params.hangover_frames))
                for (std::size_t k = i; k < j; ++k) speech[k] = true;
            i = j;
        }
    }

    // Maximal speech runs; frames overlap, so adjacent runs can touch and
    // must be merged to keep the regions disjoint.
    const double frame_s = params.frame_ms / 1000.0;
    const double hop_s = params.hop_ms / 1000.0;
    const double clip_end = clip.duration_s();
    std::vector<SpeechRegion> regions;
    std::size_t t = 0;
    while (t < n_frames) {
        if (!speech[t]) {
            ++t;
            continue;
        }
        std::size_t end = t;
        while (end + 1 < n_frames && speech[end + 1]) ++end;
        const double start_s = double(t) * hop_s;
        const double end_s = std::min(double(end) * hop_s + frame_s, clip_end);
        if (!regions.empty() && start_s <= regions.back().end_s + 1e-9)
            regions.back().end_s = std::max(regions.back().end_s, end_s);
        else
            regions.push_back({start_s, end_s});
        t = end + 1;
    }
    return regions;
}

StandardizedClip standardize_clip(const audio::AudioClip& source, const LabelEvent& event,
                                  const VadParams& vad) {
    if (!source.canonical()) throw DataError("standardize_clip: canonical source required");
    const double dur = source.duration_s();
    if (event.start_s < 0.0 || event.end_s > dur + 1e-9 || event.end_s <= event.start_s)
        throw DataError("standardize_clip: event outside the source extent");

    const int rate = source.sample_rate;
    const auto target = std::size_t(std::llround(kClipSeconds * rate));
    const double fade_s = 0.005;

    StandardizedClip result;
    result.clip.sample_rate = rate;
    result.clip.channels = 1;
    result.clip.source_path = source.source_path;
    result.clip.samples.assign(target, 0.0);

    const double mid = 0.5 * (event.start_s + event.end_s);

    std::size_t src_begin = 0, src_count = 0, dst_offset = 0;
    if (dur <= kClipSeconds + 1e-12) {
        // Use all the material, pad evenly.
        src_count = source.samples.size();
        if (src_count > target) src_count = target;
        dst_offset = (target - src_count) / 2;
        result.event_truncated = event.end_s - event.start_s > kClipSeconds;
    } else {
        double start = std::clamp(mid - kClipSeconds / 2.0, 0.0, dur - kClipSeconds);
        if (event.end_s - event.start_s > kClipSeconds) {
            result.event_truncated = true;
        } else {
            // Snap to the nearest VAD silence boundary that keeps the event
            // inside the window.
            const auto regions = detect_voice_activity(source, vad);
            double best = start;
            double best_dist = 0.251;
            const auto consider = [&](double cut) {
                const double cand = std::clamp(cut, 0.0, dur - kClipSeconds);
                if (cand > event.start_s + 1e-9) return;
                if (cand + kClipSeconds < event.end_s - 1e-9) return;
                const double dist = std::abs(cand - start);
                if (dist <= 0.25 && dist < best_dist) {
                    best_dist = dist;
                    best = cand;
                }
            };
            for (const auto& r : regions) {
                consider(r.start_s);               // window starting where speech starts
                consider(r.end_s);                 // window starting where speech ends
                consider(r.start_s - kClipSeconds);  // window ending where speech starts
                consider(r.end_s - kClipSeconds);    // window ending where speech ends
            }
            start = best;
        }
        src_begin = std::size_t(std::llround(start * rate));
        src_begin = std::min(src_begin, source.samples.size() - target);
        src_count = target;
        dst_offset = 0;
    }

    result.event_start_in_clip_s =
        event.start_s - double(src_begin) / rate + double(dst_offset) / rate;

    for (std::size_t i = 0; i < src_count; ++i)
        result.clip.samples[dst_offset + i] = source.samples[src_begin + i];

    // Raised-cosine fades at both edges of the copied material.
    auto fade_len = std::size_t(std::llround(fade_s * rate));
    fade_len = std::min(fade_len, src_count / 2);
    for (std::size_t i = 0; i < fade_len; ++i) {
        const double g = 0.5 - 0.5 * std::cos(std::numbers::pi * double(i) / double(fade_len));
        result.clip.samples[dst_offset + i] *= g;
        result.clip.samples[dst_offset + src_count - 1 - i] *= g;
    }
    return result;
}

ManifestResult build_manifest(const std::string& clip_dir, CorpusTag corpus) {
    if (!fs::is_directory(clip_dir)) throw DataError("not a directory: " + clip_dir);

    ManifestResult result;
    for (int i = 0; i < kDisfluencyTypeCount; ++i) result.counts[DisfluencyType(i)] = 0;

    std::vector<fs::path> paths;
    for (const auto& entry : fs::directory_iterator(clip_dir))
        if (entry.is_regular_file() && entry.path().extension() == ".wav")
            paths.push_back(entry.path());
    std::sort(paths.begin(), paths.end());

    for (const auto& path : paths) {
        const std::string stem = path.stem().string();
        // <speaker>_<dtype>_<index>
        const std::size_t last = stem.rfind('_');
        const std::size_t mid = last == std::string::npos ? std::string::npos
                                                          : stem.rfind('_', last - 1);
        if (mid == std::string::npos || mid == 0) {
            result.rejected.emplace_back(path.string(), "filename not <speaker>_<dtype>_<index>.wav");
            continue;
        }
        ClipRecord rec;
        rec.clip_path = path.string();
        rec.speaker_id = stem.substr(0, mid);
        rec.corpus = corpus;
        rec.fluency = fluency_for(corpus);
        try {
            rec.dtype = disfluency_from_name(stem.substr(mid + 1, last - mid - 1));
        } catch (const DataError&) {
            result.rejected.emplace_back(path.string(), "unknown disfluency type in filename");
            continue;
        }
        audio::AudioClip clip;
        try {
            clip = audio::load_wav(path.string());
        } catch (const std::exception& e) {
            result.rejected.emplace_back(path.string(), e.what());
            continue;
        }
        rec.duration_s = double(clip.frames()) / clip.sample_rate;
        if (clip.channels != 1 || clip.sample_rate != audio::kCanonicalRate ||
            clip.frames() != std::size_t(std::llround(kClipSeconds * audio::kCanonicalRate))) {
            result.rejected.emplace_back(path.string(), "not a standardized 3 s 16 kHz mono clip");
            continue;
        }
        rec.duration_s = kClipSeconds;
        result.records.push_back(rec);
        result.counts[rec.dtype] += 1;
    }
    std::sort(result.records.begin(), result.records.end(),
              [](const ClipRecord& a, const ClipRecord& b) { return a.clip_path < b.clip_path; });
    return result;
}

void write_manifest(const std::string& path, const std::vector<ClipRecord>& records) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw DataError("cannot write manifest: " + path);
    for (const auto& rec : records) {
        nlohmann::ordered_json j;
        j["clip_path"] = rec.clip_path;
        j["speaker_id"] = rec.speaker_id;
        j["corpus"] = corpus_name(rec.corpus);
        j["dtype"] = disfluency_name(rec.dtype);
        j["fluency"] = rec.fluency == Fluency::Atypical ? "Atypical" : "Typical";
        j["duration_s"] = rec.duration_s;
        f << j.dump() << '\n';
    }
    if (!f) throw DataError("short write to manifest: " + path);
}

std::vector<ClipRecord> read_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open manifest: " + path);
    std::vector<ClipRecord> records;
    std::string line;
    int line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
            ClipRecord rec;
            rec.clip_path = j.at("clip_path").get<std::string>();
            rec.speaker_id = j.at("speaker_id").get<std::string>();
            rec.corpus = corpus_from_name(j.at("corpus").get<std::string>());
            rec.dtype = disfluency_from_name(j.at("dtype").get<std::string>());
            rec.fluency = j.at("fluency").get<std::string>() == "Atypical" ? Fluency::Atypical
                                                                           : Fluency::Typical;
            rec.duration_s = j.at("duration_s").get<double>();
            records.push_back(rec);
        } catch (const nlohmann::json::exception& e) {
            throw DataError("manifest line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return records;
}

}  // namespace dysflow::curation
