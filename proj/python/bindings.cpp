// Python bindings for the core operations: WAV io, zero-time-windowed
// analysis, cepstral features, delta stacking, voice activity, and the
// classifier. Arrays cross the boundary as numpy; configs as keyword
// arguments with the C++ defaults.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "dysflow/audio.hpp"
#include "dysflow/baseline.hpp"
#include "dysflow/cepstra.hpp"
#include "dysflow/curation.hpp"
#include "dysflow/error.hpp"
#include "dysflow/experiment.hpp"
#include "dysflow/sdc.hpp"
#include "dysflow/tdnn.hpp"
#include "dysflow/ztw.hpp"

namespace py = pybind11;
using namespace dysflow;

namespace {

template <typename T>
using c_array = py::array_t<T, py::array::c_style | py::array::forcecast>;

template <typename T>
py::array_t<T> matrix_to_array(const Matrix<T>& m) {
    py::array_t<T> out({m.rows, m.cols});
    std::copy(m.data.begin(), m.data.end(), out.mutable_data());
    return out;
}

template <typename T>
Matrix<T> array_to_matrix(const c_array<T>& a) {
    if (a.ndim() != 2) throw UsageError("expected a 2-D array of shape (frames, coeffs)");
    Matrix<T> m(std::size_t(a.shape(0)), std::size_t(a.shape(1)));
    std::copy(a.data(), a.data() + a.size(), m.data.begin());
    return m;
}

template <typename T>
std::vector<T> array_to_vector(const c_array<T>& a) {
    if (a.ndim() != 1) throw UsageError("expected a 1-D array");
    return std::vector<T>(a.data(), a.data() + a.shape(0));
}

template <typename T>
py::array_t<T> vector_to_array(const std::vector<T>& v) {
    py::array_t<T> out(py::ssize_t(v.size()));
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

audio::AudioClip make_clip(const c_array<double>& samples, int sample_rate) {
    audio::AudioClip clip;
    clip.samples = array_to_vector(samples);
    clip.sample_rate = sample_rate;
    return clip;
}

ztw::ZtwConfig make_ztw_config(double segment_ms, std::size_t dft_size, double hop_ms,
                               double pre_emphasis) {
    ztw::ZtwConfig cfg;
    cfg.segment_ms = segment_ms;
    cfg.dft_size = dft_size;
    cfg.hop_ms = hop_ms;
    cfg.pre_emphasis_alpha = pre_emphasis;
    return cfg;
}

py::dict metrics_dict(const experiment::Metrics& m) {
    py::dict d;
    d["tp"] = m.tp;
    d["fp"] = m.fp;
    d["fn"] = m.fn;
    d["tn"] = m.tn;
    d["precision"] = m.precision;
    d["recall"] = m.recall;
    d["f1"] = m.f1;
    d["accuracy"] = m.accuracy;
    return d;
}

py::dict history_dict(const tdnn::History& h) {
    py::list epochs;
    for (const auto& e : h.epochs) {
        py::dict d;
        d["epoch"] = e.epoch;
        d["train_loss"] = e.train_loss;
        d["train_accuracy"] = e.train_accuracy;
        d["train_f1"] = e.train_f1;
        d["val_loss"] = e.val_loss;
        d["val_accuracy"] = e.val_accuracy;
        d["val_f1"] = e.val_f1;
        epochs.append(d);
    }
    py::dict d;
    d["epochs"] = epochs;
    d["best_epoch"] = h.best_epoch;
    d["stopped_early"] = h.stopped_early;
    return d;
}

std::vector<tdnn::Sample> samples_from(const std::vector<c_array<float>>& arrays) {
    std::vector<tdnn::Sample> out;
    out.reserve(arrays.size());
    for (const auto& a : arrays) out.push_back(array_to_matrix<float>(a));
    return out;
}

}  // namespace

PYBIND11_MODULE(_dysflow, m) {
    m.doc() = "Speech disfluency feature extraction and classification";

    py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_RuntimeError);

    // -- audio ---------------------------------------------------------------

    m.def(
        "load_wav",
        [](const std::string& path) {
            const audio::AudioClip clip = audio::canonicalize(audio::load_wav(path));
            return py::make_tuple(vector_to_array(clip.samples), clip.sample_rate);
        },
        py::arg("path"),
        "Load a WAV file; returns (samples, sample_rate) downmixed to mono float64.");

    m.def(
        "write_wav",
        [](const std::string& path, const c_array<double>& samples, int sample_rate,
           const std::string& format) {
            audio::WavFormat fmt;
            if (format == "pcm16")
                fmt = audio::WavFormat::Pcm16;
            else if (format == "float32")
                fmt = audio::WavFormat::Float32;
            else
                throw UsageError("unknown wav format: " + format);
            audio::write_wav(path, make_clip(samples, sample_rate), fmt);
        },
        py::arg("path"), py::arg("samples"), py::arg("sample_rate"),
        py::arg("format") = "pcm16");

    // -- zero-time windowing -------------------------------------------------

    m.def(
        "make_w1",
        [](std::size_t m_, std::size_t dft_size) { return vector_to_array(ztw::make_w1(m_, dft_size)); },
        py::arg("m"), py::arg("dft_size"));

    m.def(
        "make_w2", [](std::size_t m_) { return vector_to_array(ztw::make_w2(m_)); },
        py::arg("m"));

    m.def(
        "ngd_spectrum",
        [](const c_array<double>& segment, std::size_t dft_size) {
            return vector_to_array(ztw::ngd_spectrum(array_to_vector(segment), dft_size));
        },
        py::arg("segment"), py::arg("dft_size"));

    m.def(
        "hilbert_envelope",
        [](const c_array<double>& v) {
            return vector_to_array(ztw::hilbert_envelope(array_to_vector(v)));
        },
        py::arg("values"));

    m.def(
        "ztw_spectrogram",
        [](const c_array<double>& samples, int sample_rate, double segment_ms,
           std::size_t dft_size, double hop_ms, double pre_emphasis) {
            const auto spec = ztw::ztw_spectrogram(
                make_clip(samples, sample_rate),
                make_ztw_config(segment_ms, dft_size, hop_ms, pre_emphasis));
            return matrix_to_array(spec.values);
        },
        py::arg("samples"), py::arg("sample_rate"), py::arg("segment_ms") = 5.0,
        py::arg("dft_size") = std::size_t(2048), py::arg("hop_ms") = 10.0,
        py::arg("pre_emphasis") = 0.97,
        "Spectro-temporal matrix of shape (frames, dft_size/2 + 1).");

    // -- cepstral features ---------------------------------------------------

    m.def(
        "extract",
        [](const c_array<double>& samples, int sample_rate, const std::string& kind) {
            experiment::FeatureConfig fc;
            fc.kind = cepstra::feature_kind_from_name(kind);
            const auto cm = experiment::extract_cepstra(make_clip(samples, sample_rate), fc);
            return matrix_to_array(cm.values);
        },
        py::arg("samples"), py::arg("sample_rate"), py::arg("kind") = "pe-ztwcc",
        "Static cepstra of shape (frames, 13). Kinds: pe-ztwcc, ztwcc, mfcc, plp.");

    m.def(
        "sdc",
        [](const c_array<float>& cepstra, std::size_t n, std::size_t d, std::size_t p,
           std::size_t k) {
            cepstra::CepstralMatrix cm;
            cm.values = array_to_matrix<float>(cepstra);
            return matrix_to_array(sdc::sdc_features(cm, {n, d, p, k}).values);
        },
        py::arg("cepstra"), py::arg("n") = std::size_t(13), py::arg("d") = std::size_t(1),
        py::arg("p") = std::size_t(3), py::arg("k") = std::size_t(7),
        "Shifted delta coefficients: (frames, N) in, (frames, N*(K+1)) out.");

    // -- curation ------------------------------------------------------------

    m.def(
        "detect_voice_activity",
        [](const c_array<double>& samples, int sample_rate, double frame_ms, double hop_ms,
           double threshold_db, int hangover_frames) {
            curation::VadParams params;
            params.frame_ms = frame_ms;
            params.hop_ms = hop_ms;
            params.threshold_db = threshold_db;
            params.hangover_frames = hangover_frames;
            const auto regions =
                curation::detect_voice_activity(make_clip(samples, sample_rate), params);
            py::list out;
            for (const auto& r : regions) out.append(py::make_tuple(r.start_s, r.end_s));
            return out;
        },
        py::arg("samples"), py::arg("sample_rate"), py::arg("frame_ms") = 30.0,
        py::arg("hop_ms") = 10.0, py::arg("threshold_db") = 35.0,
        py::arg("hangover_frames") = 5, "Speech regions as (start_s, end_s) tuples.");

    m.def(
        "standardize_clip",
        [](const c_array<double>& samples, int sample_rate, double event_start_s,
           double event_end_s) {
            curation::LabelEvent event;
            event.start_s = event_start_s;
            event.end_s = event_end_s;
            const auto cut = curation::standardize_clip(make_clip(samples, sample_rate), event);
            py::dict d;
            d["samples"] = vector_to_array(cut.clip.samples);
            d["sample_rate"] = cut.clip.sample_rate;
            d["event_start_in_clip_s"] = cut.event_start_in_clip_s;
            d["event_truncated"] = cut.event_truncated;
            return d;
        },
        py::arg("samples"), py::arg("sample_rate"), py::arg("event_start_s"),
        py::arg("event_end_s"), "Cut a standardized 3 s clip around a labeled event.");

    // -- classifier ----------------------------------------------------------

    py::class_<tdnn::TdnnModel>(m, "Tdnn")
        .def_static(
            "init",
            [](int input_frames, int input_width, std::uint64_t seed, int conv1_filters,
               int conv1_kernel, int conv1_dilation, int conv2_filters, int conv2_kernel,
               int conv2_dilation, int pool_size, double dropout, double l2_lambda,
               int fc1_units, int fc2_units) {
                tdnn::TdnnConfig cfg;
                cfg.input_frames = input_frames;
                cfg.input_width = input_width;
                cfg.conv1 = {conv1_filters, conv1_kernel, conv1_dilation};
                cfg.conv2 = {conv2_filters, conv2_kernel, conv2_dilation};
                cfg.pool_size = pool_size;
                cfg.dropout_rate = dropout;
                cfg.l2_lambda = l2_lambda;
                cfg.fc1_units = fc1_units;
                cfg.fc2_units = fc2_units;
                return tdnn::init_model(cfg, seed);
            },
            py::arg("input_frames"), py::arg("input_width"), py::arg("seed") = 0,
            py::arg("conv1_filters") = 64, py::arg("conv1_kernel") = 5,
            py::arg("conv1_dilation") = 2, py::arg("conv2_filters") = 128,
            py::arg("conv2_kernel") = 7, py::arg("conv2_dilation") = 3,
            py::arg("pool_size") = 2, py::arg("dropout") = 0.3, py::arg("l2_lambda") = 1e-4,
            py::arg("fc1_units") = 128, py::arg("fc2_units") = 64)
        .def_property_readonly("parameter_count",
                               [](const tdnn::TdnnModel& m_) { return tdnn::parameter_count(m_); })
        .def_property_readonly("input_frames",
                               [](const tdnn::TdnnModel& m_) { return m_.config.input_frames; })
        .def_property_readonly("input_width",
                               [](const tdnn::TdnnModel& m_) { return m_.config.input_width; })
        .def(
            "fit",
            [](tdnn::TdnnModel& self, const std::vector<c_array<float>>& train_x,
               const std::vector<int>& train_y, const std::vector<c_array<float>>& val_x,
               const std::vector<int>& val_y, double learning_rate, int batch_size,
               int max_epochs, int patience, bool class_weighting, std::uint64_t seed) {
                tdnn::TrainConfig tc;
                tc.learning_rate = learning_rate;
                tc.batch_size = batch_size;
                tc.max_epochs = max_epochs;
                tc.early_stop_patience = patience;
                tc.class_weighting = class_weighting;
                tc.seed = seed;
                auto [trained, history] = tdnn::train(self, samples_from(train_x), train_y,
                                                      samples_from(val_x), val_y, tc);
                self = std::move(trained);
                return history_dict(history);
            },
            py::arg("train_x"), py::arg("train_y"), py::arg("val_x") = std::vector<c_array<float>>{},
            py::arg("val_y") = std::vector<int>{}, py::arg("learning_rate") = 1e-3,
            py::arg("batch_size") = 32, py::arg("max_epochs") = 50, py::arg("patience") = 8,
            py::arg("class_weighting") = true, py::arg("seed") = 0,
            "Train in place; returns the per-epoch history.")
        .def(
            "predict",
            [](const tdnn::TdnnModel& self, const c_array<float>& sample) {
                const auto pred = tdnn::predict(self, array_to_matrix<float>(sample));
                return py::make_tuple(pred.probability, pred.label);
            },
            py::arg("sample"), "Returns (probability, label) with the 0.5 threshold inclusive.")
        .def("save",
             [](const tdnn::TdnnModel& self, const std::string& path) {
                 tdnn::save_checkpoint(self, path);
             })
        .def_static("load",
                    [](const std::string& path) { return tdnn::load_checkpoint(path); });

    // -- evaluation ----------------------------------------------------------

    m.def(
        "compute_metrics",
        [](const std::vector<int>& predictions, const std::vector<int>& labels) {
            return metrics_dict(experiment::compute_metrics(predictions, labels));
        },
        py::arg("predictions"), py::arg("labels"));
}
