#include "dysflow/tdnn.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "dysflow/error.hpp"

namespace dysflow::tdnn {

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

// Tensor for a subset of the dataset, avoiding sample copies.
Tensor3<float> tensor_from_indices(const std::vector<Sample>& xs,
                                   const std::vector<std::size_t>& order, std::size_t from,
                                   std::size_t to, const TdnnConfig& cfg) {
    const auto frames = static_cast<std::size_t>(cfg.input_frames);
    const auto width = static_cast<std::size_t>(cfg.input_width);
    Tensor3<float> x(to - from, width, frames);
    for (std::size_t b = from; b < to; ++b) {
        const auto& m = xs[order[b]];
        if (m.rows != frames || m.cols != width)
            throw UsageError("tdnn: sample is " + std::to_string(m.rows) + "x" +
                             std::to_string(m.cols) + ", model expects " + std::to_string(frames) +
                             "x" + std::to_string(width));
        for (std::size_t t = 0; t < frames; ++t)
            for (std::size_t c = 0; c < width; ++c) x.at(b - from, c, t) = m.at(t, c);
    }
    return x;
}

// Eval-mode forward never writes to the parameters; the cast lets the const
// API reuse the one net_forward implementation.
std::vector<double> eval_probs(const TdnnModel& model, const std::vector<Sample>& xs,
                               std::size_t chunk) {
    auto& params = const_cast<Params<float>&>(model.params);
    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> probs;
    probs.reserve(xs.size());
    for (std::size_t start = 0; start < xs.size(); start += chunk) {
        const std::size_t stop = std::min(start + chunk, xs.size());
        const Tensor3<float> x = tensor_from_indices(xs, order, start, stop, model.config);
        Trace<float> tr;
        net_forward(params, x, false, 0.0f, nullptr, tr);
        for (const float p : tr.probs) probs.push_back(p);
    }
    return probs;
}

struct BinaryCounts {
    int tp = 0, fp = 0, fn = 0, tn = 0;
};

BinaryCounts count_predictions(const std::vector<double>& probs, const std::vector<int>& labels) {
    BinaryCounts c;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const int pred = probs[i] >= 0.5 ? 1 : 0;
        if (pred == 1 && labels[i] == 1) ++c.tp;
        if (pred == 1 && labels[i] == 0) ++c.fp;
        if (pred == 0 && labels[i] == 1) ++c.fn;
        if (pred == 0 && labels[i] == 0) ++c.tn;
    }
    return c;
}

double f1_of(const BinaryCounts& c) {
    const double precision = c.tp + c.fp > 0 ? double(c.tp) / (c.tp + c.fp) : 0.0;
    const double recall = c.tp + c.fn > 0 ? double(c.tp) / (c.tp + c.fn) : 0.0;
    return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

double accuracy_of(const BinaryCounts& c) {
    const int total = c.tp + c.fp + c.fn + c.tn;
    return total > 0 ? double(c.tp + c.tn) / total : 0.0;
}

void check_labels(const std::vector<int>& y, const char* which) {
    for (const int v : y)
        if (v != 0 && v != 1)
            throw UsageError(std::string("tdnn: ") + which + " labels must be 0 or 1");
}

// Per-tensor Adam moments, in the for_each_param traversal order.
struct AdamState {
    std::vector<std::vector<float>> m, v;
    long step = 0;
};

AdamState make_adam_state(Params<float>& p) {
    AdamState s;
    for_each_param(p, [&](std::vector<float>& t, bool) {
        s.m.emplace_back(t.size(), 0.0f);
        s.v.emplace_back(t.size(), 0.0f);
    });
    return s;
}

void adam_step(Params<float>& p, Params<float>& grad, AdamState& s, double lr) {
    ++s.step;
    const double bc1 = 1.0 - std::pow(kAdamBeta1, double(s.step));
    const double bc2 = 1.0 - std::pow(kAdamBeta2, double(s.step));
    std::vector<std::vector<float>*> pt, gt;
    for_each_param(p, [&](std::vector<float>& t, bool) { pt.push_back(&t); });
    for_each_param(grad, [&](std::vector<float>& t, bool) { gt.push_back(&t); });
    for (std::size_t k = 0; k < pt.size(); ++k) {
        auto& param = *pt[k];
        const auto& g = *gt[k];
        auto& m = s.m[k];
        auto& v = s.v[k];
        for (std::size_t i = 0; i < param.size(); ++i) {
            m[i] = float(kAdamBeta1 * m[i] + (1.0 - kAdamBeta1) * g[i]);
            v[i] = float(kAdamBeta2 * v[i] + (1.0 - kAdamBeta2) * double(g[i]) * g[i]);
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            param[i] -= float(lr * mhat / (std::sqrt(vhat) + kAdamEps));
        }
    }
}

// --- little-endian binary helpers -----------------------------------------

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
    put_u32(os, static_cast<std::uint32_t>(v));
    put_u32(os, static_cast<std::uint32_t>(v >> 32));
}

void put_f32(std::ostream& os, float v) { put_u32(os, std::bit_cast<std::uint32_t>(v)); }

void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }

std::uint32_t take_u32(std::istream& is, const char* what) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
        throw FormatError(std::string("checkpoint truncated reading ") + what);
    return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
           std::uint32_t(b[3]) << 24;
}

std::uint64_t take_u64(std::istream& is, const char* what) {
    const std::uint64_t lo = take_u32(is, what);
    const std::uint64_t hi = take_u32(is, what);
    return lo | hi << 32;
}

float take_f32(std::istream& is, const char* what) {
    return std::bit_cast<float>(take_u32(is, what));
}

double take_f64(std::istream& is, const char* what) {
    return std::bit_cast<double>(take_u64(is, what));
}

}  // namespace

void TdnnConfig::validate() const {
    const auto positive = [](int v, const char* name) {
        if (v <= 0) throw UsageError(std::string("tdnn config: ") + name + " must be positive");
    };
    positive(conv1.filters, "conv1.filters");
    positive(conv1.kernel, "conv1.kernel");
    positive(conv1.dilation, "conv1.dilation");
    positive(conv2.filters, "conv2.filters");
    positive(conv2.kernel, "conv2.kernel");
    positive(conv2.dilation, "conv2.dilation");
    positive(pool_size, "pool_size");
    positive(fc1_units, "fc1_units");
    positive(fc2_units, "fc2_units");
    positive(input_width, "input_width");
    positive(input_frames, "input_frames");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
        throw UsageError("tdnn config: dropout_rate must lie in [0, 1)");
    if (l2_lambda < 0.0) throw UsageError("tdnn config: l2_lambda must be non-negative");
    if (pooled2_frames() < 1)
        throw UsageError("tdnn config: input_frames too short for two pooling stages");
}

void TrainConfig::validate() const {
    if (learning_rate < 0.0) throw UsageError("train config: learning_rate must be non-negative");
    if (batch_size <= 0) throw UsageError("train config: batch_size must be positive");
    if (max_epochs <= 0) throw UsageError("train config: max_epochs must be positive");
    if (early_stop_patience <= 0)
        throw UsageError("train config: early_stop_patience must be positive");
}

TdnnModel init_model(const TdnnConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    TdnnModel model;
    model.config = cfg;
    model.rng_seed = seed;
    auto& p = model.params;
    p.conv1.resize(std::size_t(cfg.input_width), std::size_t(cfg.conv1.filters),
                   std::size_t(cfg.conv1.kernel), std::size_t(cfg.conv1.dilation));
    p.bn1.resize(std::size_t(cfg.conv1.filters));
    p.conv2.resize(std::size_t(cfg.conv1.filters), std::size_t(cfg.conv2.filters),
                   std::size_t(cfg.conv2.kernel), std::size_t(cfg.conv2.dilation));
    p.bn2.resize(std::size_t(cfg.conv2.filters));
    p.fc1.resize(std::size_t(cfg.flatten_width()), std::size_t(cfg.fc1_units));
    p.fc2.resize(std::size_t(cfg.fc1_units), std::size_t(cfg.fc2_units));
    p.fc3.resize(std::size_t(cfg.fc2_units), std::size_t(1));

    // Fan-in-scaled uniform draws for layer weights, in declaration order;
    // biases stay zero and batch norm keeps its identity initialization.
    Rng rng(seed);
    const auto fill = [&rng](std::vector<float>& w, std::size_t fan_in) {
        const double bound = std::sqrt(1.0 / double(fan_in));
        for (auto& v : w) v = float(rng.uniform(-bound, bound));
    };
    fill(p.conv1.w, p.conv1.in_ch * p.conv1.kernel);
    fill(p.conv2.w, p.conv2.in_ch * p.conv2.kernel);
    fill(p.fc1.w, p.fc1.in);
    fill(p.fc2.w, p.fc2.in);
    fill(p.fc3.w, p.fc3.in);
    return model;
}

std::size_t parameter_count(const TdnnModel& model) {
    std::size_t n = 0;
    for_each_param(const_cast<Params<float>&>(model.params),
                   [&](std::vector<float>& t, bool) { n += t.size(); });
    return n;
}

std::vector<double> forward(TdnnModel& model, const std::vector<Sample>& batch, Mode mode,
                            Rng* rng) {
    model.config.validate();
    if (batch.empty()) throw UsageError("tdnn forward: empty batch");
    if (mode == Mode::Eval) return eval_probs(model, batch, batch.size());
    const Tensor3<float> x =
        batch_tensor<float>(batch, model.config.input_frames, model.config.input_width);
    Trace<float> tr;
    net_forward(model.params, x, true, float(model.config.dropout_rate), rng, tr);
    return std::vector<double>(tr.probs.begin(), tr.probs.end());
}

std::vector<double> forward_eval(const TdnnModel& model, const std::vector<Sample>& batch) {
    model.config.validate();
    if (batch.empty()) throw UsageError("tdnn forward: empty batch");
    return eval_probs(model, batch, batch.size());
}

double loss(const std::vector<double>& probabilities, const std::vector<int>& labels,
            const TdnnModel& model, double l2_lambda) {
    if (probabilities.size() != labels.size() || probabilities.empty())
        throw UsageError("tdnn loss: probabilities and labels must be non-empty and equal length");
    check_labels(labels, "loss");
    double data = 0.0;
    for (std::size_t i = 0; i < probabilities.size(); ++i)
        data += bce(probabilities[i], labels[i]);
    data /= double(probabilities.size());
    double l2 = 0.0;
    for_each_param(const_cast<Params<float>&>(model.params),
                   [&](std::vector<float>& t, bool is_weight) {
                       if (!is_weight) return;
                       for (const float w : t) l2 += double(w) * w;
                   });
    return data + l2_lambda * l2;
}

std::pair<TdnnModel, History> train(const TdnnModel& model0, const std::vector<Sample>& train_x,
                                    const std::vector<int>& train_y,
                                    const std::vector<Sample>& val_x,
                                    const std::vector<int>& val_y, const TrainConfig& tc) {
    tc.validate();
    model0.config.validate();
    if (train_x.empty()) throw DataError("tdnn train: empty training set");
    if (train_x.size() != train_y.size() || val_x.size() != val_y.size())
        throw UsageError("tdnn train: samples and labels differ in length");
    check_labels(train_y, "train");
    check_labels(val_y, "validation");

    TdnnModel model = model0;
    const double lambda = model.config.l2_lambda;

    double w0 = 1.0, w1 = 1.0;
    if (tc.class_weighting) {
        const auto n1 = std::size_t(std::count(train_y.begin(), train_y.end(), 1));
        const std::size_t n0 = train_y.size() - n1;
        if (n0 > 0 && n1 > 0) {
            w0 = double(train_y.size()) / (2.0 * double(n0));
            w1 = double(train_y.size()) / (2.0 * double(n1));
        }
    }

    Rng rng(tc.seed);
    AdamState adam = make_adam_state(model.params);
    std::vector<std::size_t> order(train_x.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto batch = std::size_t(tc.batch_size);

    History hist;
    Params<float> best_params = model.params;
    double best_f1 = -1.0;
    int stall = 0;

    for (int epoch = 1; epoch <= tc.max_epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < train_x.size(); start += batch) {
            const std::size_t stop = std::min(start + batch, train_x.size());
            const Tensor3<float> x = tensor_from_indices(train_x, order, start, stop, model.config);
            Trace<float> tr;
            net_forward(model.params, x, true, float(model.config.dropout_rate), &rng, tr);

            // Weighted mean BCE over the batch.
            double sum_w = 0.0, batch_loss = 0.0;
            for (std::size_t i = start; i < stop; ++i)
                sum_w += train_y[order[i]] ? w1 : w0;
            std::vector<float> dlogits(stop - start);
            for (std::size_t i = start; i < stop; ++i) {
                const int y = train_y[order[i]];
                const double w = y ? w1 : w0;
                const double prob = tr.probs[i - start];
                batch_loss += w * bce(prob, y);
                const bool clipped = prob <= 1e-7 || prob >= 1.0 - 1e-7;
                dlogits[i - start] = float(clipped ? 0.0 : w * (prob - y) / sum_w);
            }
            batch_loss /= sum_w;
            if (!std::isfinite(batch_loss))
                throw DataError("tdnn train: non-finite loss at epoch " + std::to_string(epoch));

            Params<float> grad;
            net_backward(model.params, tr, dlogits, grad);
            std::vector<std::vector<float>*> pt, gt;
            std::vector<bool> is_w;
            for_each_param(model.params, [&](std::vector<float>& t, bool w) {
                pt.push_back(&t);
                is_w.push_back(w);
            });
            for_each_param(grad, [&](std::vector<float>& t, bool) { gt.push_back(&t); });
            for (std::size_t k = 0; k < pt.size(); ++k) {
                if (!is_w[k]) continue;
                auto& g = *gt[k];
                const auto& p = *pt[k];
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += float(2.0 * lambda) * p[i];
            }
            adam_step(model.params, grad, adam, tc.learning_rate);
        }

        // Epoch bookkeeping in eval mode so dropout noise does not distort
        // the history.
        EpochStats es;
        es.epoch = epoch;
        const std::vector<double> train_probs = eval_probs(model, train_x, batch);
        es.train_loss = loss(train_probs, train_y, model, lambda);
        const BinaryCounts tc_counts = count_predictions(train_probs, train_y);
        es.train_accuracy = accuracy_of(tc_counts);
        es.train_f1 = f1_of(tc_counts);
        if (!val_x.empty()) {
            const std::vector<double> val_probs = eval_probs(model, val_x, batch);
            es.val_loss = loss(val_probs, val_y, model, lambda);
            const BinaryCounts vc = count_predictions(val_probs, val_y);
            es.val_accuracy = accuracy_of(vc);
            es.val_f1 = f1_of(vc);
        }
        hist.epochs.push_back(es);

        if (val_x.empty()) {
            best_params = model.params;
            hist.best_epoch = epoch;
            continue;
        }
        if (es.val_f1 > best_f1) {
            best_f1 = es.val_f1;
            best_params = model.params;
            hist.best_epoch = epoch;
            stall = 0;
        } else if (++stall >= tc.early_stop_patience) {
            hist.stopped_early = true;
            break;
        }
    }

    model.params = best_params;
    return {std::move(model), std::move(hist)};
}

Prediction predict(const TdnnModel& model, const Sample& sample) {
    const std::vector<double> probs = forward_eval(model, {sample});
    Prediction pr;
    pr.probability = probs[0];
    pr.label = probs[0] >= 0.5 ? 1 : 0;
    return pr;
}

double gradient_check(const TdnnModel& model, const Sample& sample, int label, double epsilon) {
    model.config.validate();
    if (label != 0 && label != 1) throw UsageError("gradient_check: label must be 0 or 1");
    if (epsilon <= 0.0) throw UsageError("gradient_check: epsilon must be positive");
    const double lambda = model.config.l2_lambda;
    Params<double> p = cast_params<double>(model.params);
    const Tensor3<double> x =
        batch_tensor<double>({sample}, model.config.input_frames, model.config.input_width);

    const auto full_loss = [&](Params<double>& q) {
        Trace<double> tr;
        net_forward(q, x, false, 0.0, nullptr, tr);
        double l2 = 0.0;
        for_each_param(q, [&](std::vector<double>& t, bool is_weight) {
            if (!is_weight) return;
            for (const double w : t) l2 += w * w;
        });
        return bce(tr.probs[0], label) + lambda * l2;
    };

    Trace<double> tr;
    net_forward(p, x, false, 0.0, nullptr, tr);
    const double prob = tr.probs[0];
    const bool clipped = prob <= 1e-7 || prob >= 1.0 - 1e-7;
    const std::vector<double> dlogits{clipped ? 0.0 : prob - label};
    Params<double> grad;
    net_backward(p, tr, dlogits, grad);
    {
        std::vector<std::vector<double>*> pt, gt;
        std::vector<bool> is_w;
        for_each_param(p, [&](std::vector<double>& t, bool w) {
            pt.push_back(&t);
            is_w.push_back(w);
        });
        for_each_param(grad, [&](std::vector<double>& t, bool) { gt.push_back(&t); });
        for (std::size_t k = 0; k < pt.size(); ++k) {
            if (!is_w[k]) continue;
            for (std::size_t i = 0; i < gt[k]->size(); ++i)
                (*gt[k])[i] += 2.0 * lambda * (*pt[k])[i];
        }
    }

    std::vector<std::vector<double>*> pt, gt;
    for_each_param(p, [&](std::vector<double>& t, bool) { pt.push_back(&t); });
    for_each_param(grad, [&](std::vector<double>& t, bool) { gt.push_back(&t); });
    double max_rel = 0.0;
    for (std::size_t k = 0; k < pt.size(); ++k) {
        auto& t = *pt[k];
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double keep = t[i];
            t[i] = keep + epsilon;
            const double up = full_loss(p);
            t[i] = keep - epsilon;
            const double down = full_loss(p);
            t[i] = keep;
            const double numeric = (up - down) / (2.0 * epsilon);
            const double analytic = (*gt[k])[i];
            const double denom = std::max({1.0, std::abs(numeric), std::abs(analytic)});
            max_rel = std::max(max_rel, std::abs(numeric - analytic) / denom);
        }
    }
    return max_rel;
}

void save_checkpoint(const TdnnModel& model, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write checkpoint: " + path.string());
    f.write("TDN1", 4);
    const auto& cfg = model.config;
    for (const int v : {cfg.input_width, cfg.input_frames, cfg.conv1.filters, cfg.conv1.kernel,
                        cfg.conv1.dilation, cfg.conv2.filters, cfg.conv2.kernel,
                        cfg.conv2.dilation, cfg.pool_size, cfg.fc1_units, cfg.fc2_units})
        put_u32(f, static_cast<std::uint32_t>(v));
    put_f64(f, cfg.dropout_rate);
    put_f64(f, cfg.l2_lambda);
    put_u64(f, model.rng_seed);
    for_each_state_tensor(const_cast<Params<float>&>(model.params),
                          [&](std::vector<float>& t) {
                              for (const float v : t) put_f32(f, v);
                          });
    if (!f) throw DataError("short write saving checkpoint: " + path.string());
}

TdnnModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot read checkpoint: " + path.string());
    char magic[4];
    if (!f.read(magic, 4) || std::memcmp(magic, "TDN1", 4) != 0)
        throw FormatError("not a TDN1 checkpoint: " + path.string());
    TdnnConfig cfg;
    const auto geti = [&](const char* what) {
        return static_cast<int>(take_u32(f, what));
    };
    cfg.input_width = geti("input_width");
    cfg.input_frames = geti("input_frames");
    cfg.conv1.filters = geti("conv1.filters");
    cfg.conv1.kernel = geti("conv1.kernel");
    cfg.conv1.dilation = geti("conv1.dilation");
    cfg.conv2.filters = geti("conv2.filters");
    cfg.conv2.kernel = geti("conv2.kernel");
    cfg.conv2.dilation = geti("conv2.dilation");
    cfg.pool_size = geti("pool_size");
    cfg.fc1_units = geti("fc1_units");
    cfg.fc2_units = geti("fc2_units");
    cfg.dropout_rate = take_f64(f, "dropout_rate");
    cfg.l2_lambda = take_f64(f, "l2_lambda");
    const std::uint64_t seed = take_u64(f, "rng_seed");
    cfg.validate();

    TdnnModel model = init_model(cfg, seed);
    for_each_state_tensor(model.params, [&](std::vector<float>& t) {
        for (auto& v : t) v = take_f32(f, "parameter tensor");
    });
    if (f.peek() != std::ifstream::traits_type::eof())
        throw FormatError("trailing bytes after checkpoint payload: " + path.string());
    return model;
}

}  // namespace dysflow::tdnn
