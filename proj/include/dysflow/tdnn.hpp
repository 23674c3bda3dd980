#pragma once

// Shallow time-delay network for typical-vs-atypical clip classification:
// two dilated conv blocks (batch norm, ReLU, max pool, dropout) feeding a
// small fully connected head with a single sigmoid output. Training is
// in-repo: Adam on weighted binary cross-entropy with L2 on layer weights.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dysflow/matrix.hpp"
#include "dysflow/rng.hpp"
#include "dysflow/tdnn_net.hpp"

namespace dysflow::tdnn {

struct ConvSpec {
    int filters = 0;
    int kernel = 0;
    int dilation = 0;
};

struct TdnnConfig {
    ConvSpec conv1{64, 5, 2};
    ConvSpec conv2{128, 7, 3};
    int pool_size = 2;
    double dropout_rate = 0.3;
    double l2_lambda = 1e-4;
    int fc1_units = 128;
    int fc2_units = 64;
    int input_width = 104;   // feature columns; channels of conv1
    int input_frames = 300;  // time axis length

    void validate() const;

    // Time-axis lengths after each pooling stage, and the flatten width.
    int pooled1_frames() const { return input_frames / pool_size; }
    int pooled2_frames() const { return pooled1_frames() / pool_size; }
    int flatten_width() const { return conv2.filters * pooled2_frames(); }
};

struct TrainConfig {
    double learning_rate = 1e-3;
    int batch_size = 32;
    int max_epochs = 50;
    int early_stop_patience = 8;  // epochs without a validation-F1 improvement
    bool class_weighting = true;  // weight BCE inversely to class frequency
    std::uint64_t seed = 0;

    void validate() const;
};

struct TdnnModel {
    TdnnConfig config;
    Params<float> params;
    std::uint64_t rng_seed = 0;
};

enum class Mode { Train, Eval };

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double train_f1 = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
    double val_f1 = 0.0;
};

struct History {
    std::vector<EpochStats> epochs;
    int best_epoch = -1;  // epoch whose snapshot the returned model carries
    bool stopped_early = false;
};

struct Prediction {
    double probability = 0.0;
    int label = 0;  // probability >= 0.5, threshold inclusive
};

// Samples are feature matrices with rows = frames and cols = coefficients;
// they are transposed internally so convolution runs over time.
using Sample = Matrix<float>;

TdnnModel init_model(const TdnnConfig& cfg, std::uint64_t seed);

std::size_t parameter_count(const TdnnModel& model);

// Train mode draws dropout masks from `rng` and updates batch-norm running
// statistics; eval mode is deterministic and leaves the model untouched.
std::vector<double> forward(TdnnModel& model, const std::vector<Sample>& batch, Mode mode,
                            Rng* rng = nullptr);
std::vector<double> forward_eval(const TdnnModel& model, const std::vector<Sample>& batch);

// Mean binary cross-entropy (probabilities clipped to [1e-7, 1-1e-7]) plus
// l2_lambda times the sum of squared layer weights.
double loss(const std::vector<double>& probabilities, const std::vector<int>& labels,
            const TdnnModel& model, double l2_lambda);

std::pair<TdnnModel, History> train(const TdnnModel& model, const std::vector<Sample>& train_x,
                                    const std::vector<int>& train_y,
                                    const std::vector<Sample>& val_x,
                                    const std::vector<int>& val_y, const TrainConfig& tc);

Prediction predict(const TdnnModel& model, const Sample& sample);

// Backprop vs. central finite differences over every trainable parameter,
// in double precision, eval mode, full loss (BCE + L2). Returns the largest
// relative error.
double gradient_check(const TdnnModel& model, const Sample& sample, int label, double epsilon);

// Versioned binary checkpoint; round-trips bitwise.
void save_checkpoint(const TdnnModel& model, const std::filesystem::path& path);
TdnnModel load_checkpoint(const std::filesystem::path& path);

// [batch][channel][time] tensor from row-major frame matrices.
template <typename T>
Tensor3<T> batch_tensor(const std::vector<Sample>& batch, int frames, int width) {
    Tensor3<T> x(batch.size(), static_cast<std::size_t>(width), static_cast<std::size_t>(frames));
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto& m = batch[b];
        if (m.rows != static_cast<std::size_t>(frames) || m.cols != static_cast<std::size_t>(width))
            throw UsageError("tdnn: sample is " + std::to_string(m.rows) + "x" +
                                    std::to_string(m.cols) + ", model expects " +
                                    std::to_string(frames) + "x" + std::to_string(width));
        for (std::size_t t = 0; t < m.rows; ++t)
            for (std::size_t c = 0; c < m.cols; ++c) x.at(b, c, t) = T(m.at(t, c));
    }
    return x;
}

}  // namespace dysflow::tdnn
