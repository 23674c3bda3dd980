#pragma once

// Layer primitives for the dilated-convolution classifier, templated on the
// scalar type: training runs in float, gradient verification in double.
// Activations live in [batch][channel][time] tensors with time contiguous so
// the convolution inner loops stay vectorizable.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <type_traits>
#include <vector>

#include "dysflow/error.hpp"
#include "dysflow/matrix.hpp"
#include "dysflow/rng.hpp"

namespace dysflow::tdnn {

template <typename T>
struct Tensor3 {
    std::size_t batch = 0;
    std::size_t channels = 0;
    std::size_t steps = 0;
    std::vector<T> data;

    Tensor3() = default;
    Tensor3(std::size_t b, std::size_t c, std::size_t t)
        : batch(b), channels(c), steps(t), data(b * c * t, T(0)) {}

    T* row(std::size_t b, std::size_t c) { return data.data() + (b * channels + c) * steps; }
    const T* row(std::size_t b, std::size_t c) const {
        return data.data() + (b * channels + c) * steps;
    }
    T& at(std::size_t b, std::size_t c, std::size_t t) { return row(b, c)[t]; }
    T at(std::size_t b, std::size_t c, std::size_t t) const { return row(b, c)[t]; }
};

// ---------------------------------------------------------------------------
// Dilated 1-D convolution over time, zero-padded so the time axis is
// preserved ("same" padding). Weights are [out_ch][in_ch][kernel].

template <typename T>
struct Conv1d {
    std::size_t in_ch = 0;
    std::size_t out_ch = 0;
    std::size_t kernel = 1;
    std::size_t dilation = 1;
    std::vector<T> w;
    std::vector<T> b;

    void resize(std::size_t in, std::size_t out, std::size_t k, std::size_t d) {
        in_ch = in;
        out_ch = out;
        kernel = k;
        dilation = d;
        w.assign(out * in * k, T(0));
        b.assign(out, T(0));
    }

    // Distance between the first and last tap of the dilated kernel.
    std::size_t span() const { return (kernel - 1) * dilation; }
    std::size_t pad_left() const { return span() / 2; }

    T* tap(std::size_t o, std::size_t i) { return w.data() + (o * in_ch + i) * kernel; }
    const T* tap(std::size_t o, std::size_t i) const {
        return w.data() + (o * in_ch + i) * kernel;
    }
};

template <typename T>
Tensor3<T> conv1d_forward(const Conv1d<T>& c, const Tensor3<T>& x) {
    if (x.channels != c.in_ch) throw UsageError("conv1d: channel count mismatch");
    const auto t_len = static_cast<std::ptrdiff_t>(x.steps);
    const auto pad = static_cast<std::ptrdiff_t>(c.pad_left());
    Tensor3<T> y(x.batch, c.out_ch, x.steps);
    for (std::size_t bi = 0; bi < x.batch; ++bi) {
        for (std::size_t o = 0; o < c.out_ch; ++o) {
            T* yr = y.row(bi, o);
            std::fill(yr, yr + x.steps, c.b[o]);
            for (std::size_t i = 0; i < c.in_ch; ++i) {
                const T* xr = x.row(bi, i);
                const T* taps = c.tap(o, i);
                for (std::size_t j = 0; j < c.kernel; ++j) {
                    const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(j * c.dilation) - pad;
                    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -off);
                    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(t_len, t_len - off);
                    const T wj = taps[j];
                    for (std::ptrdiff_t t = lo; t < hi; ++t) yr[t] += wj * xr[t + off];
                }
            }
        }
    }
    return y;
}

template <typename T>
void conv1d_backward(const Conv1d<T>& c, const Tensor3<T>& x, const Tensor3<T>& dy,
                     Tensor3<T>& dx, Conv1d<T>& grad) {
    const auto t_len = static_cast<std::ptrdiff_t>(x.steps);
    const auto pad = static_cast<std::ptrdiff_t>(c.pad_left());
    dx = Tensor3<T>(x.batch, x.channels, x.steps);
    grad.resize(c.in_ch, c.out_ch, c.kernel, c.dilation);
    for (std::size_t bi = 0; bi < x.batch; ++bi) {
        for (std::size_t o = 0; o < c.out_ch; ++o) {
            const T* dyr = dy.row(bi, o);
            T db = T(0);
            for (std::size_t t = 0; t < dy.steps; ++t) db += dyr[t];
            grad.b[o] += db;
            for (std::size_t i = 0; i < c.in_ch; ++i) {
                const T* xr = x.row(bi, i);
                T* dxr = dx.row(bi, i);
                const T* taps = c.tap(o, i);
                T* dtaps = grad.tap(o, i);
                for (std::size_t j = 0; j < c.kernel; ++j) {
                    const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(j * c.dilation) - pad;
                    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -off);
                    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(t_len, t_len - off);
                    const T wj = taps[j];
                    T dw = T(0);
                    for (std::ptrdiff_t t = lo; t < hi; ++t) {
                        dw += dyr[t] * xr[t + off];
                        dxr[t + off] += wj * dyr[t];
                    }
                    dtaps[j] += dw;
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Batch normalization per channel. Train mode normalizes with batch
// statistics (biased variance) and folds them into the running estimates;
// eval mode is an affine map using the frozen running statistics.

template <typename T>
struct BatchNorm1d {
    std::size_t ch = 0;
    std::vector<T> gamma;
    std::vector<T> beta;
    std::vector<T> running_mean;
    std::vector<T> running_var;
    T momentum = T(0.1);
    T eps = T(1e-5);

    void resize(std::size_t c) {
        ch = c;
        gamma.assign(c, T(1));
        beta.assign(c, T(0));
        running_mean.assign(c, T(0));
        running_var.assign(c, T(1));
    }
};

template <typename T>
struct BnTrace {
    std::vector<T> inv_std;  // 1/sqrt(var + eps) actually used in the forward
    Tensor3<T> xhat;
    bool batch_stats = false;
};

template <typename T>
Tensor3<T> batchnorm_forward(BatchNorm1d<T>& bn, const Tensor3<T>& x, bool train, BnTrace<T>& tr) {
    if (x.channels != bn.ch) throw UsageError("batchnorm: channel count mismatch");
    const std::size_t n = x.batch * x.steps;
    tr.inv_std.assign(bn.ch, T(0));
    tr.xhat = Tensor3<T>(x.batch, x.channels, x.steps);
    tr.batch_stats = train;
    Tensor3<T> y(x.batch, x.channels, x.steps);
    for (std::size_t c = 0; c < bn.ch; ++c) {
        T mu, var;
        if (train) {
            T sum = T(0);
            for (std::size_t bi = 0; bi < x.batch; ++bi) {
                const T* xr = x.row(bi, c);
                for (std::size_t t = 0; t < x.steps; ++t) sum += xr[t];
            }
            mu = sum / T(n);
            T sq = T(0);
            for (std::size_t bi = 0; bi < x.batch; ++bi) {
                const T* xr = x.row(bi, c);
                for (std::size_t t = 0; t < x.steps; ++t) {
                    const T d = xr[t] - mu;
                    sq += d * d;
                }
            }
            var = sq / T(n);
            bn.running_mean[c] = (T(1) - bn.momentum) * bn.running_mean[c] + bn.momentum * mu;
            bn.running_var[c] = (T(1) - bn.momentum) * bn.running_var[c] + bn.momentum * var;
        } else {
            mu = bn.running_mean[c];
            var = bn.running_var[c];
        }
        const T istd = T(1) / std::sqrt(var + bn.eps);
        tr.inv_std[c] = istd;
        const T g = bn.gamma[c];
        const T be = bn.beta[c];
        for (std::size_t bi = 0; bi < x.batch; ++bi) {
            const T* xr = x.row(bi, c);
            T* hr = tr.xhat.row(bi, c);
            T* yr = y.row(bi, c);
            for (std::size_t t = 0; t < x.steps; ++t) {
                const T xh = (xr[t] - mu) * istd;
                hr[t] = xh;
                yr[t] = g * xh + be;
            }
        }
    }
    return y;
}

template <typename T>
void batchnorm_backward(const BatchNorm1d<T>& bn, const BnTrace<T>& tr, const Tensor3<T>& dy,
                        Tensor3<T>& dx, BatchNorm1d<T>& grad) {
    const T n = T(dy.batch * dy.steps);
    dx = Tensor3<T>(dy.batch, dy.channels, dy.steps);
    grad.resize(bn.ch);
    grad.gamma.assign(bn.ch, T(0));
    grad.beta.assign(bn.ch, T(0));
    for (std::size_t c = 0; c < bn.ch; ++c) {
        T sum_dy = T(0), sum_dy_xh = T(0);
        for (std::size_t bi = 0; bi < dy.batch; ++bi) {
            const T* dyr = dy.row(bi, c);
            const T* hr = tr.xhat.row(bi, c);
            for (std::size_t t = 0; t < dy.steps; ++t) {
                sum_dy += dyr[t];
                sum_dy_xh += dyr[t] * hr[t];
            }
        }
        grad.gamma[c] = sum_dy_xh;
        grad.beta[c] = sum_dy;
        const T g = bn.gamma[c];
        const T istd = tr.inv_std[c];
        if (tr.batch_stats) {
            // Batch statistics couple every element of the channel.
            const T scale = g * istd / n;
            for (std::size_t bi = 0; bi < dy.batch; ++bi) {
                const T* dyr = dy.row(bi, c);
                const T* hr = tr.xhat.row(bi, c);
                T* dxr = dx.row(bi, c);
                for (std::size_t t = 0; t < dy.steps; ++t)
                    dxr[t] = scale * (n * dyr[t] - sum_dy - hr[t] * sum_dy_xh);
            }
        } else {
            const T scale = g * istd;
            for (std::size_t bi = 0; bi < dy.batch; ++bi) {
                const T* dyr = dy.row(bi, c);
                T* dxr = dx.row(bi, c);
                for (std::size_t t = 0; t < dy.steps; ++t) dxr[t] = scale * dyr[t];
            }
        }
    }
}

// ---------------------------------------------------------------------------
// ReLU. The backward mask comes from the forward output; the subgradient at
// exactly zero is taken as zero.

template <typename T>
void relu_inplace(std::vector<T>& v) {
    for (auto& x : v)
        if (x < T(0)) x = T(0);
}

template <typename T>
void relu_backward_inplace(std::vector<T>& dv, const std::vector<T>& out) {
    for (std::size_t i = 0; i < dv.size(); ++i)
        if (out[i] <= T(0)) dv[i] = T(0);
}

// ---------------------------------------------------------------------------
// Max pooling over time, stride == window. A trailing remainder shorter than
// the window is dropped. At ties the earliest maximum wins, and the backward
// pass routes the gradient there.

template <typename T>
Tensor3<T> maxpool_forward(const Tensor3<T>& x, std::size_t pool, std::vector<std::size_t>& argmax) {
    if (pool == 0) throw UsageError("maxpool: pool size must be positive");
    const std::size_t t_out = x.steps / pool;
    Tensor3<T> y(x.batch, x.channels, t_out);
    argmax.assign(x.batch * x.channels * t_out, 0);
    std::size_t slot = 0;
    for (std::size_t bi = 0; bi < x.batch; ++bi) {
        for (std::size_t c = 0; c < x.channels; ++c) {
            const T* xr = x.row(bi, c);
            T* yr = y.row(bi, c);
            for (std::size_t t = 0; t < t_out; ++t) {
                std::size_t best = t * pool;
                for (std::size_t k = 1; k < pool; ++k)
                    if (xr[t * pool + k] > xr[best]) best = t * pool + k;
                yr[t] = xr[best];
                argmax[slot++] = best;
            }
        }
    }
    return y;
}

template <typename T>
Tensor3<T> maxpool_backward(const Tensor3<T>& dy, const std::vector<std::size_t>& argmax,
                            std::size_t steps_in) {
    Tensor3<T> dx(dy.batch, dy.channels, steps_in);
    std::size_t slot = 0;
    for (std::size_t bi = 0; bi < dy.batch; ++bi) {
        for (std::size_t c = 0; c < dy.channels; ++c) {
            const T* dyr = dy.row(bi, c);
            T* dxr = dx.row(bi, c);
            for (std::size_t t = 0; t < dy.steps; ++t) dxr[argmax[slot++]] += dyr[t];
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------
// Inverted dropout: kept elements are scaled by 1/(1-rate) so eval needs no
// rescaling. Masks are drawn in storage order from the caller's generator.

template <typename T>
std::vector<T> dropout_mask(std::size_t n, T rate, Rng& rng) {
    std::vector<T> mask(n);
    const T keep = T(1) / (T(1) - rate);
    for (std::size_t i = 0; i < n; ++i)
        mask[i] = rng.uniform() >= static_cast<double>(rate) ? keep : T(0);
    return mask;
}

template <typename T>
void apply_mask_inplace(std::vector<T>& v, const std::vector<T>& mask) {
    for (std::size_t i = 0; i < v.size(); ++i) v[i] *= mask[i];
}

// ---------------------------------------------------------------------------
// Fully connected layer; weights are [out][in], activations [rows][cols].

template <typename T>
struct Dense {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<T> w;
    std::vector<T> b;

    void resize(std::size_t n_in, std::size_t n_out) {
        in = n_in;
        out = n_out;
        w.assign(n_out * n_in, T(0));
        b.assign(n_out, T(0));
    }

    T* row(std::size_t o) { return w.data() + o * in; }
    const T* row(std::size_t o) const { return w.data() + o * in; }
};

template <typename T>
Matrix<T> dense_forward(const Dense<T>& d, const Matrix<T>& x) {
    if (x.cols != d.in) throw UsageError("dense: input width mismatch");
    Matrix<T> y(x.rows, d.out);
    for (std::size_t r = 0; r < x.rows; ++r) {
        const T* xr = x.row(r);
        T* yr = y.row(r);
        for (std::size_t o = 0; o < d.out; ++o) {
            const T* wr = d.row(o);
            T acc = d.b[o];
            for (std::size_t i = 0; i < d.in; ++i) acc += wr[i] * xr[i];
            yr[o] = acc;
        }
    }
    return y;
}

template <typename T>
void dense_backward(const Dense<T>& d, const Matrix<T>& x, const Matrix<T>& dy, Matrix<T>& dx,
                    Dense<T>& grad) {
    dx = Matrix<T>(x.rows, d.in);
    grad.resize(d.in, d.out);
    for (std::size_t r = 0; r < x.rows; ++r) {
        const T* xr = x.row(r);
        const T* dyr = dy.row(r);
        T* dxr = dx.row(r);
        for (std::size_t o = 0; o < d.out; ++o) {
            const T g = dyr[o];
            grad.b[o] += g;
            const T* wr = d.row(o);
            T* gwr = grad.row(o);
            for (std::size_t i = 0; i < d.in; ++i) {
                gwr[i] += g * xr[i];
                dxr[i] += g * wr[i];
            }
        }
    }
}

// ---------------------------------------------------------------------------

template <typename T>
T sigmoid(T z) {
    return T(1) / (T(1) + std::exp(-z));
}

template <typename T>
T clip_probability(T p) {
    return std::min(std::max(p, T(1e-7)), T(1) - T(1e-7));
}

// Binary cross-entropy of one prediction, with the probability clipped away
// from 0 and 1 so the logs stay finite.
template <typename T>
T bce(T p, int label) {
    const T q = clip_probability(p);
    return label ? -std::log(q) : -std::log(T(1) - q);
}

// ---------------------------------------------------------------------------
// The full network: two conv/BN/ReLU/pool/dropout blocks, then three dense
// layers with ReLU+dropout between them and a sigmoid on the single output.

template <typename T>
struct Params {
    Conv1d<T> conv1;
    BatchNorm1d<T> bn1;
    Conv1d<T> conv2;
    BatchNorm1d<T> bn2;
    Dense<T> fc1;
    Dense<T> fc2;
    Dense<T> fc3;
};

// Trainable parameters, in checkpoint order. The flag marks tensors subject
// to L2 regularization (layer weights, not biases or batch-norm parameters).
template <typename P, typename Fn>
void for_each_param(P& p, Fn&& fn) {
    fn(p.conv1.w, true);
    fn(p.conv1.b, false);
    fn(p.bn1.gamma, false);
    fn(p.bn1.beta, false);
    fn(p.conv2.w, true);
    fn(p.conv2.b, false);
    fn(p.bn2.gamma, false);
    fn(p.bn2.beta, false);
    fn(p.fc1.w, true);
    fn(p.fc1.b, false);
    fn(p.fc2.w, true);
    fn(p.fc2.b, false);
    fn(p.fc3.w, true);
    fn(p.fc3.b, false);
}

// Every tensor persisted in a checkpoint, including batch-norm running
// statistics, in declaration order.
template <typename P, typename Fn>
void for_each_state_tensor(P& p, Fn&& fn) {
    fn(p.conv1.w);
    fn(p.conv1.b);
    fn(p.bn1.gamma);
    fn(p.bn1.beta);
    fn(p.bn1.running_mean);
    fn(p.bn1.running_var);
    fn(p.conv2.w);
    fn(p.conv2.b);
    fn(p.bn2.gamma);
    fn(p.bn2.beta);
    fn(p.bn2.running_mean);
    fn(p.bn2.running_var);
    fn(p.fc1.w);
    fn(p.fc1.b);
    fn(p.fc2.w);
    fn(p.fc2.b);
    fn(p.fc3.w);
    fn(p.fc3.b);
}

template <typename T>
Params<T> zeros_like(const Params<T>& p) {
    Params<T> z;
    z.conv1.resize(p.conv1.in_ch, p.conv1.out_ch, p.conv1.kernel, p.conv1.dilation);
    z.bn1.resize(p.bn1.ch);
    z.conv2.resize(p.conv2.in_ch, p.conv2.out_ch, p.conv2.kernel, p.conv2.dilation);
    z.bn2.resize(p.bn2.ch);
    z.fc1.resize(p.fc1.in, p.fc1.out);
    z.fc2.resize(p.fc2.in, p.fc2.out);
    z.fc3.resize(p.fc3.in, p.fc3.out);
    for_each_state_tensor(z, [](auto& v) { std::fill(v.begin(), v.end(), typename std::decay_t<decltype(v)>::value_type(0)); });
    return z;
}

template <typename To, typename From>
Params<To> cast_params(const Params<From>& p) {
    Params<To> out;
    out.conv1.resize(p.conv1.in_ch, p.conv1.out_ch, p.conv1.kernel, p.conv1.dilation);
    out.bn1.resize(p.bn1.ch);
    out.conv2.resize(p.conv2.in_ch, p.conv2.out_ch, p.conv2.kernel, p.conv2.dilation);
    out.bn2.resize(p.bn2.ch);
    out.fc1.resize(p.fc1.in, p.fc1.out);
    out.fc2.resize(p.fc2.in, p.fc2.out);
    out.fc3.resize(p.fc3.in, p.fc3.out);
    const auto copy = [](const auto& src, auto& dst) {
        for (std::size_t i = 0; i < src.size(); ++i) dst[i] = To(src[i]);
    };
    copy(p.conv1.w, out.conv1.w);
    copy(p.conv1.b, out.conv1.b);
    copy(p.bn1.gamma, out.bn1.gamma);
    copy(p.bn1.beta, out.bn1.beta);
    copy(p.bn1.running_mean, out.bn1.running_mean);
    copy(p.bn1.running_var, out.bn1.running_var);
    copy(p.conv2.w, out.conv2.w);
    copy(p.conv2.b, out.conv2.b);
    copy(p.bn2.gamma, out.bn2.gamma);
    copy(p.bn2.beta, out.bn2.beta);
    copy(p.bn2.running_mean, out.bn2.running_mean);
    copy(p.bn2.running_var, out.bn2.running_var);
    copy(p.fc1.w, out.fc1.w);
    copy(p.fc1.b, out.fc1.b);
    copy(p.fc2.w, out.fc2.w);
    copy(p.fc2.b, out.fc2.b);
    copy(p.fc3.w, out.fc3.w);
    copy(p.fc3.b, out.fc3.b);
    return out;
}

// Forward-pass intermediates needed by the backward pass.
template <typename T>
struct Trace {
    Tensor3<T> x;
    BnTrace<T> bn1;
    Tensor3<T> a1;  // block-1 ReLU output (pre-pool)
    std::vector<std::size_t> arg1;
    Tensor3<T> m1;  // dropout mask, empty in eval mode
    Tensor3<T> d1;  // block-1 output / conv2 input
    BnTrace<T> bn2;
    Tensor3<T> a2;
    std::vector<std::size_t> arg2;
    Tensor3<T> m2;
    Tensor3<T> d2;
    Matrix<T> f;  // flattened [batch][channels*steps]
    Matrix<T> h1;  // fc1 ReLU output
    Matrix<T> mf1;
    Matrix<T> e1;
    Matrix<T> h2;
    Matrix<T> mf2;
    Matrix<T> e2;
    std::vector<T> logits;
    std::vector<T> probs;
};

template <typename T>
Matrix<T> flatten(const Tensor3<T>& x) {
    Matrix<T> f(x.batch, x.channels * x.steps);
    std::copy(x.data.begin(), x.data.end(), f.data.begin());
    return f;
}

template <typename T>
Tensor3<T> unflatten(const Matrix<T>& f, std::size_t channels, std::size_t steps) {
    Tensor3<T> x(f.rows, channels, steps);
    std::copy(f.data.begin(), f.data.end(), x.data.begin());
    return x;
}

// Runs the network on a batch. Train mode draws dropout masks from `rng`
// (mandatory when the rate is nonzero) and folds batch statistics into the
// batch-norm running estimates, which is why the parameters are mutable.
template <typename T>
void net_forward(Params<T>& p, const Tensor3<T>& x, bool train, T dropout_rate, Rng* rng,
                 Trace<T>& tr) {
    const bool dropping = train && dropout_rate > T(0);
    if (dropping && rng == nullptr)
        throw UsageError("net_forward: train-mode dropout needs a generator");
    tr = Trace<T>{};
    tr.x = x;

    Tensor3<T> z = conv1d_forward(p.conv1, x);
    z = batchnorm_forward(p.bn1, z, train, tr.bn1);
    relu_inplace(z.data);
    tr.a1 = std::move(z);
    Tensor3<T> q = maxpool_forward(tr.a1, std::size_t(2), tr.arg1);
    if (dropping) {
        tr.m1 = Tensor3<T>(q.batch, q.channels, q.steps);
        tr.m1.data = dropout_mask(q.data.size(), dropout_rate, *rng);
        apply_mask_inplace(q.data, tr.m1.data);
    }
    tr.d1 = std::move(q);

    z = conv1d_forward(p.conv2, tr.d1);
    z = batchnorm_forward(p.bn2, z, train, tr.bn2);
    relu_inplace(z.data);
    tr.a2 = std::move(z);
    q = maxpool_forward(tr.a2, std::size_t(2), tr.arg2);
    if (dropping) {
        tr.m2 = Tensor3<T>(q.batch, q.channels, q.steps);
        tr.m2.data = dropout_mask(q.data.size(), dropout_rate, *rng);
        apply_mask_inplace(q.data, tr.m2.data);
    }
    tr.d2 = std::move(q);

    tr.f = flatten(tr.d2);

    Matrix<T> g = dense_forward(p.fc1, tr.f);
    relu_inplace(g.data);
    tr.h1 = std::move(g);
    tr.e1 = tr.h1;
    if (dropping) {
        tr.mf1 = Matrix<T>(tr.h1.rows, tr.h1.cols);
        tr.mf1.data = dropout_mask(tr.h1.data.size(), dropout_rate, *rng);
        apply_mask_inplace(tr.e1.data, tr.mf1.data);
    }

    g = dense_forward(p.fc2, tr.e1);
    relu_inplace(g.data);
    tr.h2 = std::move(g);
    tr.e2 = tr.h2;
    if (dropping) {
        tr.mf2 = Matrix<T>(tr.h2.rows, tr.h2.cols);
        tr.mf2.data = dropout_mask(tr.h2.data.size(), dropout_rate, *rng);
        apply_mask_inplace(tr.e2.data, tr.mf2.data);
    }

    const Matrix<T> out = dense_forward(p.fc3, tr.e2);
    tr.logits.resize(out.rows);
    tr.probs.resize(out.rows);
    for (std::size_t r = 0; r < out.rows; ++r) {
        tr.logits[r] = out.at(r, 0);
        tr.probs[r] = sigmoid(out.at(r, 0));
    }
}

// Gradients of the un-regularized data loss with respect to every trainable
// parameter, given dL/dlogit per sample. L2 terms are the caller's business.
template <typename T>
void net_backward(const Params<T>& p, const Trace<T>& tr, const std::vector<T>& dlogits,
                  Params<T>& grad) {
    grad = zeros_like(p);

    Matrix<T> dz(tr.e2.rows, 1);
    for (std::size_t r = 0; r < dz.rows; ++r) dz.at(r, 0) = dlogits[r];

    Matrix<T> de2;
    dense_backward(p.fc3, tr.e2, dz, de2, grad.fc3);
    if (tr.mf2.data.size()) apply_mask_inplace(de2.data, tr.mf2.data);
    relu_backward_inplace(de2.data, tr.h2.data);

    Matrix<T> de1;
    dense_backward(p.fc2, tr.e1, de2, de1, grad.fc2);
    if (tr.mf1.data.size()) apply_mask_inplace(de1.data, tr.mf1.data);
    relu_backward_inplace(de1.data, tr.h1.data);

    Matrix<T> df;
    dense_backward(p.fc1, tr.f, de1, df, grad.fc1);
    Tensor3<T> dd2 = unflatten(df, tr.d2.channels, tr.d2.steps);
    if (tr.m2.data.size()) apply_mask_inplace(dd2.data, tr.m2.data);

    Tensor3<T> da2 = maxpool_backward(dd2, tr.arg2, tr.a2.steps);
    relu_backward_inplace(da2.data, tr.a2.data);
    Tensor3<T> dn2;
    batchnorm_backward(p.bn2, tr.bn2, da2, dn2, grad.bn2);
    Tensor3<T> dd1;
    conv1d_backward(p.conv2, tr.d1, dn2, dd1, grad.conv2);
    if (tr.m1.data.size()) apply_mask_inplace(dd1.data, tr.m1.data);

    Tensor3<T> da1 = maxpool_backward(dd1, tr.arg1, tr.a1.steps);
    relu_backward_inplace(da1.data, tr.a1.data);
    Tensor3<T> dn1;
    batchnorm_backward(p.bn1, tr.bn1, da1, dn1, grad.bn1);
    Tensor3<T> dx;
    conv1d_backward(p.conv1, tr.x, dn1, dx, grad.conv1);
}

}  // namespace dysflow::tdnn
